"""Reference optimizers: GD, SGD and plain projected online gradient descent.

The o2nc-ogd learner plugs into the same engine as the optimistic one
(same episodes, comparators and regret accounting), so its traces are
directly comparable.  GD/SGD are unconstrained descent loops with their
own lightweight result type.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import dot
from .learners import init_delta, project_ball


def gd_step(x, grad, eta):
    """x - eta * grad."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return x - eta * grad


def o2nc_ogd_step(delta, g, eta, D):
    """Projected online gradient step on the direction ball."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return project_ball(delta - eta * g, D)


class OgdLearner:
    """Projected OGD inside the conversion engine: Delta' = Pi(Delta - eta g).

    Initialization matches the engine contract (-D h1/||h1||); hints are
    ignored.
    """

    name = "o2nc-ogd"

    def __init__(self, eta):
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.eta = float(eta)
        self.delta = None
        self.D = None
        self.last_eta = None
        self._g = None

    def init(self, h1, D):
        self.D = float(D)
        self.delta = init_delta(h1, D)
        return self.delta

    def observe(self, g):
        self._g = g

    def propose(self, h_next):
        self.delta = o2nc_ogd_step(self.delta, self._g, self.eta, self.D)
        self.last_eta = self.eta
        return self.delta

    def episode_boundary(self):
        pass

    def kernel_spec(self):
        return {"learner_code": 1, "use_adaptive": False, "eta": self.eta,
                "gamma": 0.0, "alpha": 1.0}

    def describe(self):
        return {"kind": "o2nc-ogd", "eta": self.eta}


def default_gd_eta(problem):
    return 1.0 / problem.L1


def default_sgd_eta(problem, sigma, M):
    """min(1/L1, D'/(sigma sqrt(M))) with the textbook D' = 1."""
    if sigma <= 0:
        return 1.0 / problem.L1
    return min(1.0 / problem.L1, 1.0 / (sigma * math.sqrt(M)))


def default_ogd_eta(problem, noise, D, T):
    """D / (G sqrt(T)) with G estimated from the start-point oracle call."""
    g1 = problem.grad(problem.x0)
    G = float(np.linalg.norm(g1)) + noise.sigma
    if G <= 0.0:
        return D / math.sqrt(T)
    return D / (G * math.sqrt(T))


@dataclass
class DescentResult:
    """Trace of a GD/SGD run; analytic gradient norms are diagnostics."""

    problem: dict
    noise: dict
    config: dict
    seed: int
    n_iter: int
    trace_stride: int
    xs: np.ndarray = field(repr=False)
    grad_norms: np.ndarray = field(repr=False)
    output: np.ndarray = None
    output_iteration: int = 0
    grad_norm_output: float = 0.0
    f_final: float = 0.0
    wall_time_s: float = 0.0

    def to_dict(self):
        return {
            "kind": "descent_run", "problem": self.problem, "noise": self.noise,
            "config": self.config, "seed": self.seed, "n_iter": self.n_iter,
            "trace_stride": self.trace_stride, "xs": self.xs.tolist(),
            "grad_norms": self.grad_norms.tolist(), "output": self.output.tolist(),
            "output_iteration": self.output_iteration,
            "grad_norm_output": self.grad_norm_output, "f_final": self.f_final,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "descent_run":
            raise ValueError("not a DescentResult payload")
        return cls(problem=d["problem"], noise=d["noise"], config=d["config"],
                   seed=d["seed"], n_iter=d["n_iter"],
                   trace_stride=d["trace_stride"],
                   xs=np.asarray(d["xs"]), grad_norms=np.asarray(d["grad_norms"]),
                   output=np.asarray(d["output"]),
                   output_iteration=d["output_iteration"],
                   grad_norm_output=d["grad_norm_output"],
                   f_final=d["f_final"], wall_time_s=d["wall_time_s"])


def run_descent(problem, noise, eta, M, kind="gd", force_path=None,
                trace_limit=100_000):
    """Run (stochastic) gradient descent for M iterations.

    kind "gd" ignores the noise model; "sgd" feeds oracle gradients.  The
    output point is the iterate with the smallest analytic gradient norm
    when the run is noise-free, the final iterate otherwise.
    """
    if kind not in ("gd", "sgd"):
        raise ValueError(f"unknown descent kind: {kind!r}")
    if M < 1:
        raise ValueError("M must be positive")
    use_noise = kind == "sgd" and noise.sigma > 0.0
    d = problem.dim
    xs = np.zeros((M + 1, d))
    xs[0] = problem.x0

    start = time.perf_counter()
    use_kernel = problem.kernel_pack is not None and (
        not use_noise or noise.mode == "shared-seed")
    if force_path == "kernel" and not use_kernel:
        raise ValueError("kernel path unavailable for this problem/noise")
    if force_path is None:
        use_kernel = use_kernel and kernels.NUMBA_ENABLED
    elif force_path == "numpy":
        use_kernel = False

    if use_kernel:
        eps = (noise.noise_block(np.arange(M + 1), d) if use_noise
               else np.zeros((1, 1)))
        pcode, pa, pb, pc, A, yv, mu = problem.kernel_pack
        kernels.run_descent_loop(M, eta, pcode, pa, pb, pc, A, yv, mu,
                                 np.ascontiguousarray(eps), use_noise, xs)
    else:
        for n in range(1, M + 1):
            g = problem.grad(xs[n - 1])
            if use_noise:
                g = g + noise.noise(n, xs[n - 1])
            xs[n] = xs[n - 1] - eta * g
    wall = time.perf_counter() - start

    grad_norms = np.empty(M + 1)
    for n in range(M + 1):
        gi = problem.grad(xs[n])
        grad_norms[n] = math.sqrt(dot(gi, gi))
    if use_noise:
        out_iter = M
    else:
        out_iter = int(np.argmin(grad_norms))
    output = xs[out_iter].copy()
    stride = 1 if M <= trace_limit else math.ceil(M / trace_limit)
    return DescentResult(
        problem={"name": problem.name, "params": problem.params},
        noise={"sigma": noise.sigma, "mode": noise.mode, "rng_seed": noise.rng_seed},
        config={"kind": kind, "eta": eta, "M": M},
        seed=noise.rng_seed, n_iter=M, trace_stride=stride,
        xs=np.ascontiguousarray(xs[::stride]),
        grad_norms=np.ascontiguousarray(grad_norms[::stride]),
        output=output, output_iteration=out_iter,
        grad_norm_output=float(grad_norms[out_iter]),
        f_final=problem.f(xs[M]), wall_time_s=wall)
