"""Conversion loop: iterate/midpoint/extrapolation bookkeeping and episodes.

Each run executes exactly K*T iterations of

    x_n = x_{n-1} + Delta_n,   w_n = x_{n-1} + Delta_n/2,   z_n = x_n + Delta_n/2
    g_n = oracle(w_n; xi_n),   h_{n+1} = oracle(z_n; xi_n)

with the learner choosing Delta_{n+1} inside the radius-D ball.  Episodes
of length T get a comparator u^k = -D sum(g)/||sum(g)||, a regret tally
and an averaged iterate w_bar^k; the run output is the best w_bar^k by
true gradient norm (deterministic mode) or a uniformly sampled one
(stochastic mode).

Bundled learner/problem pairs run through the jitted kernel loop when
numba is enabled; anything else takes the generic numpy path.  Both
paths produce bit-identical traces.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, rng
from .kernels import dot

_SELECT_TAG = 0x53454C45  # stream tag for the output-selection draw

FULL_TRACE_LIMIT = 100_000


class ContractViolation(RuntimeError):
    """A learner or run broke a runtime contract (e.g. left the D-ball)."""


@dataclass(frozen=True)
class EngineConfig:
    M: int
    T: int
    D: float
    mode: str = "deterministic"
    K: int = None

    def __post_init__(self):
        if self.M < 1 or self.T < 1:
            raise ValueError("M and T must be positive integers")
        if self.D <= 0:
            raise ValueError("D must be positive")
        if self.mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        k = self.M // self.T if self.K is None else self.K
        if k < 1:
            raise ValueError("budget admits no full episode (K < 1)")
        if k * self.T > self.M:
            raise ValueError("K*T exceeds the iteration budget M")
        object.__setattr__(self, "K", int(k))

    @property
    def n_iter(self):
        return self.K * self.T


@dataclass
class IterationRecord:
    n: int
    x_prev: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    w: np.ndarray
    z: np.ndarray
    g: np.ndarray
    h: np.ndarray
    eta: float


@dataclass
class EpisodeRecord:
    k: int
    grad_sum: np.ndarray
    comparator: np.ndarray
    w_bar: np.ndarray
    regret: float
    grad_norm_at_wbar: float
    err_sq_sum: float       # sum of ||g_n - h_n||^2 over the episode
    dd_sq_sum: float        # sum of ||Delta_n - Delta_{n-1}||^2 (global n >= 2)
    eta_first: float
    eta_last: float
    eta_min: float
    eta_max: float
    f_end: float            # F(x_{kT})


@dataclass
class RunResult:
    problem: dict
    noise: dict
    config: dict
    learner: dict
    seed: int
    n_iter: int
    trace_stride: int
    trace: dict = field(repr=False)  # arrays keyed by name; see _assemble
    episodes: list = field(repr=False)
    output: np.ndarray = None
    output_episode: int = 0
    avg_grad_norm_wbar: float = 0.0
    grad_norm_output: float = 0.0
    total_regret: float = 0.0
    f_final: float = 0.0
    wall_time_s: float = 0.0

    def iteration_records(self):
        """Materialize IterationRecords; requires an unthinned trace."""
        if self.trace_stride != 1:
            raise ValueError("iteration records need a full trace (stride 1)")
        t = self.trace
        for i, n in enumerate(t["iters"]):
            yield IterationRecord(
                n=int(n), x_prev=t["x_prev"][i], delta=t["delta"][i], x=t["x"][i],
                w=t["w"][i], z=t["z"][i], g=t["g"][i], h=t["h"][i],
                eta=float(t["eta"][i]))

    def to_dict(self):
        trace = {k: v.tolist() for k, v in self.trace.items()}
        episodes = [
            {"k": e.k, "grad_sum": e.grad_sum.tolist(),
             "comparator": e.comparator.tolist(), "w_bar": e.w_bar.tolist(),
             "regret": e.regret, "grad_norm_at_wbar": e.grad_norm_at_wbar,
             "err_sq_sum": e.err_sq_sum, "dd_sq_sum": e.dd_sq_sum,
             "eta_first": e.eta_first, "eta_last": e.eta_last,
             "eta_min": e.eta_min, "eta_max": e.eta_max, "f_end": e.f_end}
            for e in self.episodes
        ]
        return {
            "kind": "engine_run", "problem": self.problem, "noise": self.noise,
            "config": self.config, "learner": self.learner, "seed": self.seed,
            "n_iter": self.n_iter, "trace_stride": self.trace_stride,
            "trace": trace, "episodes": episodes, "output": self.output.tolist(),
            "output_episode": self.output_episode,
            "avg_grad_norm_wbar": self.avg_grad_norm_wbar,
            "grad_norm_output": self.grad_norm_output,
            "total_regret": self.total_regret, "f_final": self.f_final,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "engine_run":
            raise ValueError("not an engine RunResult payload")
        trace = {}
        for k, v in d["trace"].items():
            arr = np.asarray(v, dtype=np.int64 if k == "iters" else np.float64)
            trace[k] = arr
        episodes = [
            EpisodeRecord(
                k=e["k"], grad_sum=np.asarray(e["grad_sum"]),
                comparator=np.asarray(e["comparator"]),
                w_bar=np.asarray(e["w_bar"]), regret=e["regret"],
                grad_norm_at_wbar=e["grad_norm_at_wbar"],
                err_sq_sum=e["err_sq_sum"], dd_sq_sum=e["dd_sq_sum"],
                eta_first=e["eta_first"], eta_last=e["eta_last"],
                eta_min=e["eta_min"], eta_max=e["eta_max"], f_end=e["f_end"])
            for e in d["episodes"]
        ]
        return cls(problem=d["problem"], noise=d["noise"], config=d["config"],
                   learner=d["learner"], seed=d["seed"], n_iter=d["n_iter"],
                   trace_stride=d["trace_stride"], trace=trace, episodes=episodes,
                   output=np.asarray(d["output"]),
                   output_episode=d["output_episode"],
                   avg_grad_norm_wbar=d["avg_grad_norm_wbar"],
                   grad_norm_output=d["grad_norm_output"],
                   total_regret=d["total_regret"], f_final=d["f_final"],
                   wall_time_s=d["wall_time_s"])


def run_results_equal(a, b, ignore_wall_time=True):
    """Exact equality of two RunResults (arrays compared bitwise)."""
    da, db = a.to_dict(), b.to_dict()
    if ignore_wall_time:
        da.pop("wall_time_s")
        db.pop("wall_time_s")
    return da == db


# ---------------------------------------------------------------------------
# episode-level operations


def comparator(grad_sum, D):
    """Best fixed direction in hindsight: -D grad_sum/||grad_sum|| (0 if degenerate)."""
    if D <= 0:
        raise ValueError("D must be positive")
    g = np.asarray(grad_sum, dtype=np.float64)
    n = math.sqrt(dot(g, g))
    if n == 0.0:
        return np.zeros_like(g)
    return (-(D / n)) * g


def episode_average(ws):
    """Componentwise arithmetic mean of the episode's midpoints."""
    arr = np.asarray(ws, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("need a nonempty sequence of vectors")
    return arr.mean(axis=0)


def shifting_regret(episodes):
    """Sum over episodes k and steps n of <g_n, Delta_n - u^k>.

    `episodes` is a sequence of (g_list, delta_list, u) triples of equal
    episode length.
    """
    if not episodes:
        raise ValueError("need at least one episode")
    T = None
    total = 0.0
    for gs, deltas, u in episodes:
        gs = np.asarray(gs, dtype=np.float64)
        ds = np.asarray(deltas, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        if gs.shape != ds.shape:
            raise ValueError("gradient and direction lists differ in shape")
        if T is None:
            T = gs.shape[0]
        elif gs.shape[0] != T:
            raise ValueError("episodes must have equal length")
        total += float(np.sum(gs * (ds - u[None, :])))
    return total


def select_output(episodes, mode, seed):
    """Pick the run output among the averaged iterates w_bar^k.

    Deterministic mode: smallest true gradient norm, ties to the smallest
    k.  Stochastic mode: uniform draw from the run's seeded stream.
    """
    if not episodes:
        raise ValueError("need at least one episode")
    if mode == "deterministic":
        norms = np.array([e.grad_norm_at_wbar for e in episodes])
        idx = int(np.argmin(norms))
    else:
        idx = rng.uniform_index(seed, _SELECT_TAG, len(episodes))
    return episodes[idx].w_bar, idx + 1


# ---------------------------------------------------------------------------
# the run itself


def _noise_array(noise, n_iter, dim):
    if noise.sigma == 0.0:
        return np.zeros((1, 1)), False
    eps = noise.noise_block(np.arange(n_iter + 1), dim)
    return np.ascontiguousarray(eps), True


def _run_kernel_path(problem, noise, cfg, spec, arrays):
    eps, use_noise = _noise_array(noise, cfg.n_iter, problem.dim)
    pcode, pa, pb, pc, A, yv, mu = problem.kernel_pack
    status = kernels.run_ball_loop(
        cfg.D, cfg.n_iter, cfg.T, spec["learner_code"], spec["eta"],
        spec["use_adaptive"], spec["gamma"], spec["alpha"],
        pcode, pa, pb, pc, A, yv, mu, eps, use_noise,
        arrays["xs"], arrays["ws"], arrays["zs"], arrays["gs"],
        arrays["hints"], arrays["deltas"], arrays["etas"])
    if status != 0:
        raise ContractViolation("direction left the radius-D ball")


def _run_generic_path(problem, noise, cfg, learner, arrays):
    xs, ws, zs = arrays["xs"], arrays["ws"], arrays["zs"]
    gs, hints, deltas, etas = (arrays["gs"], arrays["hints"], arrays["deltas"],
                               arrays["etas"])
    D, T = cfg.D, cfg.T

    def oracle(x, sid):
        g = problem.grad(x)
        if noise.sigma > 0.0:
            g = g + noise.noise(sid, x)
        return g

    h1 = oracle(xs[0], 0)
    hints[0] = h1
    delta = learner.init(h1, D)
    _check_ball(delta, D)
    for n in range(1, cfg.n_iter + 1):
        deltas[n - 1] = delta
        xs[n] = xs[n - 1] + delta
        ws[n - 1] = xs[n - 1] + 0.5 * delta
        zs[n] = xs[n] + 0.5 * delta
        g = oracle(ws[n - 1], n)
        h_next = oracle(zs[n], n)
        gs[n - 1] = g
        hints[n] = h_next
        learner.observe(g)
        delta = learner.propose(h_next)
        etas[n - 1] = learner.last_eta
        _check_ball(delta, D)
        if n % T == 0:
            learner.episode_boundary()


def _check_ball(delta, D):
    n = math.sqrt(dot(np.asarray(delta), np.asarray(delta)))
    if n > D * (1.0 + 1e-12):
        raise ContractViolation(
            f"learner proposed ||Delta|| = {n!r} outside the ball of radius {D!r}")


def _thin(arr, stride):
    return np.ascontiguousarray(arr[::stride])


def _assemble(problem, noise, cfg, learner_desc, arrays, wall, trace_limit):
    xs, ws, zs = arrays["xs"], arrays["ws"], arrays["zs"]
    gs, hints, deltas, etas = (arrays["gs"], arrays["hints"], arrays["deltas"],
                               arrays["etas"])
    N, T, K, D = cfg.n_iter, cfg.T, cfg.K, cfg.D

    episodes = []
    for k in range(1, K + 1):
        sl = slice((k - 1) * T, k * T)
        gsk = gs[sl]
        dsk = deltas[sl]
        grad_sum = gsk.sum(axis=0)
        u = comparator(grad_sum, D)
        regret = float(np.sum(gsk * (dsk - u[None, :])))
        w_bar = episode_average(ws[sl])
        gn_wbar = float(np.linalg.norm(problem.grad(w_bar)))
        errs = gsk - hints[sl]
        err_sq = float(np.sum(errs * errs))
        lo = max((k - 1) * T, 1)  # global n >= 2, i.e. a previous delta exists
        dd = deltas[lo:k * T] - deltas[lo - 1:k * T - 1]
        dd_sq = float(np.sum(dd * dd))
        ek = etas[sl]
        episodes.append(EpisodeRecord(
            k=k, grad_sum=grad_sum, comparator=u, w_bar=w_bar, regret=regret,
            grad_norm_at_wbar=gn_wbar, err_sq_sum=err_sq, dd_sq_sum=dd_sq,
            eta_first=float(ek[0]), eta_last=float(ek[-1]),
            eta_min=float(ek.min()), eta_max=float(ek.max()),
            f_end=problem.f(xs[k * T])))

    output, out_k = select_output(episodes, cfg.mode, noise.rng_seed)
    grad_norm_output = float(np.linalg.norm(problem.grad(output)))
    avg_gn = float(np.mean([e.grad_norm_at_wbar for e in episodes]))
    total_regret = float(sum(e.regret for e in episodes))
    f_final = problem.f(xs[N])
    for val in (grad_norm_output, avg_gn, total_regret, f_final):
        if not math.isfinite(val):
            raise ContractViolation("run produced a non-finite summary value")

    stride = 1 if N <= trace_limit else math.ceil(N / trace_limit)
    iters = np.arange(1, N + 1, dtype=np.int64)[::stride]
    trace = {
        "iters": iters,
        "x_prev": _thin(xs[0:N], stride),
        "x": _thin(xs[1:N + 1], stride),
        "w": _thin(ws, stride),
        "z": _thin(zs[1:N + 1], stride),
        "z_prev": _thin(zs[0:N], stride),
        "delta": _thin(deltas, stride),
        "g": _thin(gs, stride),
        "h": _thin(hints[0:N], stride),
        "eta": _thin(etas, stride),
    }
    return RunResult(
        problem={"name": problem.name, "params": problem.params},
        noise={"sigma": noise.sigma, "mode": noise.mode, "rng_seed": noise.rng_seed},
        config={"M": cfg.M, "T": T, "K": K, "D": D, "mode": cfg.mode},
        learner=learner_desc, seed=noise.rng_seed, n_iter=N, trace_stride=stride,
        trace=trace, episodes=episodes, output=output, output_episode=out_k,
        avg_grad_norm_wbar=avg_gn, grad_norm_output=grad_norm_output,
        total_regret=total_regret, f_final=f_final, wall_time_s=wall)


def run(problem, noise, cfg, learner, force_path=None, trace_limit=FULL_TRACE_LIMIT):
    """Execute one seeded run and return its RunResult.

    force_path: None (auto), "kernel" or "numpy".  The kernel path needs
    a bundled problem, a kernel-representable learner and shared-seed (or
    zero) noise; auto falls back to the numpy path otherwise.
    """
    spec = learner.kernel_spec() if hasattr(learner, "kernel_spec") else None
    kernel_ok = (
        spec is not None
        and problem.kernel_pack is not None
        and (noise.sigma == 0.0 or noise.mode == "shared-seed")
    )
    if force_path == "kernel" and not kernel_ok:
        raise ValueError("kernel path unavailable for this problem/learner/noise")
    use_kernel = kernel_ok if force_path is None else (force_path == "kernel")
    if force_path is None:
        use_kernel = use_kernel and kernels.NUMBA_ENABLED

    N, d = cfg.n_iter, problem.dim
    arrays = {
        "xs": np.zeros((N + 1, d)), "ws": np.zeros((N, d)),
        "zs": np.zeros((N + 1, d)), "gs": np.zeros((N, d)),
        "hints": np.zeros((N + 1, d)), "deltas": np.zeros((N, d)),
        "etas": np.zeros(N),
    }
    arrays["xs"][0] = problem.x0
    arrays["zs"][0] = problem.x0  # z_0 = x_0 under the Delta_0 = 0 convention

    start = time.perf_counter()
    if use_kernel:
        _run_kernel_path(problem, noise, cfg, spec, arrays)
    else:
        _run_generic_path(problem, noise, cfg, learner, arrays)
    wall = time.perf_counter() - start

    desc = learner.describe() if hasattr(learner, "describe") else {"kind": type(learner).__name__}
    return _assemble(problem, noise, cfg, desc, arrays, wall, trace_limit)
