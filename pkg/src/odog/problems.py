"""Smooth test objectives with known constants and stochastic oracles.

Bundled problems keep their gradient/Hessian Lipschitz constants exact so
that runtime bound checks can assert proven inequalities without fudge
factors.  Vectors are 1-D float64 numpy arrays throughout.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, rng

_EMPTY_MAT = np.zeros((0, 0))
_EMPTY_VEC = np.zeros(0)

# tags separating the independent derived streams of one data seed
_TAG_DATA = 101
_TAG_WTRUE = 102
_TAG_MARGIN = 103


def as_vector(x, dim=None):
    """Coerce to a contiguous float64 vector, broadcasting scalars."""
    if np.isscalar(x):
        if dim is None:
            raise ValueError("scalar start point needs an explicit dimension")
        return np.full(dim, float(x))
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.shape[0]}")
    return v


class ProblemInstance:
    """An objective with analytic gradient and known L1/L2/F* constants.

    Bundled instances carry a kernel pack so the jitted engine loop and
    the numpy path evaluate the exact same code; custom instances may
    instead pass plain callables and run on the numpy path only.
    """

    def __init__(self, name, dim, L1, L2, f_star, x0, f_fn=None, grad_fn=None,
                 hess_fn=None, kernel_pack=None, params=None):
        if L1 <= 0:
            raise ValueError("L1 must be positive")
        if L2 < 0:
            raise ValueError("L2 must be nonnegative")
        self.name = name
        self.dim = int(dim)
        self.L1 = float(L1)
        self.L2 = float(L2)
        self.f_star = float(f_star)
        self.x0 = as_vector(x0, self.dim)
        self.params = dict(params or {})
        self.kernel_pack = kernel_pack
        self._f_fn = f_fn
        self._grad_fn = grad_fn
        self._hess_fn = hess_fn
        if kernel_pack is None and (f_fn is None or grad_fn is None):
            raise ValueError("need either a kernel pack or f/grad callables")

    def _check(self, x):
        return as_vector(x, self.dim)

    def f(self, x):
        x = self._check(x)
        if self.kernel_pack is not None:
            return float(kernels.value(*self.kernel_pack, x))
        return float(self._f_fn(x))

    def grad(self, x):
        x = self._check(x)
        if self.kernel_pack is not None:
            out = np.empty(self.dim)
            kernels.grad_into(*self.kernel_pack, x, out)
            return out
        return np.ascontiguousarray(self._grad_fn(x), dtype=np.float64)

    def hess(self, x):
        if self._hess_fn is None:
            return None
        return self._hess_fn(self._check(x))

    def __repr__(self):
        return f"ProblemInstance({self.name!r}, dim={self.dim}, L1={self.L1}, L2={self.L2})"


def eval_f(problem, x):
    """Objective value at x (validates the dimension)."""
    return problem.f(x)


def eval_grad(problem, x):
    """Analytic gradient at x (validates the dimension)."""
    return problem.grad(x)


def finite_diff_grad(problem, x, delta=1e-5):
    """Central-difference gradient, the independent test oracle for grad."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = as_vector(x, problem.dim)
    out = np.empty(problem.dim)
    for i in range(problem.dim):
        xp = x.copy()
        xm = x.copy()
        xp[i] += delta
        xm[i] -= delta
        out[i] = (problem.f(xp) - problem.f(xm)) / (2.0 * delta)
    return out


# ---------------------------------------------------------------------------
# stochastic oracle


@dataclass(frozen=True)
class NoiseModel:
    """Gradient noise with E||eps||^2 = sigma^2, replayable from the seed.

    eps ~ N(0, (sigma^2/d) I).  In shared-seed mode the noise vector is a
    pure function of (rng_seed, sample_id), so the two oracle calls an
    iteration makes with the same sample id see the identical vector; in
    fresh mode the evaluation point is folded into the stream key, which
    keeps calls reproducible while decorrelating distinct points.
    """

    sigma: float = 0.0
    mode: str = "shared-seed"
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.mode not in ("shared-seed", "fresh"):
            raise ValueError(f"unknown noise mode: {self.mode!r}")

    def noise(self, sample_id, x):
        x = np.asarray(x, dtype=np.float64)
        d = x.shape[0]
        if self.sigma == 0.0:
            return np.zeros(d)
        fp = 0 if self.mode == "shared-seed" else rng.point_fingerprint(x)
        key = rng.stream_key(self.rng_seed, sample_id, fp)
        return (self.sigma / math.sqrt(d)) * rng.standard_normal(key, d)

    def noise_block(self, sample_ids, dim):
        """Noise rows for many sample ids at once (shared-seed mode only)."""
        n = len(sample_ids)
        if self.sigma == 0.0:
            return np.zeros((n, dim))
        if self.mode != "shared-seed":
            raise ValueError("noise_block requires shared-seed mode")
        block = rng.standard_normal_block(self.rng_seed, sample_ids, dim)
        return (self.sigma / math.sqrt(dim)) * block


def oracle_grad(problem, noise_model, x, sample_id):
    """Stochastic gradient grad F(x) + eps with the contract of NoiseModel."""
    g = problem.grad(x)
    if noise_model.sigma > 0.0:
        g = g + noise_model.noise(sample_id, x)
    return g


@dataclass(frozen=True)
class OracleSample:
    point: np.ndarray
    sample_id: int
    gradient: np.ndarray


def take_sample(problem, noise_model, x, sample_id):
    x = as_vector(x, problem.dim)
    return OracleSample(point=x, sample_id=int(sample_id),
                        gradient=oracle_grad(problem, noise_model, x, sample_id))


# ---------------------------------------------------------------------------
# bundled problems


def _coordinate_quadratic_cos_min(a, b, c):
    """Global minimum of phi(s) = a s^2/2 + b cos(c s), found numerically.

    Stationary points satisfy a s = b c sin(c s), so they live in
    |s| <= b c / a; a fine grid plus golden-section refinement around the
    best cell pins the value far below 1e-12 relative error.
    """
    if b == 0.0 or c == 0.0:
        return 0.5 * a * 0.0 + b  # minimum at s = 0

    def phi(s):
        return 0.5 * a * s * s + b * math.cos(c * s)

    radius = abs(b * c / a)
    grid = np.linspace(-radius, radius, 1 << 14 | 1)
    vals = 0.5 * a * grid * grid + b * np.cos(c * grid)
    j = int(np.argmin(vals))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid.shape[0] - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    m1 = hi - invphi * (hi - lo)
    m2 = lo + invphi * (hi - lo)
    f1, f2 = phi(m1), phi(m2)
    for _ in range(120):
        if f1 <= f2:
            hi, m2, f2 = m2, m1, f1
            m1 = hi - invphi * (hi - lo)
            f1 = phi(m1)
        else:
            lo, m1, f1 = m1, m2, f2
            m2 = lo + invphi * (hi - lo)
            f2 = phi(m2)
    return min(phi(0.0), float(vals[j]), f1, f2)


def _lower_bound_margin(v):
    # keeps the stored bound strictly below the numerically attained minimum
    return v - 1e-12 * (1.0 + abs(v))


def quadratic(dim=10, a=1.0, x0=2.0):
    """F(x) = 1/2 sum_i a_i x_i^2 with diagonal curvature a_i > 0."""
    a_vec = as_vector(a, dim) if not np.isscalar(a) else np.full(dim, float(a))
    if a_vec.shape[0] != dim:
        raise ValueError("curvature vector length must equal dim")
    if np.any(a_vec <= 0):
        raise ValueError("curvatures must be positive")
    pack = (0, a_vec, 0.0, 0.0, _EMPTY_MAT, _EMPTY_VEC, 0.0)
    return ProblemInstance(
        name="quadratic",
        dim=dim,
        L1=float(np.max(a_vec)),
        L2=0.0,
        f_star=0.0,
        x0=x0,
        hess_fn=lambda x: np.diag(a_vec),
        kernel_pack=pack,
        params={"a": a_vec.tolist(), "x0": as_vector(x0, dim).tolist()},
    )


def cosine_quadratic(dim=10, a=1.0, b=1.0, c=1.0, x0=2.0):
    """F(x) = sum_i (a_i x_i^2 / 2 + b cos(c x_i)); L1 = max a + b c^2, L2 = b c^3."""
    a_vec = as_vector(a, dim) if not np.isscalar(a) else np.full(dim, float(a))
    if a_vec.shape[0] != dim:
        raise ValueError("curvature vector length must equal dim")
    if np.any(a_vec <= 0) or b < 0 or c < 0:
        raise ValueError("need positive curvatures and nonnegative b, c")
    per_coord = {}
    f_star = 0.0
    for ai in a_vec:
        key = float(ai)
        if key not in per_coord:
            per_coord[key] = _coordinate_quadratic_cos_min(key, float(b), float(c))
        f_star += per_coord[key]
    pack = (1, a_vec, float(b), float(c), _EMPTY_MAT, _EMPTY_VEC, 0.0)
    return ProblemInstance(
        name="cosine_quadratic",
        dim=dim,
        L1=float(np.max(a_vec)) + float(b) * float(c) ** 2,
        L2=float(b) * float(c) ** 3,
        f_star=_lower_bound_margin(f_star),
        x0=x0,
        hess_fn=lambda x: np.diag(a_vec - b * c * c * np.cos(c * np.asarray(x))),
        kernel_pack=pack,
        params={"a": a_vec.tolist(), "b": float(b), "c": float(c),
                "x0": as_vector(x0, dim).tolist()},
    )


def logistic(dim=10, n_samples=128, data_seed=0, mu=0.1, x0=0.0):
    """Mean logistic loss on synthesized data plus (mu/2)||x||^2.

    L1 = lambda_max(A^T A)/(4 n) + mu exactly; L2 uses the sharp bound
    max|sigma''| = 1/(6 sqrt(3)) on the per-sample third derivative.  F*
    is located once at construction by gradient descent driven to
    ||grad|| <= 1e-10 (the loss is mu-strongly convex).
    """
    if mu <= 0:
        raise ValueError("mu must be positive for a strongly convex reference problem")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    ids = np.arange(n_samples)
    data_stream = int(rng.stream_key(data_seed, _TAG_DATA))
    A = rng.standard_normal_block(data_stream, ids, dim)
    A = np.ascontiguousarray(A / math.sqrt(dim))
    w_true = rng.standard_normal(rng.stream_key(data_seed, _TAG_WTRUE), dim)
    margin_noise = rng.standard_normal(rng.stream_key(data_seed, _TAG_MARGIN), n_samples)
    raw = A @ w_true + 0.25 * margin_noise
    y = np.where(raw >= 0.0, 1.0, -1.0)

    lam_max = float(np.linalg.eigvalsh(A.T @ A)[-1])
    L1 = lam_max / (4.0 * n_samples) + mu
    L2 = float(np.sum(np.linalg.norm(A, axis=1) ** 3)) / (6.0 * math.sqrt(3.0) * n_samples)

    pack = (2, _EMPTY_VEC, 0.0, 0.0, A, y, float(mu))

    def hess(x):
        m = y * (A @ x)
        s = 1.0 / (1.0 + np.exp(np.clip(m, -60.0, 60.0)))
        w = s * (1.0 - s)
        return (A.T * w) @ A / n_samples + mu * np.eye(dim)

    # locate the minimum once; linear convergence at rate mu/L1
    x = np.zeros(dim)
    g = np.empty(dim)
    for _ in range(200_000):
        kernels.grad_into(*pack, x, g)
        if math.sqrt(kernels.dot(g, g)) <= 1e-10:
            break
        x = x - (1.0 / L1) * g
    f_min = float(kernels.value(*pack, x))

    return ProblemInstance(
        name="logistic",
        dim=dim,
        L1=L1,
        L2=L2,
        f_star=_lower_bound_margin(f_min),
        x0=x0,
        hess_fn=hess,
        kernel_pack=pack,
        params={"n_samples": int(n_samples), "data_seed": int(data_seed),
                "mu": float(mu), "x0": as_vector(x0, dim).tolist()},
    )


REGISTRY = {
    "quadratic": quadratic,
    "cosine_quadratic": cosine_quadratic,
    "logistic": logistic,
}


def make_problem(name, **params):
    """Instantiate a registered problem; unknown names or keys are errors."""
    if name not in REGISTRY:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(REGISTRY)}")
    try:
        return REGISTRY[name](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for problem {name!r}: {exc}") from None
