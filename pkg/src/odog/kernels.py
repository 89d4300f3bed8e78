"""Hot inner loops, numba-compiled with a pure-Python/numpy fallback.

The per-iteration recursion (direction update -> midpoint -> oracle ->
next direction) cannot be vectorised across iterations, so the loops are
written in scalar-loop style and jitted.  Setting the environment
variable ``ODOG_NO_NUMBA=1`` (or running without numba installed) keeps
these functions as plain Python and makes the engine default to its
numpy object path; results are bit-identical either way because both
paths share these evaluation kernels and the same operation order.

Problem codes: 0 = diagonal quadratic, 1 = cosine-quadratic,
2 = regularised logistic loss.  Learner codes: 0 = doubly optimistic
update, 1 = projected online gradient descent.
"""

import math
import os

import numpy as np

NUMBA_ENV_FLAG = "ODOG_NO_NUMBA"


def _numba_enabled():
    if os.environ.get(NUMBA_ENV_FLAG, "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_enabled()

if NUMBA_ENABLED:
    from numba import njit

    def maybe_njit(func):
        return njit(cache=True, fastmath=False)(func)
else:

    def maybe_njit(func):
        return func


@maybe_njit
def dot(a, b):
    """Sequential dot product; fixed summation order on every path."""
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@maybe_njit
def value(pcode, pa, pb, pc, A, yv, mu, x):
    d = x.shape[0]
    if pcode == 0:
        s = 0.0
        for i in range(d):
            s += 0.5 * pa[i] * x[i] * x[i]
        return s
    elif pcode == 1:
        s = 0.0
        for i in range(d):
            s += 0.5 * pa[i] * x[i] * x[i] + pb * math.cos(pc * x[i])
        return s
    else:
        n = A.shape[0]
        s = 0.0
        for r in range(n):
            t = 0.0
            for j in range(d):
                t += A[r, j] * x[j]
            m = yv[r] * t
            # stable log(1 + exp(-m)) for either sign of m
            if m > 0.0:
                s += math.log1p(math.exp(-m))
            else:
                s += -m + math.log1p(math.exp(m))
        s /= n
        reg = 0.0
        for j in range(d):
            reg += x[j] * x[j]
        return s + 0.5 * mu * reg


@maybe_njit
def grad_into(pcode, pa, pb, pc, A, yv, mu, x, out):
    d = x.shape[0]
    if pcode == 0:
        for i in range(d):
            out[i] = pa[i] * x[i]
    elif pcode == 1:
        for i in range(d):
            out[i] = pa[i] * x[i] - pb * pc * math.sin(pc * x[i])
    else:
        n = A.shape[0]
        for j in range(d):
            out[j] = 0.0
        for r in range(n):
            t = 0.0
            for j in range(d):
                t += A[r, j] * x[j]
            m = yv[r] * t
            if m > 0.0:
                e = math.exp(-m)
                s = e / (1.0 + e)
            else:
                s = 1.0 / (1.0 + math.exp(m))
            coef = -yv[r] * s
            for j in range(d):
                out[j] += coef * A[r, j]
        for j in range(d):
            out[j] = out[j] / n + mu * x[j]


@maybe_njit
def run_ball_loop(
    D,
    n_iter,
    T,
    learner_code,
    eta_const,
    use_adaptive,
    gamma,
    alpha,
    pcode,
    pa,
    pb,
    pc,
    A,
    yv,
    mu,
    eps,
    use_noise,
    xs,
    ws,
    zs,
    gs,
    hints,
    deltas,
    etas,
):
    """Direction-ball loop shared by the optimistic learner and OGD.

    xs[0] and zs[0] must hold the start point on entry.  Writes the full
    trace into the out arrays and returns 0, or 1 if a proposed
    direction ever leaves the radius-D ball beyond float slack.
    """
    status = 0
    d = xs.shape[1]
    h1 = np.empty(d)
    grad_into(pcode, pa, pb, pc, A, yv, mu, xs[0], h1)
    if use_noise:
        for i in range(d):
            h1[i] = h1[i] + eps[0, i]
    for i in range(d):
        hints[0, i] = h1[i]
    delta = np.zeros(d)
    nh = math.sqrt(dot(h1, h1))
    if nh > 0.0:
        s = -(D / nh)
        for i in range(d):
            delta[i] = s * h1[i]

    gw = np.empty(d)
    hz = np.empty(d)
    err = np.empty(d)
    v = np.empty(d)
    acc = 0.0
    for n in range(1, n_iter + 1):
        for i in range(d):
            deltas[n - 1, i] = delta[i]
            xs[n, i] = xs[n - 1, i] + delta[i]
            ws[n - 1, i] = xs[n - 1, i] + 0.5 * delta[i]
            zs[n, i] = xs[n, i] + 0.5 * delta[i]
        grad_into(pcode, pa, pb, pc, A, yv, mu, ws[n - 1], gw)
        grad_into(pcode, pa, pb, pc, A, yv, mu, zs[n], hz)
        if use_noise:
            # the two per-iteration oracle calls share the sample xi_n
            for i in range(d):
                gw[i] = gw[i] + eps[n, i]
                hz[i] = hz[i] + eps[n, i]
        for i in range(d):
            gs[n - 1, i] = gw[i]
            hints[n, i] = hz[i]
            err[i] = gw[i] - hints[n - 1, i]
        if use_adaptive:
            acc += dot(err, err)
            eta = gamma * D / math.sqrt(alpha + acc)
        else:
            eta = eta_const
        etas[n - 1] = eta
        if learner_code == 1:
            for i in range(d):
                v[i] = delta[i] - eta * gw[i]
        else:
            for i in range(d):
                v[i] = delta[i] - eta * hz[i] - eta * err[i]
        nv = math.sqrt(dot(v, v))
        if nv > D:
            s = D / nv
            for i in range(d):
                v[i] = s * v[i]
        for i in range(d):
            delta[i] = v[i]
        nd = math.sqrt(dot(delta, delta))
        if nd > D * (1.0 + 1e-12):
            status = 1
        if n % T == 0:
            acc = 0.0
    return status


@maybe_njit
def run_descent_loop(n_iter, eta, pcode, pa, pb, pc, A, yv, mu, eps, use_noise, xs):
    """Plain (stochastic) gradient descent; xs[0] holds the start point."""
    d = xs.shape[1]
    g = np.empty(d)
    for n in range(1, n_iter + 1):
        grad_into(pcode, pa, pb, pc, A, yv, mu, xs[n - 1], g)
        if use_noise:
            for i in range(d):
                g[i] = g[i] + eps[n, i]
        for i in range(d):
            xs[n, i] = xs[n - 1, i] - eta * g[i]
    return 0
