"""Runtime verification of proven regret/convergence inequalities.

Every check turns an executed trace into a BoundReport comparing the
quantity the analysis bounds (lhs) against the proven bound (rhs).  On a
faithful run all reports must come back satisfied; a violation means an
implementation bug, which is the point of this module.  Deterministic
assertions use relative slack 1e-9 plus absolute 1e-12 for accumulated
rounding; expectation bounds are checked on seed means within three
standard errors.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .kernels import dot

REL_SLACK = 1e-9
ABS_SLACK = 1e-12


@dataclass
class BoundReport:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    slack: float
    context: dict = field(default_factory=dict)


def make_report(name, lhs, rhs, context=None, rel=REL_SLACK, abs_=ABS_SLACK):
    lhs, rhs = float(lhs), float(rhs)
    satisfied = lhs <= rhs + abs(rhs) * rel + abs_
    return BoundReport(name=name, lhs=lhs, rhs=rhs, satisfied=satisfied,
                       slack=rhs - lhs, context=dict(context or {}))


@dataclass
class LocalLipschitzEstimate:
    value: float
    argmax_iteration: int
    n_usable: int


def _full_trace(run):
    if run.trace_stride != 1:
        raise ValueError("this check needs an unthinned trace (stride 1)")
    return run.trace


def _episode_regret(gs_k, deltas_k, u):
    return float(np.sum(gs_k * (deltas_k - u[None, :])))


# ---------------------------------------------------------------------------
# constant-step regret bounds


def check_lemma1(gs, hs, deltas, u_list, eta, D):
    """Whole-run shifting-regret bound for the constant-step update:

    Reg <= 4 K D^2/eta + (5 eta/2) sum ||g-h||^2 - (1/4 eta) sum_{n>=2} ||dDelta||^2
    """
    gs = np.asarray(gs, dtype=np.float64)
    hs = np.asarray(hs, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    K = len(u_list)
    if K == 0 or gs.shape[0] % K != 0:
        raise ValueError("trace length must be a multiple of the episode count")
    T = gs.shape[0] // K
    regret = sum(
        _episode_regret(gs[k * T:(k + 1) * T], deltas[k * T:(k + 1) * T],
                        np.asarray(u_list[k], dtype=np.float64))
        for k in range(K))
    err_sq = float(np.sum((gs - hs) ** 2))
    dd = deltas[1:] - deltas[:-1]
    dd_sq = float(np.sum(dd * dd))
    rhs = 4.0 * K * D * D / eta + 2.5 * eta * err_sq - dd_sq / (4.0 * eta)
    return make_report("lemma1_shifting_regret", regret, rhs,
                       {"K": K, "T": T, "eta": eta, "D": D,
                        "err_sq_sum": err_sq, "dd_sq_sum": dd_sq})


def check_lemma1_run(run):
    t = _full_trace(run)
    if run.learner.get("kind") != "odog-const":
        raise ValueError("lemma 1 applies to constant-step optimistic runs")
    return check_lemma1(t["g"], t["h"], t["delta"],
                        [e.comparator for e in run.episodes],
                        run.learner["eta"], run.config["D"])


def _lemma2_rhs(eta, D, L1, sigma, T):
    # noise term carries the conservative constant 18, not the tighter 6
    rhs = 4.0 * D * D / eta + 4.5 * L1 * L1 * eta * D * D
    if sigma > 0:
        rhs += 18.0 * eta * T * sigma * sigma
    return rhs


def _require_lemma2_step(eta, L1):
    if eta > (1.0 + 1e-9) / (math.sqrt(3.0) * L1):
        raise ValueError("lemma 2 requires eta <= 1/(sqrt(3) L1)")


def check_lemma2_episode(gs_k, deltas_k, u_k, eta, D, L1, sigma, T):
    """Single-episode regret bound 4D^2/eta + (9/2) L1^2 eta D^2 (+ 18 eta T sigma^2).

    Per-realization form; only meaningful as an assertion when sigma = 0.
    """
    _require_lemma2_step(eta, L1)
    regret = _episode_regret(np.asarray(gs_k, dtype=np.float64),
                             np.asarray(deltas_k, dtype=np.float64),
                             np.asarray(u_k, dtype=np.float64))
    rhs = _lemma2_rhs(eta, D, L1, sigma, T)
    return make_report("lemma2_episode_regret", regret, rhs,
                       {"eta": eta, "D": D, "L1": L1, "sigma": sigma, "T": T,
                        "noise_constant": 18.0, "tight_noise_constant": 6.0})


def check_lemma2_run(run, L1):
    """Per-episode Lemma 2 reports for a sigma = 0 constant-step run."""
    if run.noise["sigma"] != 0.0:
        raise ValueError("per-run lemma 2 checks need sigma = 0")
    if run.learner.get("kind") != "odog-const":
        raise ValueError("lemma 2 applies to constant-step optimistic runs")
    eta, D, T = run.learner["eta"], run.config["D"], run.config["T"]
    _require_lemma2_step(eta, L1)
    rhs = _lemma2_rhs(eta, D, L1, 0.0, T)
    return [make_report("lemma2_episode_regret", e.regret, rhs,
                        {"k": e.k, "eta": eta, "D": D, "L1": L1, "T": T})
            for e in run.episodes]


def _seed_mean_reports(name, runs, rhs, extra):
    """One report per episode index: seed-mean regret vs rhs + 3 SE."""
    K = len(runs[0].episodes)
    S = len(runs)
    if S < 2:
        raise ValueError("seed-mean checks need at least two runs")
    reports = []
    for k in range(K):
        vals = np.array([r.episodes[k].regret for r in runs])
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(S))
        ctx = {"k": k + 1, "n_seeds": S, "se": se, "bound": rhs}
        ctx.update(extra)
        reports.append(make_report(name, mean, rhs + 3.0 * se, ctx))
    return reports


def check_lemma2_seed_mean(runs, L1):
    """Expectation form of Lemma 2 over seeds (3 standard-error margin)."""
    r0 = runs[0]
    eta, D, T = r0.learner["eta"], r0.config["D"], r0.config["T"]
    sigma = r0.noise["sigma"]
    _require_lemma2_step(eta, L1)
    rhs = _lemma2_rhs(eta, D, L1, sigma, T)
    return _seed_mean_reports("lemma2_episode_regret_mean", runs, rhs,
                              {"eta": eta, "D": D, "L1": L1, "sigma": sigma, "T": T})


# ---------------------------------------------------------------------------
# adaptive-step regret bound


def lemma3_rhs(gamma, D, T, sigma, L1_hat):
    """Loose-form adaptive episode bound 8 C D sqrt(T) sigma + 16 C^{3/2} L1_hat sqrt(gamma) D^2.

    C = 3/gamma + gamma, the looser of the two constants the analysis
    produces; the tighter alternative 3/(2 gamma) + gamma is recorded in
    the report context.
    """
    c_loose = 3.0 / gamma + gamma
    return (8.0 * c_loose * D * math.sqrt(T) * sigma
            + 16.0 * c_loose ** 1.5 * L1_hat * math.sqrt(gamma) * D * D)


def check_lemma3_episode(gs_k, deltas_k, u_k, gamma, D, T, sigma, L1_hat):
    regret = _episode_regret(np.asarray(gs_k, dtype=np.float64),
                             np.asarray(deltas_k, dtype=np.float64),
                             np.asarray(u_k, dtype=np.float64))
    rhs = lemma3_rhs(gamma, D, T, sigma, L1_hat)
    return make_report("lemma3_episode_regret", regret, rhs,
                       {"gamma": gamma, "D": D, "T": T, "sigma": sigma,
                        "L1_hat": L1_hat, "loose_constant": 3.0 / gamma + gamma,
                        "tight_constant": 3.0 / (2.0 * gamma) + gamma})


def check_lemma3_run(run, L1_hat=None):
    """Per-episode Lemma 3 reports for a sigma = 0 adaptive run."""
    if run.noise["sigma"] != 0.0:
        raise ValueError("per-run lemma 3 checks need sigma = 0")
    if run.learner.get("kind") != "odog-adaptive":
        raise ValueError("lemma 3 applies to adaptive-step optimistic runs")
    if L1_hat is None:
        L1_hat = estimate_local_L1(run).value
    gamma, D, T = run.learner["gamma"], run.config["D"], run.config["T"]
    rhs = lemma3_rhs(gamma, D, T, 0.0, L1_hat)
    return [make_report("lemma3_episode_regret", e.regret, rhs,
                        {"k": e.k, "gamma": gamma, "D": D, "T": T,
                         "L1_hat": L1_hat})
            for e in run.episodes]


def check_lemma3_seed_mean(runs, L1_hat):
    r0 = runs[0]
    gamma, D, T = r0.learner["gamma"], r0.config["D"], r0.config["T"]
    sigma = r0.noise["sigma"]
    rhs = lemma3_rhs(gamma, D, T, sigma, L1_hat)
    return _seed_mean_reports("lemma3_episode_regret_mean", runs, rhs,
                              {"gamma": gamma, "D": D, "T": T, "sigma": sigma,
                               "L1_hat": L1_hat})


# ---------------------------------------------------------------------------
# conversion inequalities


def check_prop1(run, problem):
    """(1/K) sum ||grad F(w_bar^k)|| against the conversion bound (sigma = 0)."""
    if run.noise["sigma"] != 0.0:
        raise ValueError("the per-run conversion bound needs sigma = 0")
    D, T, K = run.config["D"], run.config["T"], run.config["K"]
    L2 = problem.L2
    lhs = float(np.mean([e.grad_norm_at_wbar for e in run.episodes]))
    f0 = problem.f(run.trace["x_prev"][0])  # row 0 is x_0 even on thinned traces
    rhs = ((f0 - problem.f_star) / (D * K * T)
           + run.total_regret / (D * K * T)
           + L2 / 48.0 * D * D
           + L2 / 2.0 * T * T * D * D)
    return make_report("prop1_conversion", lhs, rhs,
                       {"K": K, "T": T, "D": D, "L2": L2,
                        "regret": run.total_regret, "f_gap": f0 - problem.f_star})


def check_lemma_a1(run, problem):
    """Per-iteration descent bound F(x_n) - F(x_{n-1}) <= <grad F(w_n), Delta_n> + L2 D^3/48.

    Reports the iteration with the least slack.  sigma must be 0 so the
    recorded g_n are the exact midpoint gradients.
    """
    if run.noise["sigma"] != 0.0:
        raise ValueError("the descent bound check needs sigma = 0")
    t = _full_trace(run)
    D, L2 = run.config["D"], problem.L2
    pad = L2 * D ** 3 / 48.0
    worst = None
    f_prev = problem.f(t["x_prev"][0])
    for i in range(run.n_iter):
        f_cur = problem.f(t["x"][i])
        lhs = f_cur - f_prev
        rhs = float(dot(t["g"][i], t["delta"][i])) + pad
        if worst is None or (rhs - lhs) < (worst[1] - worst[0]):
            worst = (lhs, rhs, i + 1)
        f_prev = f_cur
    return make_report("lemma_a1_descent", worst[0], worst[1],
                       {"iteration": worst[2], "L2": L2, "D": D})


def check_avg_grad(ws, problem, T, D, L2):
    """||grad F(w_bar)|| <= ||mean of grad F(w_n)|| + (L2/2) T^2 D^2."""
    ws = np.asarray(ws, dtype=np.float64)
    if ws.shape[0] != T:
        raise ValueError("episode length mismatch")
    grads = np.stack([problem.grad(w) for w in ws])
    w_bar = ws.mean(axis=0)
    lhs = float(np.linalg.norm(problem.grad(w_bar)))
    rhs = float(np.linalg.norm(grads.mean(axis=0))) + L2 / 2.0 * T * T * D * D
    return make_report("lemma_a2_avg_grad", lhs, rhs, {"T": T, "D": D, "L2": L2})


def check_avg_grad_run(run, problem):
    """Lemma A.2 per episode; returns the report with the least slack."""
    t = _full_trace(run)
    T, D = run.config["T"], run.config["D"]
    worst = None
    for e in run.episodes:
        sl = slice((e.k - 1) * T, e.k * T)
        rep = check_avg_grad(t["w"][sl], problem, T, D, problem.L2)
        rep.context["k"] = e.k
        if worst is None or rep.slack < worst.slack:
            worst = rep
    return worst


# ---------------------------------------------------------------------------
# trace geometry and feasibility


def check_feasibility(run):
    """max_n ||Delta_n|| <= D (1 + 1e-12), with no additional slack."""
    t = run.trace
    norms = np.linalg.norm(t["delta"], axis=1)
    lhs = float(norms.max())
    rhs = run.config["D"] * (1.0 + 1e-12)
    return make_report("direction_feasibility", lhs, rhs,
                       {"argmax": int(t["iters"][int(np.argmax(norms))])},
                       rel=0.0, abs_=0.0)


def check_hint_geometry(run, L1=None):
    """Extrapolation geometry of the hint:

    ||w_n - z_{n-1}|| = ||Delta_n - Delta_{n-1}||/2 to 1e-12 absolute, and
    for sigma = 0 additionally ||g_n - h_n|| <= L1 ||w_n - z_{n-1}|| (1 + 1e-9).
    """
    t = _full_trace(run)
    w_minus_zprev = np.linalg.norm(t["w"] - t["z_prev"], axis=1)
    deltas = t["delta"]
    dd = np.empty(run.n_iter)
    dd[0] = np.nan  # Delta_0 = 0 exists only as a convention; start at n = 2
    dd[1:] = np.linalg.norm(deltas[1:] - deltas[:-1], axis=1)
    ident_dev = np.abs(w_minus_zprev[1:] - 0.5 * dd[1:])
    reports = [make_report("hint_geometry_identity", float(ident_dev.max()), 1e-12,
                           {"argmax": int(np.argmax(ident_dev)) + 2},
                           rel=0.0, abs_=0.0)]
    if run.noise["sigma"] == 0.0 and L1 is not None:
        err = np.linalg.norm(t["g"] - t["h"], axis=1)
        ratio_max, arg = 0.0, 0
        for i in range(run.n_iter):
            if w_minus_zprev[i] > 0.0:
                r = err[i] / (L1 * w_minus_zprev[i])
                if r > ratio_max:
                    ratio_max, arg = r, i + 1
            elif err[i] > 0.0:
                ratio_max, arg = math.inf, i + 1
        reports.append(make_report("hint_error_bound", ratio_max, 1.0 + 1e-9,
                                   {"argmax": arg, "L1": L1}, rel=0.0, abs_=0.0))
    return reports


def check_adaptive_schedule(run):
    """eta_n nonincreasing within each episode and reset at each boundary."""
    if run.learner.get("kind") != "odog-adaptive":
        raise ValueError("schedule checks apply to adaptive runs")
    t = _full_trace(run)
    etas = t["eta"]
    T = run.config["T"]
    gamma, alpha, D = run.learner["gamma"], run.learner["alpha"], run.config["D"]
    worst_increase = 0.0
    worst_reset = 0.0
    for k in range(run.config["K"]):
        ek = etas[k * T:(k + 1) * T]
        if T > 1:
            worst_increase = max(worst_increase, float(np.max(ek[1:] - ek[:-1])))
        err0 = t["g"][k * T] - t["h"][k * T]
        expected_first = gamma * D / math.sqrt(alpha + dot(err0, err0))
        worst_reset = max(worst_reset,
                          abs(ek[0] - expected_first) / expected_first)
    return [
        make_report("adaptive_eta_monotone", worst_increase, 0.0, {"T": T},
                    rel=0.0, abs_=1e-15),
        make_report("adaptive_eta_reset", worst_reset, 1e-9,
                    {"reset_value": gamma * D / math.sqrt(alpha)},
                    rel=0.0, abs_=0.0),
    ]


# ---------------------------------------------------------------------------
# estimators


def estimate_local_L1(run):
    """max_n ||g_n - h_n|| / ||w_n - z_{n-1}||, skipping degenerate steps."""
    t = _full_trace(run)
    num = np.linalg.norm(t["g"] - t["h"], axis=1)
    den = np.linalg.norm(t["w"] - t["z_prev"], axis=1)
    best, arg, usable = 0.0, 0, 0
    for i in range(run.n_iter):
        if den[i] < 1e-14:
            continue
        usable += 1
        r = num[i] / den[i]
        if r > best:
            best, arg = r, i + 1
    return LocalLipschitzEstimate(value=best, argmax_iteration=arg, n_usable=usable)


def loglog_slope(points):
    """Least-squares slope of log(value) against log(M)."""
    pts = [(float(m), float(v)) for m, v in points]
    if len(pts) < 3:
        raise ValueError("need at least three points")
    if any(m <= 0 or v <= 0 for m, v in pts):
        raise ValueError("budgets and values must be positive")
    lm = np.log([m for m, _ in pts])
    lv = np.log([v for _, v in pts])
    return float(np.polyfit(lm, lv, 1)[0])


# ---------------------------------------------------------------------------
# helper-inequality property oracles


def inequality_oracles(num_instances=10_000, seed=1729):
    """Randomized checks of the two helper inequalities used by the analysis:

    (a)  sqrt(sum a) <= sum_i a_i/sqrt(sum_{j<=i} a_j) <= 2 sqrt(sum a)
         for nonnegative a with at least one positive entry
         (zero-numerator terms contribute zero);
    (b)  (a+b)^2 <= 2 min{(a+b)^2, a^2} + 2 b^2 for real a, b.

    Returns three aggregated reports carrying the worst instance each.
    """
    worst = {}
    violations = {}

    def consider(name, lhs, rhs, ctx):
        rep = make_report(name, lhs, rhs, ctx)
        prev = worst.get(name)
        if prev is None or rep.slack < prev.slack:
            worst[name] = rep
        if not rep.satisfied:
            violations[name] = violations.get(name, 0) + 1

    for i in range(num_instances):
        key = rng.stream_key(seed, i)
        draws = rng.standard_normal(key, 14)
        T = 1 + i % 12
        scale = 10.0 ** (i % 7 - 3)
        a = np.abs(draws[:T]) * scale
        if i % 5 == 0 and T > 1:
            a[: T // 2] = 0.0
        if not np.any(a > 0):
            a[0] = scale
        total = float(np.sum(a))
        csum = np.cumsum(a)
        mask = a > 0
        mid = float(np.sum(a[mask] / np.sqrt(csum[mask])))
        consider("lemma_c1_lower", math.sqrt(total), mid, {"instance": i, "T": T})
        consider("lemma_c1_upper", mid, 2.0 * math.sqrt(total), {"instance": i, "T": T})

        av, bv = float(draws[12]) * scale, float(draws[13]) * scale
        if i % 9 == 0:
            bv = -av
        lhs = (av + bv) ** 2
        rhs = 2.0 * min((av + bv) ** 2, av * av) + 2.0 * bv * bv
        consider("lemma_c2_square", lhs, rhs, {"instance": i, "a": av, "b": bv})

    for name in worst:
        worst[name].context["instances"] = num_instances
        worst[name].context["violations"] = violations.get(name, 0)
        worst[name].satisfied = worst[name].context["violations"] == 0
    return [worst["lemma_c1_lower"], worst["lemma_c1_upper"], worst["lemma_c2_square"]]


# ---------------------------------------------------------------------------
# one-call verification bundle


def run_all_checks(run, problem):
    """Every check applicable to this run; used by the CLI --verify flag."""
    reports = [check_feasibility(run)]
    sigma = run.noise["sigma"]
    kind = run.learner.get("kind", "")
    if run.trace_stride == 1:
        reports.extend(check_hint_geometry(run, L1=problem.L1))
        if sigma == 0.0:
            reports.append(check_lemma_a1(run, problem))
            reports.append(check_avg_grad_run(run, problem))
            reports.append(check_prop1(run, problem))
            if kind == "odog-const":
                reports.append(check_lemma1_run(run))
                reports.extend(check_lemma2_run(run, problem.L1))
            elif kind == "odog-adaptive":
                reports.extend(check_lemma3_run(run))
        if kind == "odog-adaptive":
            reports.extend(check_adaptive_schedule(run))
    return reports
