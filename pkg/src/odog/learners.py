"""The doubly optimistic online learner and its step-size schedules.

Update rule (single projection, ball of radius D):

    Delta_{n+1} = Pi_{||Delta|| <= D}( Delta_n - eta_n h_{n+1} - eta_n (g_n - h_n) )

with Delta_1 = -D h_1 / ||h_1||.  The hint h_{n+1} is the oracle gradient
at the extrapolated point z_n = x_n + Delta_n / 2, so the hint error
g_n - h_n is controlled by ||Delta_n - Delta_{n-1}|| through smoothness.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import dot

DEFAULT_GAMMA = math.sqrt(1.5)  # minimizes 3/(2 gamma) + gamma


def project_ball(v, D):
    """Euclidean projection onto the ball of radius D."""
    if D <= 0:
        raise ValueError("D must be positive")
    n = math.sqrt(dot(v, v))
    if n <= D:
        return v
    return (D / n) * v


def init_delta(h1, D):
    """argmin_{||Delta|| <= D} <h1, Delta>: -D h1/||h1||, or 0 for a zero hint."""
    if D <= 0:
        raise ValueError("D must be positive")
    n = math.sqrt(dot(h1, h1))
    if n > 0.0:
        return (-(D / n)) * h1
    return np.zeros_like(h1)


def hint(x_n, delta_n, oracle, sample_id):
    """Oracle gradient at the extrapolated point z_n = x_n + delta_n / 2.

    `oracle` is any callable (point, sample_id) -> gradient; the sample id
    must be the one drawn for the current iteration, shared with the
    midpoint evaluation.
    """
    z = x_n + 0.5 * delta_n
    return oracle(z, sample_id)


class ConstantStep:
    """Fixed step size."""

    kind = "constant"

    def __init__(self, eta):
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.eta = float(eta)

    def observe(self, err_sq):
        pass

    def current_eta(self, D):
        return self.eta

    def reset(self):
        pass


class AdaptiveStep:
    """eta_n = gamma D / sqrt(alpha + sum of squared hint errors this episode).

    The accumulator holds every ||g_i - h_i||^2 observed so far in the
    current episode (including the current iteration's) and is the only
    state reset at episode boundaries.
    """

    kind = "adaptive"

    def __init__(self, gamma=DEFAULT_GAMMA, alpha=1e-12):
        if gamma <= 0 or alpha <= 0:
            raise ValueError("gamma and alpha must be positive")
        self.gamma = float(gamma)
        self.alpha = float(alpha)
        self.accumulator = 0.0
        self.within_episode_index = 0

    def observe(self, err_sq):
        self.accumulator += err_sq
        self.within_episode_index += 1

    def current_eta(self, D):
        return self.gamma * D / math.sqrt(self.alpha + self.accumulator)

    def reset(self):
        self.accumulator = 0.0
        self.within_episode_index = 0


def adaptive_eta(schedule, D):
    """Current adaptive step size gamma D / sqrt(alpha + accumulator)."""
    if getattr(schedule, "kind", None) != "adaptive":
        raise ValueError("adaptive_eta needs an adaptive schedule")
    return schedule.current_eta(D)


@dataclass
class OdogState:
    delta: np.ndarray
    hint: np.ndarray
    last_error: np.ndarray
    schedule: object


def odog_update(state, g_n, h_next, D):
    """One optimistic update; returns the new state (the schedule advances).

    The schedule observes ||g_n - h_n||^2 before the step size is read, so
    an adaptive eta_n already includes the current iteration's error.
    """
    err = g_n - state.hint
    state.schedule.observe(dot(err, err))
    eta = state.schedule.current_eta(D)
    v = state.delta - eta * h_next - eta * err
    new_delta = project_ball(v, D)
    return OdogState(delta=new_delta, hint=h_next, last_error=err,
                     schedule=state.schedule)


class OdogLearner:
    """Engine-facing learner: init(h1, D) -> observe(g) -> propose(h_next).

    episode_boundary() resets only the adaptive accumulator; the
    direction and hint carry across episodes.
    """

    name = "odog"

    def __init__(self, schedule):
        self.schedule = schedule
        self.state = None
        self.D = None
        self.last_eta = None
        self._g = None

    def init(self, h1, D):
        self.D = float(D)
        delta1 = init_delta(h1, D)
        self.state = OdogState(delta=delta1, hint=np.array(h1, dtype=np.float64),
                               last_error=np.zeros_like(delta1), schedule=self.schedule)
        return delta1

    def observe(self, g):
        self._g = g

    def propose(self, h_next):
        self.state = odog_update(self.state, self._g, h_next, self.D)
        self.last_eta = self.schedule.current_eta(self.D)
        return self.state.delta

    def episode_boundary(self):
        self.schedule.reset()

    def kernel_spec(self):
        """Parameters for the jitted loop, or None if not representable."""
        if isinstance(self.schedule, ConstantStep):
            return {"learner_code": 0, "use_adaptive": False,
                    "eta": self.schedule.eta, "gamma": 0.0, "alpha": 1.0}
        if type(self.schedule) is AdaptiveStep:
            return {"learner_code": 0, "use_adaptive": True, "eta": 0.0,
                    "gamma": self.schedule.gamma, "alpha": self.schedule.alpha}
        return None

    def describe(self):
        if isinstance(self.schedule, ConstantStep):
            return {"kind": "odog-const", "eta": self.schedule.eta}
        return {"kind": "odog-adaptive", "gamma": self.schedule.gamma,
                "alpha": self.schedule.alpha}


# ---------------------------------------------------------------------------
# hyperparameter calculators


@dataclass(frozen=True)
class HyperParams:
    D: float
    T: int
    K: int
    eta: float = None
    gamma: float = None
    alpha: float = None


def _clamp_T(t_raw, M):
    return int(min(max(t_raw, 1), max(1, M // 2)))


def theorem1_hyperparams(L1, L2, sigma, F_gap, M):
    """Constant-step tuning (D, T, K, eta) from the problem constants.

    D = min{ (2 F_gap / (33 L2^{1/5} sigma^{4/5} M))^{5/7},
             (2 F_gap / (15 M L1^{2/3} L2^{1/3}))^{3/7} }     (first branch only if sigma > 0)
    T = min( max( ceil((20 sigma/(L2 D^2))^{2/5}), ceil((10 L1/(L2 D))^{1/3}) ), M//2 )
    K = M // T,   eta = 1 / sqrt(3 L1^2 + 12 T sigma^2 / D^2)

    Pure quadratics (L2 = 0) drop every L2 term: T = M//2 and D balances
    the two surviving terms, D = sqrt(F_gap / (10 L1)).
    """
    if L1 <= 0 or F_gap <= 0 or sigma < 0 or L2 < 0:
        raise ValueError("need L1 > 0, F_gap > 0, sigma >= 0, L2 >= 0")
    if M < 1:
        raise ValueError("M must be at least 1")
    if L2 > 0:
        branches = [(2.0 * F_gap / (15.0 * M * L1 ** (2.0 / 3.0) * L2 ** (1.0 / 3.0))) ** (3.0 / 7.0)]
        if sigma > 0:
            branches.append((2.0 * F_gap / (33.0 * L2 ** 0.2 * sigma ** 0.8 * M)) ** (5.0 / 7.0))
        D = min(branches)
        t_terms = [math.ceil((10.0 * L1 / (L2 * D)) ** (1.0 / 3.0))]
        if sigma > 0:
            t_terms.append(math.ceil((20.0 * sigma / (L2 * D * D)) ** 0.4))
        t_raw = max(t_terms)
    else:
        D = math.sqrt(F_gap / (10.0 * L1))
        t_raw = M // 2
    T = _clamp_T(t_raw, M)
    K = max(1, M // T)
    eta = 1.0 / math.sqrt(3.0 * L1 * L1 + 12.0 * T * sigma * sigma / (D * D))
    return HyperParams(D=D, T=T, K=K, eta=eta)


def default_alpha(L1, D):
    """Numerical-stability floor for the adaptive accumulator."""
    return 1e-12 * (L1 * D) ** 2


def theorem2_hyperparams(L1_hat, L2, sigma, F_gap, M, gamma=DEFAULT_GAMMA, alpha=None):
    """Adaptive-step tuning; L1 is replaced by the local estimate L1_hat.

    D and K follow the constant-step formulas with L1 <- L1_hat; the T
    branch carries the adaptive analysis constants C1 = 3/(2 gamma) + gamma
    and C2 = 12/gamma + 8 gamma + 1:

    T = min( max( ceil((C2 sigma/(L2 D^2))^{2/5}),
                  ceil((16 C1^{3/2} L1_hat gamma^{1/2} / (L2 D))^{1/3}) ), M//2 )
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if L1_hat <= 0 or F_gap <= 0 or sigma < 0 or L2 < 0:
        raise ValueError("need L1_hat > 0, F_gap > 0, sigma >= 0, L2 >= 0")
    if M < 1:
        raise ValueError("M must be at least 1")
    C1 = 3.0 / (2.0 * gamma) + gamma
    C2 = 12.0 / gamma + 8.0 * gamma + 1.0
    if L2 > 0:
        branches = [(2.0 * F_gap / (15.0 * M * L1_hat ** (2.0 / 3.0) * L2 ** (1.0 / 3.0))) ** (3.0 / 7.0)]
        if sigma > 0:
            branches.append((2.0 * F_gap / (33.0 * L2 ** 0.2 * sigma ** 0.8 * M)) ** (5.0 / 7.0))
        D = min(branches)
        t_terms = [math.ceil((16.0 * C1 ** 1.5 * L1_hat * math.sqrt(gamma) / (L2 * D)) ** (1.0 / 3.0))]
        if sigma > 0:
            t_terms.append(math.ceil((C2 * sigma / (L2 * D * D)) ** 0.4))
        t_raw = max(t_terms)
    else:
        D = math.sqrt(F_gap / (10.0 * L1_hat))
        t_raw = M // 2
    T = _clamp_T(t_raw, M)
    K = max(1, M // T)
    if alpha is None:
        alpha = default_alpha(L1_hat, D)
    return HyperParams(D=D, T=T, K=K, gamma=float(gamma), alpha=float(alpha))
