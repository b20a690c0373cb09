"""Inertial forward-backward solver with variable diagonal metrics,
two-mode backtracking and certified inexact proximal steps.

One outer iteration picks the metric, proposes a trial step-size
(``tau_k / delta``, so ``delta < 1`` lets the step grow), recomputes the
momentum scalars for the trial, takes an extrapolated projected point, asks
the prox engine for an eps-accurate proximal-gradient point, and accepts as
soon as the scaled Bregman descent test holds, shrinking the step by ``rho``
otherwise.  The committed scalars feed a per-iteration convergence
certificate (see :func:`rate_certificate`).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .exceptions import (BacktrackingError, ConfigError,
                         NonFiniteObjectiveError)
from .metrics import (BoxSet, DiagonalMetric, IdentityMetricStrategy,
                      MetricStrategy, d_norm_sq)
from .prox import StructuredNonsmooth, inexact_prox

EPS_MODES = ("exact", "theta-adaptive", "geometric-squared",
             "quadratic-schedule", "geometric")


# ---------------------------------------------------------------------------
# problem container
# ---------------------------------------------------------------------------

class SmoothPart:
    """Smooth convex term: value and gradient."""

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class CompositeProblem:
    """Composite objective ``F = f + g`` over an optional box feasible set."""

    smooth: SmoothPart
    nonsmooth: StructuredNonsmooth
    feasible: Optional[BoxSet] = None

    def value(self, x: np.ndarray) -> float:
        return self.smooth.value(x) + self.nonsmooth.value(x)

    def digest_material(self):
        """Optional content bytes for result caching; None disables caching."""
        parts = getattr(self.smooth, "digest_material", None)
        return parts() if parts is not None else None


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonSchedule:
    """Accuracy sequence for the inexact proximal evaluations.

    Modes:
      exact               -- always 0 (machine-precision surrogate downstream)
      theta-adaptive      -- theta_{k+1} * c/(k+1)^p, re-evaluated per trial
      geometric-squared   -- c * (a * b^k)^(k+1)
      quadratic-schedule  -- c*a^(k+1) if delta < 1 else (c/(k+1)^p)/(k+1+t0)^2
      geometric           -- c * a^(k+1)
    """

    mode: str = "exact"
    a: float = 0.5
    b: float = 0.5
    c: float = 1.0
    p: float = 2.1

    def __post_init__(self):
        if self.mode not in EPS_MODES:
            raise ConfigError(f"unknown eps mode {self.mode!r}")
        if self.c < 0:
            raise ConfigError("eps scale c must be nonnegative")

    @property
    def per_trial(self) -> bool:
        """Whether the value depends on the trial step-size via theta."""
        return self.mode == "theta-adaptive"

    def validate(self, *, delta: float, t0: float, tau0: float,
                 mu_f: float, mu_g: float, eta_inf: float) -> None:
        mode = self.mode
        if mode in ("exact",):
            return
        if mode == "theta-adaptive":
            if self.p <= 2.0:
                raise ConfigError("theta-adaptive needs p > 2 for sqrt-summability")
        elif mode == "geometric-squared":
            cap = 0.5 * delta * min(1.0, eta_inf / (tau0 * mu_g)) if mu_g > 0 else 0.5 * delta
            if not (0 < self.a < cap):
                raise ConfigError(f"geometric-squared needs 0 < a < {cap:.6g}")
            if not (0 < self.b < math.sqrt(delta)):
                raise ConfigError("geometric-squared needs 0 < b < sqrt(delta)")
        elif mode == "quadratic-schedule":
            if delta < 1.0:
                if not (0 < self.a < delta):
                    raise ConfigError("quadratic-schedule with delta < 1 needs 0 < a < delta")
            elif self.p <= 2.0:
                raise ConfigError("quadratic-schedule with delta = 1 needs p > 2")
        elif mode == "geometric":
            mu = mu_f + mu_g
            if mu <= 0:
                raise ConfigError("geometric schedule requires mu_f + mu_g > 0")
            q = tau0 * mu / (eta_inf + tau0 * mu_g)
            if not (0 < self.a < 1.0 - math.sqrt(q)):
                raise ConfigError(
                    f"geometric schedule needs 0 < a < {1.0 - math.sqrt(q):.6g}")

    def value(self, k: int, theta_next: float, *, delta: float, t0: float) -> float:
        mode = self.mode
        if mode == "exact":
            return 0.0
        if mode == "theta-adaptive":
            return theta_next * self.c / (k + 1) ** self.p
        if mode == "geometric-squared":
            return self.c * (self.a * self.b ** k) ** (k + 1)
        if mode == "quadratic-schedule":
            if delta < 1.0:
                return self.c * self.a ** (k + 1)
            return (self.c / (k + 1) ** self.p) / (k + 1 + t0) ** 2
        return self.c * self.a ** (k + 1)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the outer loop; ``tau_0 = 1/L0``."""

    L0: float
    rho: float = 0.8
    delta: float = 1.0
    t0: float = 1.01
    mu_f: float = 0.0
    mu_g: float = 0.0
    max_outer: int = 100
    max_bt: int = 10
    eps: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    # None derives a scale-aware floor at x0 keeping late-iteration gap
    # targets above floating-point resolution; 0.0 disables the floor.
    eps_min: Optional[float] = None
    inner_max: int = 2000
    inner_accelerated: bool = True
    inner_momentum_offset: float = 3.0
    rel_tol: Optional[float] = None
    metric_strategy: Optional[MetricStrategy] = None

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise ConfigError("rho must lie in (0, 1)")
        if not (0.0 < self.delta <= 1.0):
            raise ConfigError("delta must lie in (0, 1]")
        if self.L0 <= 0:
            raise ConfigError("L0 must be positive")
        if self.t0 < 1.0:
            raise ConfigError("t0 must be at least 1")
        if self.mu_f < 0 or self.mu_g < 0:
            raise ConfigError("strong convexity moduli must be nonnegative")
        if self.max_outer < 1 or self.max_bt < 1:
            raise ConfigError("max_outer and max_bt must be positive")

    @property
    def tau0(self) -> float:
        return 1.0 / self.L0

    def strategy(self) -> MetricStrategy:
        return self.metric_strategy if self.metric_strategy is not None \
            else IdentityMetricStrategy()


# ---------------------------------------------------------------------------
# state and trace
# ---------------------------------------------------------------------------

@dataclass
class SolverState:
    x_curr: np.ndarray
    x_prev: np.ndarray
    y_prev: np.ndarray
    tau: float
    tau_prime: float
    t: float
    q: float
    log_theta: float
    omega_log_sum: float
    gamma_product: float
    E1: float
    E2: float
    eta_sup_curr: float
    eta_inf_run: float
    eta_sup_run: float
    eps_floor: float = 0.0
    k: int = 0
    dual_w: Optional[list] = None

    @property
    def theta(self) -> float:
        return math.exp(self.log_theta)


@dataclass
class TraceRecord:
    """Per-iteration diagnostics of one accepted outer step."""

    k: int
    F_value: float
    rel_error: float
    tau: float
    L_est: float
    bt_trials: int
    inner_iters: int
    gap: float
    eps: float
    elapsed_s: float
    # certificate bookkeeping
    theta: float = math.nan
    log_theta: float = math.nan
    t: float = math.nan
    q: float = math.nan
    omega: float = math.nan
    beta: float = math.nan
    eta_sup: float = math.nan
    eta_inf: float = math.nan
    E1: float = math.nan
    E2: float = math.nan
    gamma_product: float = math.nan


@dataclass
class RunMeta:
    """Initial scalars and anchors needed by the convergence certificate."""

    x0: np.ndarray
    F0: float
    tau0: float
    tau_prime0: float
    t0: float
    q0: float
    omega0: float
    theta0: float
    eta_sup0: float
    D0: DiagonalMetric
    mu_f: float
    mu_g: float


@dataclass
class SolveResult:
    x: np.ndarray
    trace: List[TraceRecord]
    meta: RunMeta
    state: SolverState
    config: SolverConfig
    x_best: np.ndarray = None
    F_best: float = math.inf


# ---------------------------------------------------------------------------
# scalar recursions
# ---------------------------------------------------------------------------

def update_q(tau: float, mu_f: float, mu_g: float, eta_sup: float) -> float:
    """Scaled momentum modulus ``q = tau*mu_D / (1 + tau*mu_{g,D})``."""
    if tau <= 0 or eta_sup <= 0:
        raise ValueError("tau and eta_sup must be positive")
    mu_f_s = mu_f / eta_sup
    mu_g_s = mu_g / eta_sup
    return tau * (mu_f_s + mu_g_s) / (1.0 + tau * mu_g_s)


def update_t(q_prev: float, q_next: float, t_prev: float,
             tau_prime_ratio: float, eta_ratio: float) -> float:
    """Positive root of the extrapolation recursion.

    The coupling ratio ``q_prev/q_next`` is supplied in the equivalent form
    ``(tau'_prev/tau'_next) * (eta_next/eta_prev)``, which stays finite when
    both moduli vanish and then realizes the classical
    ``(1 + sqrt(1 + 4 (tau_prev/tau_next) t^2))/2`` rule.
    """
    r = tau_prime_ratio * eta_ratio
    if r < 0:
        raise ValueError("step/metric ratio must be nonnegative")
    c1 = 1.0 - q_prev * t_prev * t_prev
    return 0.5 * (c1 + math.sqrt(c1 * c1 + 4.0 * r * t_prev * t_prev))


def compute_beta(t_prev: float, t_next: float, tau: float,
                 mu_f_scaled: float, mu_g_scaled: float) -> float:
    """Inertial weight for the extrapolated point."""
    denom = 1.0 - tau * mu_f_scaled
    if denom <= 0:
        raise ValueError("tau * mu_f_scaled must stay below 1")
    mu_scaled = mu_f_scaled + mu_g_scaled
    return ((t_prev - 1.0) / t_next) \
        * (1.0 + tau * mu_g_scaled - t_next * tau * mu_scaled) / denom


def inertial_point(x_curr: np.ndarray, x_prev: np.ndarray, beta: float,
                   metric: DiagonalMetric, feasible: Optional[BoxSet]) -> np.ndarray:
    """Extrapolate and project onto the feasible set in the D-norm.

    For a diagonal metric and a separable box the weighted projection is the
    componentwise clamp, independent of the weights.
    """
    if x_curr.shape != x_prev.shape:
        raise ValueError("shape mismatch in inertial_point")
    y = x_curr + beta * (x_curr - x_prev)
    return feasible.project(y) if feasible is not None else y


def backtracking_condition(f: SmoothPart, x_new: np.ndarray, y: np.ndarray,
                           tau: float, metric: DiagonalMetric,
                           f_y: Optional[float] = None,
                           grad_y: Optional[np.ndarray] = None) -> bool:
    """Scaled descent test: Bregman(f)(x_new, y) < ||x_new - y||_D^2 / (2 tau).

    The degenerate trial ``x_new == y`` makes both sides vanish and is
    accepted (the point is a fixed point of the prox-gradient map).
    Non-finite values reject the trial, forcing a smaller step.
    """
    if np.array_equal(x_new, y):
        return True
    if f_y is None:
        f_y = f.value(y)
    if grad_y is None:
        grad_y = f.grad(y)
    diff = x_new - y
    f_new = f.value(x_new)
    bregman = f_new - f_y - float(np.vdot(grad_y, diff))
    if not math.isfinite(bregman):
        return False
    return bregman < d_norm_sq(diff, metric) / (2.0 * tau)


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------

def init_state(problem: CompositeProblem, config: SolverConfig,
               x0: np.ndarray) -> tuple[SolverState, RunMeta]:
    """Validate the configuration at the starting point and build the state."""
    x0 = np.asarray(x0, dtype=float)
    if not math.isfinite(problem.nonsmooth.value(x0)):
        raise ConfigError("x0 lies outside the domain of the nonsmooth term")
    strategy = config.strategy()
    D0 = strategy.metric(0, x0)
    eta0 = D0.eta_sup
    mu_f0 = config.mu_f / eta0
    mu_g0 = config.mu_g / eta0
    tau0 = config.tau0
    if tau0 * mu_f0 >= 1.0:
        raise ConfigError("tau_0 * mu_f / eta_sup^0 must be below 1")
    q0 = update_q(tau0, config.mu_f, config.mu_g, eta0)
    if q0 > 0 and config.t0 > 1.0 / math.sqrt(q0) * (1 + 1e-12):
        raise ConfigError("t0 must satisfy 1 <= t0 <= 1/sqrt(q0)")
    config.eps.validate(delta=config.delta, t0=config.t0, tau0=tau0,
                        mu_f=config.mu_f, mu_g=config.mu_g,
                        eta_inf=strategy.eta_inf_bound())
    omega0 = 1.0 - config.t0 * q0
    tau_prime0 = tau0 / (1.0 + tau0 * mu_g0)
    theta0 = omega0 / (tau_prime0 * config.t0 ** 2)
    F0 = problem.value(x0)
    if not math.isfinite(F0):
        raise NonFiniteObjectiveError("objective not finite at x0")
    if config.eps_min is None:
        eps_floor = 0.0 if config.eps.mode == "exact" \
            else 1e-12 * max(1.0, abs(F0))
    else:
        eps_floor = config.eps_min
    state = SolverState(
        x_curr=x0.copy(), x_prev=x0.copy(), y_prev=x0.copy(),
        tau=tau0, tau_prime=tau_prime0, t=config.t0, q=q0,
        log_theta=math.log(theta0), omega_log_sum=math.log(omega0),
        gamma_product=1.0, E1=0.0, E2=0.0,
        eta_sup_curr=eta0, eta_inf_run=D0.eta_inf, eta_sup_run=eta0,
        eps_floor=eps_floor,
    )
    meta = RunMeta(x0=x0.copy(), F0=F0, tau0=tau0, tau_prime0=tau_prime0,
                   t0=config.t0, q0=q0, omega0=omega0, theta0=theta0,
                   eta_sup0=eta0, D0=D0, mu_f=config.mu_f, mu_g=config.mu_g)
    return state, meta


def step(state: SolverState, problem: CompositeProblem, config: SolverConfig,
         f_star: Optional[float] = None,
         clock_start: Optional[float] = None) -> TraceRecord:
    """One outer iteration; mutates ``state`` and returns its trace record."""
    k = state.k
    strategy = config.strategy()
    metric = strategy.metric(k + 1, state.y_prev)
    eta_curr = metric.eta_sup
    eta_prev = state.eta_sup_curr
    mu_f_s = config.mu_f / eta_curr
    mu_g_s = config.mu_g / eta_curr
    eta_ratio = eta_curr / eta_prev

    tau_trial0 = state.tau / config.delta
    warm = state.dual_w
    last_diag = (math.nan, math.nan, math.nan)
    accepted = None
    for i in range(config.max_bt + 1):
        tau = (config.rho ** i) * tau_trial0
        if tau * mu_f_s >= 1.0 - 1e-12:
            # inadmissible for the momentum algebra; shrink further
            last_diag = (tau, math.nan, math.nan)
            continue
        q_next = update_q(tau, config.mu_f, config.mu_g, eta_curr)
        tau_prime_next = tau / (1.0 + tau * mu_g_s)
        t_next = update_t(state.q, q_next, state.t,
                          state.tau_prime / tau_prime_next, eta_ratio)
        beta = compute_beta(state.t, t_next, tau, mu_f_s, mu_g_s)
        y = inertial_point(state.x_curr, state.x_prev, beta, metric,
                           problem.feasible)
        f_y = problem.smooth.value(y)
        grad_y = problem.smooth.grad(y)
        ybar = y - (tau / metric.weights) * grad_y
        log_theta_next = state.log_theta + math.log(eta_prev / eta_curr) \
            + math.log1p(-1.0 / t_next)
        eps = max(config.eps.value(k, math.exp(log_theta_next),
                                   delta=config.delta, t0=config.t0),
                  state.eps_floor)
        res = inexact_prox(ybar, tau, metric, problem.nonsmooth, eps,
                           warm_dual=warm, max_inner=config.inner_max,
                           accelerated=config.inner_accelerated,
                           momentum_offset=config.inner_momentum_offset)
        warm = res.dual_w
        if backtracking_condition(problem.smooth, res.x_tilde, y, tau, metric,
                                  f_y=f_y, grad_y=grad_y):
            accepted = (i, tau, q_next, tau_prime_next, t_next, beta, y,
                        log_theta_next, eps, res)
            break
        diff = res.x_tilde - y
        last_diag = (tau,
                     problem.smooth.value(res.x_tilde) - f_y
                     - float(np.vdot(grad_y, diff)),
                     d_norm_sq(diff, metric) / (2.0 * tau))
    if accepted is None:
        raise BacktrackingError(
            f"no accepted step within {config.max_bt} backtracking trials at "
            f"iteration {k}", k=k, trials=config.max_bt + 1,
            tau=last_diag[0], bregman=last_diag[1], rhs=last_diag[2])

    (bt, tau, q_next, tau_prime_next, t_next, beta, y,
     log_theta_next, eps, res) = accepted

    omega_next = 1.0 - t_next * q_next
    if omega_next <= 0:
        raise BacktrackingError(
            f"momentum residual became nonpositive at iteration {k}", k=k)
    # the certified gap bounds the realized prox error, never above the request
    eps_committed = max(res.gap, 0.0)
    if eps_committed > 0:
        log_ratio = math.log(eps_committed) - log_theta_next
        state.E1 += math.exp(0.5 * log_ratio)
        state.E2 += math.exp(log_ratio)
    state.omega_log_sum += math.log(omega_next)
    state.gamma_product *= 1.0 + strategy.gamma_assumption(k + 1)
    state.x_prev = state.x_curr
    state.x_curr = res.x_tilde
    state.y_prev = y
    state.tau = tau
    state.tau_prime = tau_prime_next
    state.t = t_next
    state.q = q_next
    state.log_theta = log_theta_next
    state.eta_sup_curr = eta_curr
    state.eta_inf_run = min(state.eta_inf_run, metric.eta_inf)
    state.eta_sup_run = max(state.eta_sup_run, eta_curr)
    state.dual_w = res.dual_w
    state.k = k + 1

    F_new = problem.value(res.x_tilde)
    if not math.isfinite(F_new):
        raise NonFiniteObjectiveError(
            f"objective not finite at iteration {k + 1}")
    rel = math.nan
    if f_star is not None:
        rel = (F_new - f_star) / abs(f_star) if f_star != 0 else F_new
    elapsed = 0.0 if clock_start is None else time.perf_counter() - clock_start
    return TraceRecord(
        k=k + 1, F_value=F_new, rel_error=rel, tau=tau, L_est=1.0 / tau,
        bt_trials=bt, inner_iters=res.inner_iters, gap=max(res.gap, 0.0),
        eps=eps, elapsed_s=elapsed, theta=math.exp(log_theta_next),
        log_theta=log_theta_next, t=t_next, q=q_next, omega=omega_next,
        beta=beta, eta_sup=eta_curr, eta_inf=metric.eta_inf,
        E1=state.E1, E2=state.E2, gamma_product=state.gamma_product)


def solve(problem: CompositeProblem, config: SolverConfig, x0: np.ndarray,
          f_star: Optional[float] = None) -> SolveResult:
    """Run the outer loop for ``max_outer`` iterations (or until the optional
    relative objective-change tolerance fires) and return iterate + trace."""
    state, meta = init_state(problem, config, x0)
    start = time.perf_counter()
    trace: List[TraceRecord] = []
    prev_F = meta.F0
    x_best, f_best = meta.x0.copy(), meta.F0
    for _ in range(config.max_outer):
        record = step(state, problem, config, f_star=f_star, clock_start=start)
        trace.append(record)
        if record.F_value < f_best:
            f_best = record.F_value
            x_best = state.x_curr.copy()
        if config.rel_tol is not None:
            change = abs(record.F_value - prev_F) / max(1.0, abs(record.F_value))
            if change < config.rel_tol:
                break
        prev_F = record.F_value
    return SolveResult(x=state.x_curr, trace=trace, meta=meta, state=state,
                       config=config, x_best=x_best, F_best=f_best)


# ---------------------------------------------------------------------------
# convergence certificate
# ---------------------------------------------------------------------------

@dataclass
class CertificateReport:
    """Per-iteration audit of the function-value bound and the decay factor."""

    k: np.ndarray
    excess: np.ndarray
    bound: np.ndarray
    holds: bool
    first_violation: Optional[int]
    theta: np.ndarray
    theta_bound_global: Optional[np.ndarray]
    theta_bound_data: np.ndarray
    theta_within_global: Optional[bool]
    theta_within_data: bool
    contraction_global: Optional[float]


def rate_certificate(result: SolveResult, x_star: np.ndarray, f_star: float,
                     l_f: Optional[float] = None) -> CertificateReport:
    """Evaluate the function-value bound along a finished run.

    For every k the excess ``F(x^(k+1)) - F*`` is compared against
    ``gamma * theta_{k+1} * (sqrt(omega_0/2)||x^(0)-x*||_{D_0}
    + sqrt(tau'_0 t_0^2 omega_0 (F(x^(0))-F*)) + 2 sqrt(gamma) E1_k
    + sqrt(E2_k))^2``.  The decay factor ``theta_{k+1}`` is additionally
    audited against its closed-form envelopes, both with the global gradient
    Lipschitz constant (when supplied) and with the data-driven averages of
    the accepted per-iteration estimates ``L_i = 1/tau_i``.
    """
    if not result.trace:
        raise ValueError("empty trace")
    meta = result.meta
    config = result.config
    state = result.state
    trace = result.trace

    u0 = math.sqrt(d_norm_sq(meta.x0 - x_star, meta.D0))
    v0 = max(meta.F0 - f_star, 0.0)
    gamma_run = state.gamma_product
    base = math.sqrt(meta.omega0 / 2.0) * u0 \
        + math.sqrt(meta.tau_prime0 * meta.t0 ** 2 * meta.omega0 * v0)

    ks = np.array([r.k for r in trace])
    theta = np.array([r.theta for r in trace])
    e1 = np.array([r.E1 for r in trace])
    e2 = np.array([r.E2 for r in trace])
    excess = np.array([r.F_value - f_star for r in trace])
    bound = gamma_run * theta * (base + 2.0 * math.sqrt(gamma_run) * e1
                                 + np.sqrt(e2)) ** 2
    slack = 1e-12 * max(1.0, abs(f_star))
    ok = excess <= bound + slack
    holds = bool(np.all(ok))
    first_violation = None if holds else int(ks[np.argmin(ok)])

    eta_inf = state.eta_inf_run
    eta_sup = state.eta_sup_run
    mu = meta.mu_f + meta.mu_g

    # data-driven envelopes from the accepted step-sizes
    l_hist = np.array([1.0 / meta.tau0] + [r.L_est for r in trace])
    eta_hist = np.array([meta.eta_sup0] + [r.eta_sup for r in trace])
    mu_f_hist = meta.mu_f / eta_hist
    mu_g_hist = meta.mu_g / eta_hist
    mu_hist = mu_f_hist + mu_g_hist
    inv_sqrt = 1.0 / np.sqrt(np.maximum(l_hist - mu_f_hist, 1e-300))
    sqrt_q = np.sqrt(mu_hist / (l_hist + mu_g_hist))
    n = len(trace)
    theta_bound_data = np.empty(n)
    ratio = eta_sup / eta_inf
    for idx in range(n):
        kk = idx  # trace[idx] carries theta_{kk+1}
        lbar_sqrt = (kk + 2) / float(np.sum(inv_sqrt[:kk + 2]))
        quad = (4.0 / (kk + 2) ** 2) * ratio * lbar_sqrt ** 2
        if mu > 0:
            qbar_sqrt = float(np.mean(sqrt_q[1:kk + 2]))
            lin = ratio * (l_hist[0] - mu_f_hist[0]) * (1.0 - qbar_sqrt) ** (kk + 1)
            theta_bound_data[idx] = min(quad, lin)
        else:
            theta_bound_data[idx] = quad
    theta_within_data = bool(np.all(theta <= theta_bound_data * (1 + 1e-9)))

    theta_bound_global = None
    theta_within_global = None
    contraction = None
    if l_f is not None:
        kk = np.arange(1, n + 1, dtype=float)
        # quadratic branch: theta <= 4/(k+2)^2 * ratio * Lbar with the
        # uniform bound Lbar <= L_f/rho - mu_f/eta_sup
        quad_g = ratio * (4.0 / (kk + 1) ** 2) \
            * (l_f * eta_sup - config.rho * meta.mu_f) / (config.rho * eta_sup)
        if mu > 0:
            contraction = 1.0 - math.sqrt(
                mu * config.rho / (l_f * eta_sup + meta.mu_g * config.rho))
            lin_g = ratio * contraction ** kk \
                * (1.0 / meta.tau0 - meta.mu_f / meta.eta_sup0)
            theta_bound_global = np.minimum(quad_g, lin_g)
        else:
            theta_bound_global = quad_g
        theta_within_global = bool(np.all(theta <= theta_bound_global * (1 + 1e-9)))

    return CertificateReport(
        k=ks, excess=excess, bound=bound, holds=holds,
        first_violation=first_violation, theta=theta,
        theta_bound_global=theta_bound_global,
        theta_bound_data=theta_bound_data,
        theta_within_global=theta_within_global,
        theta_within_data=theta_within_data,
        contraction_global=contraction)
