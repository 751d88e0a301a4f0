"""Integral tests deciding whether the exponential integral converges.

All three checkers share one decision core. With A the truncated-mean
function of the integrator xi and T(x) the tail of the relevant jump size
at level e**x, the integral converges iff xi drifts to +inf and

    I = int_{x > eps} x / A(x) dP(log|jump| <= x)  <  inf.

The core tries, in order: an analytic shortcut from log-moment
information, a quadrature of I over doubling horizons, and (when only
samples are available) a Hill-type estimate of the tail index of log|jump|.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats
from scipy.integrate import quad

from .distributions import DistributionSpec
from .processes import (CompoundSumSpec, LevyProcessSpec, a_function,
                        sample_stopped)
from .rng import RngStream, as_stream

__all__ = [
    "Outcome", "Verdict", "check_levy", "check_xi_compound_sum", "check_eta_compound_sum",
    "doubling_horizon_check",
]

EPS_FLOOR = 1e-12
MC_TAIL_N = 100_000
X_MAX = 512.0          # largest log-level; e**512 is still a finite double


class Outcome(enum.Enum):
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    """Three-valued convergence verdict.

    ``mode`` records the kind of convergence the matching criterion asserts
    ("a.s." or "in probability").
    """

    outcome: Outcome
    reason: str
    witness: dict | None = None
    mode: str = "a.s."

    def __post_init__(self):
        if self.outcome is Outcome.INCONCLUSIVE and not self.reason:
            raise ValueError("an Inconclusive verdict needs a reason")

    @property
    def converges(self) -> bool:
        return self.outcome is Outcome.CONVERGES

    def to_dict(self) -> dict:
        return {"outcome": self.outcome.value, "reason": self.reason, "witness": self.witness,
                "mode": self.mode}


# ---------------------------------------------------------------------------
# decision core
# ---------------------------------------------------------------------------

@dataclass
class _Integrand:
    A: Callable[[float], float]               # truncated mean function
    dA: Callable[[float], float]              # its derivative (a tail function)
    A_bounded: bool | None
    tail: Callable[[float], float] | None     # x -> P(|jump| > e**x) or nu-tail
    log_moment: bool | None                   # E log+|jump| finite?
    samples: np.ndarray | None = None         # jump samples (MC fallback)
    notes: list = field(default_factory=list)


def _find_eps(A) -> float | None:
    eps = 2.0 ** -20
    while eps <= 2.0 ** 20:
        if A(eps) > EPS_FLOOR:
            return eps
        eps *= 2
    return None


def _growth_exponent(A, x0: float = 2.0 ** 6, x1: float = X_MAX) -> float:
    a0, a1 = A(x0), A(x1)
    if a0 <= 0 or a1 <= 0:
        return 0.0
    return float(min(max(math.log(a1 / a0) / math.log(x1 / x0), 0.0), 1.0))


def _quadrature_test(I: _Integrand, eps: float, mode: str) -> Verdict:
    """Doubling-horizon quadrature of int h'(x) T(x) dx with h = x/A(x)."""

    def h(x):
        return x / I.A(x)

    def hprime(x):
        a = I.A(x)
        return (a - x * I.dA(x)) / (a * a)

    def piece(lo, hi):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val, _ = quad(lambda x: hprime(x) * I.tail(x), lo, hi, epsabs=1e-13, limit=200)
        return max(val, 0.0)

    x0 = max(eps, 1.0)
    total = h(eps) * I.tail(eps) + (piece(eps, x0) if x0 > eps else 0.0)
    incs, edges = [], [x0]
    while edges[-1] * 2 <= X_MAX:
        lo = edges[-1]
        incs.append(piece(lo, 2 * lo))
        edges.append(2 * lo)
    total += sum(incs)
    tail = np.asarray(incs[-5:])
    witness = {"partial_integral": total, "horizon": edges[-1], "last_increments": tail.tolist()}
    if np.all(tail <= 1e-14 * max(total, 1e-300)):
        return Verdict(Outcome.CONVERGES, "log-integral increments vanish", witness, mode)
    ratios = tail[1:] / np.maximum(tail[:-1], 1e-300)
    witness["increment_ratios"] = ratios.tolist()
    if np.all(ratios <= 0.85):
        return Verdict(Outcome.CONVERGES, "log-integral increments decay geometrically", witness, mode)
    if np.all(ratios >= 0.95):
        return Verdict(Outcome.DIVERGES, "log-integral grows without bound over doubling horizons",
                       witness, mode)
    return Verdict(Outcome.INCONCLUSIVE, "integral did not settle", witness, mode)


def _hill_test(I: _Integrand, mode: str) -> Verdict:
    """Tail index of L = log+|jump| against the boundary 1 - theta."""
    x = np.abs(np.asarray(I.samples, float))
    with np.errstate(divide="ignore"):
        L = np.log(x[x > 1.0]) if np.any(x > 1.0) else np.array([])
    n = x.size
    theta = _growth_exponent(I.A)
    boundary = 1.0 - theta
    k = int(math.sqrt(n))
    if L.size <= k + 1:
        return Verdict(Outcome.CONVERGES, "log-tail of the jump law is empty beyond e (MC, n=%d)" % n,
                       {"n": n}, mode)
    Ls = np.sort(L)[::-1]
    top, ref = Ls[:k], Ls[k]
    if not np.isfinite(top).all():
        kappa = 0.0
    else:
        kappa = float(1.0 / np.mean(np.log(top / ref))) if ref > 0 else math.inf
    se = kappa / math.sqrt(k)
    witness = {"tail_index": kappa, "stderr": se, "boundary": boundary, "n": n, "k": k}
    if abs(kappa - boundary) <= 2 * se:
        return Verdict(Outcome.INCONCLUSIVE, "MC tail index within 2 stderr of the decision boundary",
                       witness, mode)
    if kappa > boundary:
        return Verdict(Outcome.CONVERGES, "MC tail index of log|jump| above the boundary", witness, mode)
    return Verdict(Outcome.DIVERGES, "MC tail index of log|jump| below the boundary", witness, mode)


def _decide(drift: float | None, I: _Integrand, mode: str) -> Verdict:
    if drift is None:
        return Verdict(Outcome.INCONCLUSIVE, "mean increment of the integrator is unknown", None, mode)
    if not drift > 0:
        return Verdict(Outcome.DIVERGES, "integrator does not drift to +infinity", {"mean": drift}, mode)
    eps = _find_eps(I.A)
    if eps is None:
        return Verdict(Outcome.INCONCLUSIVE, "A-function stays below the positivity floor",
                       None, mode)
    wit = {"eps": eps, "mean_increment": drift}
    if I.log_moment is True:
        return Verdict(Outcome.CONVERGES,
                       "positive drift and finite logarithmic moment of the integrand jumps", wit, mode)
    if I.log_moment is False and I.A_bounded:
        return Verdict(Outcome.DIVERGES,
                       "infinite logarithmic moment of the integrand jumps against a bounded A-function",
                       wit, mode)
    if I.tail is not None:
        v = _quadrature_test(I, eps, mode)
        return Verdict(v.outcome, v.reason, {**wit, **(v.witness or {})}, mode)
    if I.samples is not None:
        v = _hill_test(I, mode)
        return Verdict(v.outcome, v.reason, {**wit, **(v.witness or {})}, mode)
    return Verdict(Outcome.INCONCLUSIVE, "no tail information for the integrand jumps", wit, mode)


def _abs_sf(d: DistributionSpec) -> Callable[[float], float]:
    if d.nonnegative:
        return lambda y: float(d.sf(y))
    return lambda y: float(d.sf(y)) + float(d.cdf(-y))


def _log_tail(sf: Callable[[float], float]) -> Callable[[float], float]:
    return lambda x: sf(math.exp(x))


def _levy_A(xi: LevyProcessSpec):
    return (lambda x: a_function(xi, x), lambda x: float(xi.levy_tail(x)))


def _renewal_A(jump: DistributionSpec):
    return (lambda x: a_function(jump, x), lambda x: float(jump.sf(x)))


def _finite(m) -> bool | None:
    return None if m is None else bool(math.isfinite(m))


# ---------------------------------------------------------------------------
# public checkers
# ---------------------------------------------------------------------------

def check_levy(xi: LevyProcessSpec, eta: LevyProcessSpec) -> Verdict:
    """Convergence of int exp(-xi_{t-}) d eta_t for independent Levy xi, eta."""
    A, dA = _levy_A(xi)
    m = xi.mean_increment()
    I = _Integrand(A, dA, A_bounded=_finite(m), log_moment=eta.log_moment_finite(),
                   tail=_log_tail(lambda y: float(eta.levy_abs_tail(y))))
    return _decide(m, I, "a.s.")


def _stopped_abs_tail(eta: LevyProcessSpec, wait: DistributionSpec):
    """(log-moment flag, tail callable or None) for |eta_W|."""
    law = eta.stopped_law(wait)
    if law is not None:
        try:
            law.sf(1.0)
            sf = _abs_sf(law)
            return law.log_moment_finite(), _log_tail(sf)
        except Exception:
            return law.log_moment_finite(), None
    lw, le = wait.log_moment_finite(), eta.log_moment_finite()
    if lw is True and le is True:
        return True, None
    if le is False and lw is True:
        return False, None
    return None, None


def check_xi_compound_sum(xi: CompoundSumSpec, eta: LevyProcessSpec,
                          rng: RngStream | int | None = None) -> Verdict:
    """Renewal integrator xi_t = sum_{i <= M_t} X_i with waiting law W.

    The criterion concerns the law of B = eta_W; convergence is asserted in
    probability.
    """
    jump = xi.jump
    m = jump.mean()
    A, dA = _renewal_A(jump)
    A_bounded = _finite(jump.power_moment(1.0) if jump.nonnegative else jump.abs_mean())
    logm, tail = _stopped_abs_tail(eta, xi.waiting)
    I = _Integrand(A, dA, A_bounded=A_bounded, log_moment=logm, tail=tail)
    if logm is None and tail is None and m is not None and m > 0:
        rng = as_stream(0 if rng is None else rng)
        I.samples = sample_stopped(eta, xi.waiting, rng, MC_TAIL_N)
        I.notes.append("tail of eta over a waiting time estimated by MC")
    return _decide(m, I, "in probability")


def check_eta_compound_sum(xi: LevyProcessSpec, eta: CompoundSumSpec,
                           rng: RngStream | int | None = None) -> Verdict:
    """Renewal integrand eta_t = sum_{i <= N_t} Y_i with waiting law U.

    A is the truncated mean of xi_U, taken from a closed form when one
    exists and from an MC sample otherwise.
    """
    m = xi.mean_increment()
    law = xi.stopped_law(eta.waiting)
    if law is not None:
        A = lambda x: law.truncated_mean(x)
        dA = lambda x: float(law.sf(x))
        mu = law.mean()
        A_bounded = _finite(mu) if law.nonnegative else _finite(law.abs_mean())
    else:
        rng = as_stream(0 if rng is None else rng)
        s = np.sort(sample_stopped(xi, eta.waiting, rng, MC_TAIL_N))
        pos = np.maximum(s, 0.0)
        A = lambda x: float(np.minimum(pos, x).mean())
        dA = lambda x: float(np.mean(s > x))
        A_bounded = _finite(m)
    I = _Integrand(A, dA, A_bounded=A_bounded, log_moment=eta.jump.log_moment_finite(),
                   tail=_log_tail(_abs_sf(eta.jump)))
    return _decide(m, I, "a.s.")


# ---------------------------------------------------------------------------
# soft statistical corroboration
# ---------------------------------------------------------------------------

def doubling_horizon_check(draw_pairs: Callable[[np.random.Generator, tuple], tuple],
                           rng: RngStream | int, n_paths: int = 400, n0: int = 64,
                           doublings: int = 4, rel_tol: float = 1e-3, p0: float = 0.05,
                           level: float = 0.01) -> Verdict:
    """Do perpetuity partial sums settle across doubling horizons?

    ``draw_pairs(gen, shape)`` returns arrays (A, B) of the given shape.
    At the last doubling a path is *unsettled* when its partial sum moved
    by more than ``rel_tol`` (relative) or became non-finite. A binomial
    test of H0: P(unsettled) <= p0 at ``level`` returns Diverges when
    rejected and Converges otherwise.
    """
    rng = as_stream(rng)
    gen = rng.generator
    n_max = n0 * 2 ** doublings
    a, b = draw_pairs(gen, (n_paths, n_max))
    a, b = np.asarray(a, float), np.asarray(b, float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        loga = np.log(a)
        logprod = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(loga, axis=1)[:, :-1]], axis=1)
        terms = np.exp(logprod) * b
        terms = np.where(np.exp(logprod) == 0, 0.0, terms)
        partial = np.cumsum(terms, axis=1)
    horizons = [n0 * 2 ** k for k in range(doublings + 1)]
    s_prev, s_last = partial[:, horizons[-2] - 1], partial[:, horizons[-1] - 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.abs(s_last - s_prev) / np.maximum(np.abs(s_prev), 1e-300)
    unsettled = ~np.isfinite(s_last) | ~np.isfinite(s_prev) | (rel > rel_tol)
    k = int(unsettled.sum())
    test = stats.binomtest(k, n_paths, p0, alternative="greater")
    medians = [float(np.median(partial[:, h - 1])) for h in horizons]
    witness = {"unsettled": k, "paths": n_paths, "p_value": float(test.pvalue),
               "horizons": horizons, "medians": medians}
    if test.pvalue < level:
        return Verdict(Outcome.DIVERGES, "partial sums keep moving across doubling horizons", witness)
    return Verdict(Outcome.CONVERGES, "partial sums settle across doubling horizons", witness)
