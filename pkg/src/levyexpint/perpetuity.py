"""Monte-Carlo engine for V = int exp(-xi_{t-}) d eta_t.

Every supported model reduces to a perpetuity

    Z = sum_{k >= 0} (prod_{i < k} A_i) B_k,        (A_k, B_k) i.i.d.

(A and B may be dependent within a pair). The series is cut after n terms
with n the smallest integer such that E[A]**(n+1) E|B| / (1 - E[A]) <= eps,
which bounds E|Z - Z_n|. Products are accumulated in log-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .convergence import (Outcome, Verdict, check_eta_compound_sum, check_levy,
                          check_xi_compound_sum)
from .distributions import DistributionSpec, Exponential, PointMass
from .errors import NotConvergentError, TruncationError, UnsupportedError
from .processes import (BrownianWithDrift, CompoundPoisson, CompoundSumSpec, DependentCPPSpec,
                        Deterministic, LevyProcessSpec, PoissonCounting, _compound_sums)
from .rng import RngStream, as_stream, parallel_draws

__all__ = [
    "TruncationPolicy", "truncation_bound", "IndepLevy", "XiCompoundSum", "EtaCompoundSum",
    "Dependent", "MCSummary", "simulate_perpetuity", "simulate_V", "simulate_dependent",
    "simulate_brownian_discretized", "pair_sampler", "check_model", "fixed_point_residual",
]

PREPASS_N = 100_000
PREPASS_STREAM = 1 << 20
BLOCK_ENTRIES = 1 << 22     # max matrix entries held per column block
QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


@dataclass(frozen=True)
class TruncationPolicy:
    """Bias target ``eps`` and term cap ``n_max``.

    ``h`` and ``horizon`` only affect the discretized Brownian oracle.
    """

    eps: float = 1e-8
    n_max: int = 100_000
    h: float = 1e-3
    horizon: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if int(self.n_max) < 1:
            raise ValueError("n_max must be >= 1")


def truncation_bound(eA: float, eAbsB: float, n: int) -> float:
    """Bias bound eA**(n+1) * eAbsB / (1 - eA) of the n-term perpetuity."""
    if not 0 <= eA < 1:
        raise ValueError("truncation_bound needs 0 <= E[A] < 1")
    if eA == 0:
        return 0.0
    return eA ** (n + 1) * eAbsB / (1 - eA)


def _terms_needed(eA: float, eAbsB: float, policy: TruncationPolicy) -> int:
    if eA == 0 or eAbsB == 0:
        return 0
    if not math.isfinite(eAbsB):
        raise TruncationError("E|B| is infinite; no finite truncation controls the bias", math.inf)
    n = max(0, math.ceil(math.log(policy.eps * (1 - eA) / eAbsB) / math.log(eA) - 1))
    while truncation_bound(eA, eAbsB, n) > policy.eps:
        n += 1
    if n > policy.n_max:
        raise TruncationError(
            f"{n} terms needed for eps={policy.eps:g}, cap is {policy.n_max}",
            truncation_bound(eA, eAbsB, int(policy.n_max)))
    return n


# ---------------------------------------------------------------------------
# Model specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndepLevy:
    xi: LevyProcessSpec
    eta: LevyProcessSpec


@dataclass(frozen=True)
class XiCompoundSum:
    xi: CompoundSumSpec
    eta: LevyProcessSpec


@dataclass(frozen=True)
class EtaCompoundSum:
    xi: LevyProcessSpec
    eta: CompoundSumSpec


@dataclass(frozen=True)
class Dependent:
    spec: DependentCPPSpec


@dataclass
class MCSummary:
    n: int
    mean: float
    stderr: float
    min: float
    max: float
    quantiles: dict
    method: str = ""
    terms: int | None = None
    bias_bound: float | None = None
    workers: int = 1
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, x, **kw) -> "MCSummary":
        x = np.asarray(x, float)
        with np.errstate(invalid="ignore"):
            q = np.quantile(x, QUANTILES) if x.size else np.full(len(QUANTILES), np.nan)
        se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(n=int(x.size), mean=float(x.mean()), stderr=se, min=float(x.min()),
                   max=float(x.max()), quantiles={f"{p:g}": float(v) for p, v in zip(QUANTILES, q)}, **kw)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["version"] = __version__
        return d


# ---------------------------------------------------------------------------
# Generic perpetuity engine
# ---------------------------------------------------------------------------

PairDraw = Callable[[np.random.Generator, tuple], tuple]


def _sum_series(draw_pairs: PairDraw, n_terms: int, size: int, gen: np.random.Generator) -> np.ndarray:
    """Z_n = sum_{k=0}^{n_terms-1} (prod_{i<k} A_i) B_k for ``size`` paths."""
    total = np.zeros(size)
    logp = np.zeros(size)        # log |prod A_i|
    sign = np.ones(size)
    block = max(1, min(n_terms, BLOCK_ENTRIES // max(size, 1)))
    done = 0
    while done < n_terms:
        w = min(block, n_terms - done)
        a, b = draw_pairs(gen, (size, w))
        a, b = np.asarray(a, float), np.asarray(b, float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            la = np.log(np.abs(a))
            cum = np.cumsum(la, axis=1)
            before = np.concatenate([logp[:, None], logp[:, None] + cum[:, :-1]], axis=1)
            sa = np.where(a < 0, -1.0, 1.0)
            csign = np.cumprod(sa, axis=1)
            sbefore = np.concatenate([sign[:, None], sign[:, None] * csign[:, :-1]], axis=1)
            weight = np.exp(before)
            terms = np.where(weight == 0, 0.0, sbefore * weight * b)
        total += terms.sum(axis=1)
        logp = logp + cum[:, -1]
        sign = sign * csign[:, -1]
        done += w
    return total


def _independent_pairs(a: DistributionSpec, b: DistributionSpec) -> PairDraw:
    def draw(gen, shape):
        m = int(np.prod(shape))
        return a._draw(gen, m).reshape(shape), b._draw(gen, m).reshape(shape)
    return draw


def _prepass(draw_pairs: PairDraw, rng: RngStream) -> tuple[float, float]:
    """MC upper estimates (mean + 3 stderr) of E|A| and E|B|."""
    a, b = draw_pairs(rng.substream(PREPASS_STREAM).generator, (PREPASS_N, 1))
    out = []
    for x in (np.abs(np.asarray(a, float)).ravel(), np.abs(np.asarray(b, float)).ravel()):
        if not np.isfinite(x).all():
            out.append(math.inf)
        else:
            out.append(float(x.mean() + 3 * x.std(ddof=1) / math.sqrt(x.size)))
    return out[0], out[1]


def _plan(draw_pairs: PairDraw, eA, eB, policy: TruncationPolicy, rng: RngStream):
    if eA is None or eB is None:
        mA, mB = _prepass(draw_pairs, rng)
        eA = mA if eA is None else eA
        eB = mB if eB is None else eB
    if not eA < 1:
        raise ValueError(f"E|A| = {eA:.6g} is not below 1; the perpetuity bound does not apply")
    n = _terms_needed(eA, eB, policy)
    return n, truncation_bound(eA, eB, n), eA, eB


def simulate_perpetuity(a: DistributionSpec, b: DistributionSpec, policy: TruncationPolicy,
                        rng: RngStream | int, size: int | None = None):
    """Draw(s) of the truncated perpetuity Z_n with independent A ~ a, B ~ b.

    E[A] and E|B| come from closed forms when available and from an MC
    pre-pass (mean + 3 stderr) otherwise.

    Returns
    -------
    float, or ndarray of length ``size``.
    """
    rng = as_stream(rng)
    if not a.nonnegative:
        eA = a.abs_mean()
    else:
        eA = a.mean()
    eB = b.abs_mean()
    draw = _independent_pairs(a, b)
    n, _, _, _ = _plan(draw, eA, eB, policy, rng)
    out = _sum_series(draw, n + 1, 1 if size is None else int(size), rng.generator)
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Model -> pair sampler
# ---------------------------------------------------------------------------

@dataclass
class _Plan:
    draw: PairDraw | None
    eA: float | None
    eB: float | None
    method: str
    exact: Callable[[np.random.Generator, int], np.ndarray] | None = None


def _as_cpp(p: LevyProcessSpec):
    if isinstance(p, PoissonCounting):
        return CompoundPoisson(p.rate, PointMass(1.0))
    return p


def _stopped_abs_mean(eta: LevyProcessSpec, wait: DistributionSpec):
    law = eta.stopped_law(wait)
    if law is not None:
        m = law.abs_mean()
        if m is not None:
            return m
    if eta.is_subordinator:
        m, w = eta.mean_increment(), wait.mean()
        if m is not None and w is not None:
            return m * w
    return None


def _xi_compound_plan(xi: CompoundSumSpec, eta: LevyProcessSpec) -> _Plan:
    def draw(gen, shape):
        m = int(np.prod(shape))
        a = np.exp(-xi.jump._draw(gen, m))
        tau = xi.waiting._draw(gen, m)
        b = eta._increment(np.asarray(tau, float), gen)
        return a.reshape(shape), np.asarray(b, float).reshape(shape)
    return _Plan(draw, xi.jump.exp_moment(1.0), _stopped_abs_mean(eta, xi.waiting), "perpetuity")


def _eta_compound_plan(xi: LevyProcessSpec, eta: CompoundSumSpec) -> _Plan:
    # V = sum_k (prod_{i<=k} A_i) Y_k: fold A_k into the k-th term.
    def draw(gen, shape):
        m = int(np.prod(shape))
        tau = eta.waiting._draw(gen, m)
        a = np.exp(-np.asarray(xi._increment(np.asarray(tau, float), gen), float))
        y = eta.jump._draw(gen, m)
        return a.reshape(shape), (a * y).reshape(shape)
    eA = None
    try:
        psi = float(xi.exp_exponent(1.0))
        eA = eta.waiting.exp_moment(psi)
    except Exception:
        pass
    eY = eta.jump.abs_mean()
    eB = None if (eA is None or eY is None) else eA * eY
    return _Plan(draw, eA, eB, "perpetuity")


def _levy_plan(xi: LevyProcessSpec, eta: LevyProcessSpec) -> _Plan:
    xi, eta = _as_cpp(xi), _as_cpp(eta)
    if isinstance(xi, BrownianWithDrift) and xi.sigma == 0:
        xi = Deterministic(xi.drift)
    if isinstance(xi, Deterministic) and isinstance(eta, Deterministic):
        v = eta.slope / xi.slope
        return _Plan(None, None, None, "exact", exact=lambda gen, n: np.full(n, v))
    if isinstance(xi, BrownianWithDrift) and isinstance(eta, Deterministic):
        # int exp(-(sigma B_t + a t)) dt =d 2 / (sigma^2 gamma_{2a/sigma^2})
        s2, a, s = xi.sigma ** 2, xi.drift, eta.slope

        def exact(gen, n):
            return s * 2.0 / (s2 * gen.gamma(2 * a / s2, 1.0, size=n))
        return _Plan(None, None, None, "exact", exact=exact)
    if isinstance(eta, CompoundPoisson) and eta.drift == 0:
        return _eta_compound_plan(xi, CompoundSumSpec(Exponential(eta.rate), eta.jump))
    if isinstance(xi, CompoundPoisson) and xi.drift == 0:
        return _xi_compound_plan(CompoundSumSpec(Exponential(xi.rate), xi.jump), eta)
    if isinstance(xi, CompoundPoisson) and isinstance(eta, Deterministic):
        # between jumps exp(-xi) decays at rate d: B = s (1 - e^{-dW})/d, A = e^{-X - dW}
        d, s, wait = xi.drift, eta.slope, Exponential(xi.rate)

        def draw(gen, shape):
            m = int(np.prod(shape))
            w = wait._draw(gen, m)
            x = xi.jump._draw(gen, m)
            return np.exp(-x - d * w).reshape(shape), (s * -np.expm1(-d * w) / d).reshape(shape)
        eW = wait.exp_moment(d)
        eX = xi.jump.exp_moment(1.0)
        eA = None if (eW is None or eX is None) else eW * eX
        eB = abs(s) * (1 - eW) / d if eW is not None and math.isfinite(eW) else None
        return _Plan(draw, eA, eB, "perpetuity")
    raise UnsupportedError(
        "unsupported independent Levy pair; supported forms: deterministic xi and eta, "
        "Brownian-with-drift xi with deterministic eta, any xi with driftless compound Poisson "
        "eta, driftless compound Poisson xi with any eta, compound Poisson xi with drift and "
        "deterministic eta")


def pair_sampler(model) -> tuple[PairDraw, float | None, float | None]:
    """Pair sampler (A, B) of the perpetuity representing ``model``.

    Returns ``(draw_pairs, E[A] or None, E|B| or None)``.
    """
    if isinstance(model, XiCompoundSum):
        p = _xi_compound_plan(model.xi, model.eta)
    elif isinstance(model, EtaCompoundSum):
        p = _eta_compound_plan(model.xi, model.eta)
    elif isinstance(model, IndepLevy):
        p = _levy_plan(model.xi, model.eta)
        if p.draw is None:
            raise UnsupportedError("model is sampled exactly, not through a perpetuity")
    else:
        raise UnsupportedError(f"no perpetuity pair sampler for {type(model).__name__}")
    return p.draw, p.eA, p.eB


def check_model(model, rng: RngStream | int | None = None) -> Verdict:
    """Convergence verdict of the checker matching the model variant."""
    if isinstance(model, IndepLevy):
        return check_levy(model.xi, model.eta)
    if isinstance(model, XiCompoundSum):
        return check_xi_compound_sum(model.xi, model.eta, rng)
    if isinstance(model, EtaCompoundSum):
        return check_eta_compound_sum(model.xi, model.eta, rng)
    if isinstance(model, Dependent):
        return Verdict(Outcome.CONVERGES, "xi jumps by one at every event; the rho laws have finite "
                       "logarithmic moments by construction")
    raise TypeError(f"unknown model {model!r}")


def simulate_V(model, policy: TruncationPolicy, rng: RngStream | int, n: int, workers: int = 1,
               force: bool = False, method: str | None = None):
    """``n`` draws of V for ``model`` plus an :class:`MCSummary`.

    Parameters
    ----------
    force : bool
        Simulate even when the convergence checker does not return Converges.
    method : {None, "discretized"}
        "discretized" selects the validation-only Euler integrator (Brownian
        xi with deterministic eta).
    """
    rng = as_stream(rng)
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    verdict = check_model(model, rng.substream(PREPASS_STREAM + 1))
    if verdict.outcome is not Outcome.CONVERGES and not force:
        raise NotConvergentError(verdict)
    if isinstance(model, Dependent):
        x, info = _simulate_dependent(model.spec, policy, rng, n, workers)
        return x, MCSummary.from_samples(x, method="dependent", workers=workers, **info)
    if method == "discretized":
        if not (isinstance(model, IndepLevy) and isinstance(model.xi, BrownianWithDrift)
                and isinstance(model.eta, Deterministic)):
            raise UnsupportedError("the discretized integrator covers Brownian xi with deterministic eta only")
        x = simulate_brownian_discretized(model.xi, model.eta.slope, policy, rng, n, workers)
        T = policy.horizon or 40.0 / model.xi.drift
        return x, MCSummary.from_samples(x, method="discretized", workers=workers,
                                         extra={"h": policy.h, "horizon": T})
    if isinstance(model, IndepLevy):
        plan = _levy_plan(model.xi, model.eta)
    elif isinstance(model, XiCompoundSum):
        plan = _xi_compound_plan(model.xi, model.eta)
    else:
        plan = _eta_compound_plan(model.xi, model.eta)
    if plan.exact is not None:
        x = parallel_draws(lambda c, s: plan.exact(s.generator, c), n, rng, workers)
        return x, MCSummary.from_samples(x, method="exact", terms=0, bias_bound=0.0, workers=workers)
    terms, bound, eA, eB = _plan(plan.draw, plan.eA, plan.eB, policy, rng)
    x = parallel_draws(lambda c, s: _sum_series(plan.draw, terms + 1, c, s.generator), n, rng, workers)
    return x, MCSummary.from_samples(x, method=plan.method, terms=terms + 1, bias_bound=bound,
                                     workers=workers, extra={"E[A]": eA, "E|B|": eB})


# ---------------------------------------------------------------------------
# Dependent model
# ---------------------------------------------------------------------------

def _rho_mean(spec: DependentCPPSpec, rng: RngStream) -> float:
    m0, m1 = spec.rho0.mean(), spec.rho1.mean()
    gen = rng.substream(PREPASS_STREAM).generator
    vals = []
    for rho, m in ((spec.rho0, m0), (spec.rho1, m1)):
        if m is None:
            x = rho._draw(gen, PREPASS_N)
            m = float(x.mean() + 3 * x.std(ddof=1) / math.sqrt(x.size))
        vals.append(m)
    p = spec.p
    return p / (1 - p) * vals[0] + vals[1]


def _draw_rho(spec: DependentCPPSpec, gen, size: int) -> np.ndarray:
    """R = (sum of M draws of rho0) + one draw of rho1, P(M = k) = (1-p) p**k."""
    counts = gen.geometric(1 - spec.p, size=size) - 1
    return _compound_sums(counts, spec.rho0, gen) + spec.rho1._draw(gen, size)


def _simulate_dependent(spec, policy, rng, n, workers):
    c = spec.log_scale
    eR = _rho_mean(spec, rng)
    q = 1.0 / c
    N = 0
    bound = lambda N: q ** (N + 1) * eR / (1 - q)
    if eR > 0:
        N = max(0, math.ceil(math.log(policy.eps * (1 - q) / eR) / math.log(q) - 1))
        while bound(N) > policy.eps:
            N += 1
        while N > 0 and bound(N - 1) <= policy.eps:
            N -= 1
    if N + 1 > policy.n_max:
        raise TruncationError(f"{N + 1} terms needed, cap is {policy.n_max}", bound(int(policy.n_max) - 1))

    def chunk(count, stream):
        gen = stream.generator
        v = np.zeros(count)
        for m in range(N + 1):
            v += q ** m * _draw_rho(spec, gen, count)
        return v

    x = parallel_draws(chunk, n, rng, workers)
    return x, {"terms": N + 1, "bias_bound": bound(N), "extra": {"E[R]": eR}}


def simulate_dependent(spec: DependentCPPSpec, policy: TruncationPolicy, rng: RngStream | int,
                       n: int, workers: int = 1) -> np.ndarray:
    """``n`` draws of V = sum_{m=0}^{N} c**-m R_m for the dependent model."""
    x, _ = _simulate_dependent(spec, policy, as_stream(rng), int(n), workers)
    return x


def simulate_brownian_discretized(xi: BrownianWithDrift, slope: float, policy: TruncationPolicy,
                                  rng: RngStream | int, n: int, workers: int = 1,
                                  batch: int = 1000, steps: int = 2000) -> np.ndarray:
    """Validation-only trapezoid approximation of slope * int_0^T exp(-xi_t) dt.

    Step ``policy.h``, horizon ``policy.horizon`` (default 40/a); bias is
    O(h) + exp(-aT). A batch stops early once every path has
    exp(-xi) < 1e-17.
    """
    if not xi.drift > 0:
        raise ValueError("discretized integrator needs positive drift")
    rng = as_stream(rng)
    h = policy.h
    T = policy.horizon or 40.0 / xi.drift
    n_steps = int(math.ceil(T / h))

    def run(count, stream):
        gen = stream.generator
        out = np.empty(count)
        for lo in range(0, count, batch):
            m = min(batch, count - lo)
            x = np.zeros(m)
            acc = np.zeros(m)
            done = 0
            while done < n_steps:
                w = min(steps, n_steps - done)
                inc = xi.drift * h + xi.sigma * math.sqrt(h) * gen.standard_normal((m, w))
                path = x[:, None] + np.cumsum(inc, axis=1)
                e = np.exp(-np.concatenate([x[:, None], path], axis=1))
                acc += h * (0.5 * e[:, 0] + e[:, 1:-1].sum(axis=1) + 0.5 * e[:, -1])
                x = path[:, -1]
                done += w
                if np.all(x > 39.2):   # exp(-xi) < 1e-17 on every path
                    break
            out[lo:lo + m] = slope * acc
        return out

    return parallel_draws(run, n, rng, workers)


# ---------------------------------------------------------------------------
# Transform-level fixed point
# ---------------------------------------------------------------------------

def fixed_point_residual(z, a: DistributionSpec, b: DistributionSpec, u: float,
                         rng: RngStream | int, m: int = 2000) -> dict:
    """Check L_Z(u) = E[exp(-uB) L_Z(uA)] on an engine sample ``z``.

    ``z`` is split in halves: the first estimates the left side, the
    second plays Z' on the right side against ``m`` fresh (A, B) pairs.
    The right side is a two-sample mean whose variance is estimated from
    its row and column means.
    """
    z = np.asarray(z, float)
    rng = as_stream(rng)
    half = z.size // 2
    z1, z2 = z[:half], z[half:]
    g = rng.generator
    av, bv = a._draw(g, m), b._draw(g, m)
    lhs_terms = np.exp(-u * z1)
    lhs = float(lhs_terms.mean())
    lhs_se = float(lhs_terms.std(ddof=1) / math.sqrt(z1.size))
    row = np.empty(m)
    col = np.zeros(z2.size)
    for lo in range(0, m, 100):
        blk = np.exp(-u * bv[lo:lo + 100, None]) * np.exp(-u * np.outer(av[lo:lo + 100], z2))
        row[lo:lo + 100] = blk.mean(axis=1)
        col += blk.sum(axis=0)
    col /= m
    rhs = float(row.mean())
    rhs_se = math.sqrt(row.var(ddof=1) / m + col.var(ddof=1) / z2.size)
    se = math.hypot(lhs_se, rhs_se)
    return {"u": u, "lhs": lhs, "rhs": rhs, "residual": lhs - rhs, "stderr": se,
            "ok": abs(lhs - rhs) <= 4 * se}
