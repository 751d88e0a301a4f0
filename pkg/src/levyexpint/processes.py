"""Levy and compound-sum process specifications with exact marginal sampling.

Only families whose marginals X_t can be drawn exactly are supported. For
every family ``exp_exponent(s)`` returns psi(s) with E[exp(-s X_t)] =
exp(-t psi(s)) where that expectation is finite; for subordinators psi is
the Laplace exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import quad

from .distributions import (DistributionSpec, Exponential, InverseGaussian, LaplaceFn, Normal,
                            PointMass, PositiveStable, Transformed)
from .errors import UnsupportedError
from .rng import RngStream, as_stream

__all__ = [
    "LevyProcessSpec", "BrownianWithDrift", "Deterministic", "StableSubordinator",
    "InverseGaussianSub", "CompoundPoisson", "PoissonCounting", "CompoundSumSpec",
    "DependentCPPSpec", "sample_increment", "sample_stopped", "stopped_laplace", "a_function",
]

QUAD_EPSABS = 1e-8
QUAD_LIMIT = 10 ** 6


class LevyProcessSpec:
    """Base class of the supported Levy families."""

    is_subordinator = False

    def exp_exponent(self, s):
        raise UnsupportedError(f"no exponential-moment exponent for {self!r}")

    def laplace_exponent(self, u):
        if not self.is_subordinator:
            raise UnsupportedError(f"{self!r} is not a subordinator")
        return self.exp_exponent(np.asarray(u, float))

    def mean_increment(self):
        """E[X_1]; may be +inf, None when unknown."""
        raise NotImplementedError

    def levy_tail(self, x):
        """nu((x, inf))."""
        return 0.0

    def levy_abs_tail(self, x):
        """nu({|y| > x})."""
        return self.levy_tail(x)

    def triplet_drift(self) -> float:
        """Drift a of the Levy-Khintchine triplet (truncation |y| <= 1)."""
        raise NotImplementedError

    def tail_integral(self, x: float) -> float:
        """int_1^x nu((y, inf)) dy (negative for x < 1)."""
        val, _ = quad(lambda y: float(self.levy_tail(y)), 1.0, x, epsabs=QUAD_EPSABS, limit=QUAD_LIMIT)
        return float(val)

    def log_moment_finite(self):
        """Whether int log+|y| nu(dy) < inf."""
        return True

    def stopped_law(self, stop: DistributionSpec):
        """Closed-form law of X_tau for independent tau ~ stop, else None."""
        return None

    def _increment(self, t: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class BrownianWithDrift(LevyProcessSpec):
    """X_t = sigma B_t + drift t."""

    sigma: float = 1.0
    drift: float = 0.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")

    def exp_exponent(self, s):
        return self.drift * s - 0.5 * self.sigma ** 2 * np.square(s)

    def mean_increment(self):
        return self.drift

    def triplet_drift(self):
        return self.drift

    def stopped_law(self, stop):
        if isinstance(stop, PointMass) and stop.c > 0:
            return Normal(self.drift * stop.c, self.sigma ** 2 * stop.c)
        if self.sigma == 0:
            return Deterministic(self.drift).stopped_law(stop)
        return None

    def _increment(self, t, gen):
        return self.drift * t + self.sigma * np.sqrt(t) * gen.standard_normal(t.shape)


@dataclass(frozen=True)
class Deterministic(LevyProcessSpec):
    """X_t = slope * t."""

    slope: float = 1.0

    @property
    def is_subordinator(self):
        return self.slope >= 0

    def exp_exponent(self, s):
        return self.slope * np.asarray(s, float)

    def mean_increment(self):
        return self.slope

    def triplet_drift(self):
        return self.slope

    def stopped_law(self, stop):
        if self.slope == 0:
            return PointMass(0.0)
        if isinstance(stop, PointMass):
            return PointMass(self.slope * stop.c)
        if isinstance(stop, Transformed) and len(stop.maps) < 3:
            return Transformed(stop.base, stop.maps + (("scale", self.slope),))
        if isinstance(stop, Transformed):
            return None
        return Transformed(stop, (("scale", self.slope),))

    def _increment(self, t, gen):
        return self.slope * t


@dataclass(frozen=True)
class StableSubordinator(LevyProcessSpec):
    """Subordinator with Laplace exponent drift*u + scale*u**alpha.

    ``scale`` defaults to 1. The Levy measure is
    scale*alpha/Gamma(1-alpha) * x**(-1-alpha) dx.
    """

    alpha: float
    drift: float = 0.0
    scale: float = 1.0

    is_subordinator = True

    def __post_init__(self):
        PositiveStable(self.alpha)  # validates alpha
        if not (self.drift >= 0 and self.scale > 0):
            raise ValueError("StableSubordinator requires drift >= 0 and scale > 0")

    def exp_exponent(self, s):
        s = np.asarray(s, float)
        with np.errstate(invalid="ignore"):
            return np.where(s >= 0, self.drift * s + self.scale * np.abs(s) ** self.alpha, -np.inf)

    def mean_increment(self):
        return math.inf

    def levy_tail(self, x):
        return self.scale * np.asarray(x, float) ** (-self.alpha) / math.gamma(1 - self.alpha)

    def triplet_drift(self):
        a = self.alpha
        return self.drift + self.scale * a / ((1 - a) * math.gamma(1 - a))

    def tail_integral(self, x):
        a = self.alpha
        return self.scale / math.gamma(1 - a) * (x ** (1 - a) - 1) / (1 - a)

    def stopped_law(self, stop):
        if isinstance(stop, PointMass) and stop.c > 0:
            maps = [("scale", (self.scale * stop.c) ** (1 / self.alpha))]
            if self.drift > 0:
                maps.append(("shift", self.drift * stop.c))
            return Transformed(PositiveStable(self.alpha), tuple(maps))
        return None

    def _increment(self, t, gen):
        s = PositiveStable(self.alpha)._draw(gen, t.size).reshape(t.shape)
        return self.drift * t + (self.scale * t) ** (1 / self.alpha) * s


def _ig_draw(gen, mu, lam):
    y = gen.standard_normal(mu.shape) ** 2
    x = mu + mu * mu * y / (2 * lam) - mu / (2 * lam) * np.sqrt(4 * mu * lam * y + (mu * y) ** 2)
    z = gen.random(mu.shape)
    return np.where(z <= mu / (mu + x), x, mu * mu / x)


@dataclass(frozen=True)
class InverseGaussianSub(LevyProcessSpec):
    """Subordinator with Laplace exponent delta*(sqrt(beta**2 + 2u) - beta)."""

    beta: float
    delta: float

    is_subordinator = True

    def __post_init__(self):
        if not (self.beta > 0 and self.delta > 0):
            raise ValueError("InverseGaussianSub requires beta > 0 and delta > 0")

    def exp_exponent(self, s):
        s = np.asarray(s, float)
        return self.delta * (np.sqrt(self.beta ** 2 + 2 * s) - self.beta)

    def mean_increment(self):
        return self.delta / self.beta

    def levy_tail(self, x):
        x = np.asarray(x, float)
        c = self.beta ** 2 / 2
        return self.delta / math.sqrt(2 * math.pi) * (
            2 * x ** -0.5 * np.exp(-c * x) - 2 * math.sqrt(c * math.pi) * special.erfc(np.sqrt(c * x)))

    def triplet_drift(self):
        return self.delta / self.beta * math.erf(self.beta / math.sqrt(2))

    def stopped_law(self, stop):
        if isinstance(stop, PointMass) and stop.c > 0:
            return InverseGaussian(self.beta, self.delta * stop.c)
        return None

    def _increment(self, t, gen):
        t = np.asarray(t, float)
        mu = self.delta * t / self.beta
        lam = (self.delta * t) ** 2
        return _ig_draw(gen, mu, lam)


def _compound_sums(counts: np.ndarray, jump: DistributionSpec, gen) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64).ravel()
    total = int(counts.sum())
    if total == 0:
        return np.zeros(counts.size)
    jumps = np.asarray(jump._draw(gen, total), float)
    owner = np.repeat(np.arange(counts.size), counts)
    return np.bincount(owner, weights=jumps, minlength=counts.size)


@dataclass(frozen=True)
class CompoundPoisson(LevyProcessSpec):
    """Compound Poisson process with intensity ``rate``, jumps ``jump`` and linear ``drift``."""

    rate: float
    jump: DistributionSpec
    drift: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("CompoundPoisson requires rate > 0")

    @property
    def is_subordinator(self):
        return self.jump.nonnegative and self.drift >= 0

    def exp_exponent(self, s):
        s = np.asarray(s, float)
        if s.ndim == 0:
            m = self.jump.exp_moment(float(s))
            if m is None:
                raise UnsupportedError(f"no closed-form E[exp(-s J)] for {self.jump!r}")
            return self.rate * (1 - m) + self.drift * s
        if self.jump.nonnegative and np.all(s >= 0):
            lt = self.jump._lt(s)
            if lt is not None:
                return self.rate * (1 - lt) + self.drift * s
        return np.array([self.exp_exponent(float(v)) for v in s.ravel()]).reshape(s.shape)

    def mean_increment(self):
        m = self.jump.mean()
        return None if m is None else self.drift + self.rate * m

    def levy_tail(self, x):
        return self.rate * np.asarray(self.jump.sf(x), float)

    def levy_abs_tail(self, x):
        x = np.asarray(x, float)
        if self.jump.nonnegative:
            return self.levy_tail(x)
        return self.rate * (np.asarray(self.jump.sf(x), float) + np.asarray(self.jump.cdf(-x), float))

    def triplet_drift(self):
        j = self.jump
        if j.nonnegative:
            small = j.truncated_mean(1.0) - float(j.sf(1.0))
        else:
            small, _ = quad(lambda y: y * float(j.pdf(y)), -1.0, 1.0, epsabs=QUAD_EPSABS, limit=1000)
        return self.drift + self.rate * small

    def tail_integral(self, x):
        return self.rate * (self.jump.truncated_mean(x) - self.jump.truncated_mean(1.0))

    def log_moment_finite(self):
        return self.jump.log_moment_finite()

    def _increment(self, t, gen):
        t = np.asarray(t, float)
        counts = gen.poisson(self.rate * t)
        return (_compound_sums(counts, self.jump, gen).reshape(t.shape) + self.drift * t)


@dataclass(frozen=True)
class PoissonCounting(LevyProcessSpec):
    rate: float

    is_subordinator = True

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("PoissonCounting requires rate > 0")

    def exp_exponent(self, s):
        return self.rate * (1 - np.exp(-np.asarray(s, float)))

    def mean_increment(self):
        return self.rate

    def levy_tail(self, x):
        return self.rate * (np.asarray(x, float) < 1).astype(float)

    def triplet_drift(self):
        return self.rate

    def tail_integral(self, x):
        return -self.rate * max(1.0 - x, 0.0)

    def _increment(self, t, gen):
        return gen.poisson(self.rate * np.asarray(t, float)).astype(float)


@dataclass(frozen=True)
class CompoundSumSpec:
    """X_t = sum_{i <= M_t} X_i with renewal counting process M of waiting law ``waiting``."""

    waiting: DistributionSpec
    jump: DistributionSpec

    def __post_init__(self):
        if not self.waiting.positive:
            raise ValueError(f"waiting-time law must be a.s. positive, got {self.waiting!r}")


@dataclass(frozen=True)
class DependentCPPSpec:
    """Bivariate compound Poisson (xi, eta) with normalized Levy measure

        p * delta_0(dx) rho0(dy) + (1 - p) * delta_1(dx) rho1(dy),

    and integrand ``log_scale ** (-xi)`` (log_scale = e gives exp(-xi)).
    """

    rate: float
    p: float
    rho0: DistributionSpec
    rho1: DistributionSpec
    log_scale: float = math.e

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if not 0 < self.p < 1:
            raise ValueError("p must lie strictly between 0 and 1")
        if not self.log_scale > 1:
            raise ValueError("log_scale must exceed 1 (log_scale = 1 gives a divergent integral)")
        if not self.rho0.positive:
            raise ValueError("rho0 must live on (0, inf)")
        if not self.rho1.nonnegative:
            raise ValueError("rho1 must live on [0, inf)")
        for name, rho in (("rho0", self.rho0), ("rho1", self.rho1)):
            if rho.log_moment_finite() is not True:
                raise ValueError(f"{name} must have a finite logarithmic moment (got {rho!r})")


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def sample_increment(proc: LevyProcessSpec, t, rng: RngStream | int):
    """Exact draw(s) of X_t; ``t`` may be a scalar or an array of horizons."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta <= 0):
        raise ValueError("t must be positive")
    out = proc._increment(ta.reshape(-1) if ta.ndim else ta.reshape(1), as_stream(rng).generator)
    return float(out[0]) if ta.ndim == 0 else np.asarray(out, float).reshape(ta.shape)


def sample_stopped(proc: LevyProcessSpec, stop: DistributionSpec, rng: RngStream | int, n: int) -> np.ndarray:
    """``n`` draws of X_tau with tau ~ stop independent of the process."""
    if not stop.positive:
        raise ValueError(f"stopping law must be a.s. positive, got {stop!r}")
    rng = as_stream(rng)
    tau = stop.sample(rng, n)
    return np.asarray(proc._increment(tau, rng.generator), float)


def stopped_laplace(proc: LevyProcessSpec, stop: DistributionSpec) -> LaplaceFn:
    """Analytic Laplace transform u -> L_tau(phi(u)) of X_tau.

    For an exponential stop with rate lam this is lam / (lam + phi(u)).
    Inverse-Gaussian processes stopped at rate lam < delta*beta carry the
    flag ``"hcm_guarantee_void"``; stable subordinators with positive drift
    carry ``"non_hcm_candidate"``.
    """
    if not proc.is_subordinator:
        raise UnsupportedError(f"stopped Laplace transform needs a subordinator, got {proc!r}")
    lt_tau = stop.laplace()
    m_tau, m_inc = stop.mean(), proc.mean_increment()
    mean = None
    if m_tau is not None and m_inc is not None and math.isfinite(m_tau) and math.isfinite(m_inc):
        mean = m_tau * m_inc

    def func(u):
        return lt_tau(proc.laplace_exponent(u))

    flags = set()
    if isinstance(proc, InverseGaussianSub) and isinstance(stop, Exponential):
        if stop.rate < proc.delta * proc.beta:
            flags.add("hcm_guarantee_void")
    if isinstance(proc, StableSubordinator) and proc.drift > 0:
        flags.add("non_hcm_candidate")
    return LaplaceFn(func, "analytic", mean=mean, label=f"{proc!r} stopped at {stop!r}",
                     flags=frozenset(flags))


def a_function(obj, x: float) -> float:
    """Truncated-mean function A(x) used by the convergence tests.

    * Levy process: a + nu((1, inf)) + int_1^x nu((y, inf)) dy.
    * jump law (or :class:`CompoundSumSpec`): int_0^x P(X_1 > u) du.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    if isinstance(obj, CompoundSumSpec):
        obj = obj.jump
    if isinstance(obj, DistributionSpec):
        return float(obj.truncated_mean(x))
    if isinstance(obj, LevyProcessSpec):
        return float(obj.triplet_drift() + float(obj.levy_tail(1.0)) + obj.tail_integral(x))
    raise TypeError(f"cannot compute A-function of {obj!r}")
