"""Scalar laws used as building blocks: samplers, densities, Laplace transforms.

Each law is a frozen dataclass validated at construction. The module-level
functions :func:`sample`, :func:`laplace` and :func:`density` are thin
wrappers over the corresponding methods.

Moments are exposed through a small recursive calculus so that derived laws
such as ``exp(-X)`` or ``gamma**-c`` get analytic means when one exists:

* ``exp_moment(s)``   -> E[exp(-s X)]
* ``power_moment(c)`` -> E[X**c]            (positive laws only)
* ``log_mean()``      -> E[log X]           (positive laws only)

Each returns ``None`` when no closed form is implemented and ``inf`` when
the moment is known to diverge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import special, stats

from .errors import UnsupportedError
from .rng import RngStream, as_stream

__all__ = [
    "LaplaceFn", "DistributionSpec", "Gamma", "Exponential", "Normal", "HalfNormal",
    "LogNormal", "PositiveStable", "InverseGaussian", "PointMass", "ParetoTail",
    "SlowLogTail", "DiscreteAtoms", "LogRatioExp", "Transformed", "Map",
    "sample", "laplace", "density", "cdf",
]

EULER_GAMMA = float(np.euler_gamma)
MAX_CHAIN = 3


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# Laplace transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LaplaceFn:
    """Evaluable Laplace transform ``u -> E[exp(-u X)]``.

    Parameters
    ----------
    func : callable
        Vectorized evaluator on ``u >= 0``.
    kind : {"analytic", "empirical"}
    stderr_func : callable, optional
        Standard error of ``func`` (empirical kind only).
    mean : float, optional
        Finite mean of the underlying law when known; used to bound
        truncated infinite products.
    label : str
    flags : frozenset of str
        Free-form annotations such as ``"hcm_guarantee_void"``.
    """

    func: Callable
    kind: str = "analytic"
    stderr_func: Callable | None = None
    mean: float | None = None
    label: str = ""
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in ("analytic", "empirical"):
            raise ValueError(f"unknown LaplaceFn kind {self.kind!r}")

    def eval(self, u):
        ua = np.asarray(u, dtype=float)
        if np.any(ua < 0) or np.any(np.isnan(ua)):
            raise ValueError("Laplace transforms are evaluated on u >= 0")
        out = np.asarray(self.func(ua), dtype=float)
        if self.kind == "analytic":
            out = np.where(ua == 0.0, 1.0, out)
        return _scalar_or_array(u, out)

    __call__ = eval

    def stderr(self, u):
        ua = np.asarray(u, dtype=float)
        if self.stderr_func is None:
            return _scalar_or_array(u, np.zeros_like(ua))
        return _scalar_or_array(u, np.asarray(self.stderr_func(ua), dtype=float))

    def with_flags(self, *flags) -> "LaplaceFn":
        return LaplaceFn(self.func, self.kind, self.stderr_func, self.mean, self.label,
                         self.flags | frozenset(flags))


# ---------------------------------------------------------------------------
# Base class
# ---------------------------------------------------------------------------

class DistributionSpec:
    """Common interface of all scalar laws."""

    #: (lower, upper) closure of the support
    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def continuous(self) -> bool:
        return True

    @property
    def positive(self) -> bool:
        """True when P(X > 0) = 1."""
        lo = self.support[0]
        return lo > 0 or (lo == 0 and self.continuous)

    @property
    def nonnegative(self) -> bool:
        return self.support[0] >= 0

    # sampling -------------------------------------------------------------
    def sample(self, rng, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. variates from ``rng``."""
        n = int(n)
        if n < 1:
            raise ValueError("n must be >= 1")
        return np.asarray(self._draw(as_stream(rng).generator, n), dtype=float)

    def _draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    # transforms -----------------------------------------------------------
    def _lt(self, u: np.ndarray) -> np.ndarray | None:
        """Vectorized closed-form Laplace transform, or None."""
        return None

    def laplace(self) -> LaplaceFn:
        if not self.nonnegative:
            raise UnsupportedError(f"{self!r} is not supported on [0, inf); use empirical_laplace")
        probe = self._lt(np.array([1.0]))
        if probe is None:
            raise UnsupportedError(f"no closed-form Laplace transform for {self!r}; use empirical_laplace")
        return LaplaceFn(self._lt, "analytic", mean=self.mean(), label=repr(self))

    # densities ------------------------------------------------------------
    def pdf(self, x):
        raise UnsupportedError(f"no closed-form density for {self!r}")

    def cdf(self, x):
        raise UnsupportedError(f"no closed-form distribution function for {self!r}")

    def sf(self, x):
        return 1.0 - self.cdf(x)

    # moments --------------------------------------------------------------
    def exp_moment(self, s: float):
        if s == 0:
            return 1.0
        if s > 0 and self.nonnegative:
            lt = self._lt(np.array([float(s)]))
            if lt is not None:
                return float(lt[0])
        return None

    def power_moment(self, c: float):
        if c == 0:
            return 1.0
        return None

    def log_mean(self):
        return None

    def mean(self):
        if self.positive or self.nonnegative:
            return self.power_moment(1.0)
        return None

    def abs_mean(self):
        if self.nonnegative:
            return self.mean()
        return None

    def log_moment_finite(self):
        """Whether E[log+ |X|] is finite (None when undecided)."""
        return True

    def truncated_mean(self, x: float) -> float:
        """``E[min(X+, x)] = int_0^x P(X > u) du`` by adaptive quadrature."""
        from scipy.integrate import quad
        if x <= 0:
            return 0.0
        val, _ = quad(lambda u: float(self.sf(u)), 0.0, x, epsabs=1e-8, limit=1000)
        return float(val)


# ---------------------------------------------------------------------------
# scipy-backed continuous families
# ---------------------------------------------------------------------------

class _ScipyBacked(DistributionSpec):
    def _frozen(self):
        raise NotImplementedError

    def pdf(self, x):
        return _scalar_or_array(x, self._frozen().pdf(np.asarray(x, float)))

    def cdf(self, x):
        return _scalar_or_array(x, self._frozen().cdf(np.asarray(x, float)))

    def sf(self, x):
        return _scalar_or_array(x, self._frozen().sf(np.asarray(x, float)))


@dataclass(frozen=True)
class Gamma(_ScipyBacked):
    """gamma(r, lam): density lam**r x**(r-1) exp(-lam x) / Gamma(r)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("Gamma requires shape > 0 and rate > 0")

    @property
    def support(self):
        return (0.0, math.inf)

    def _frozen(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    def _draw(self, gen, n):
        return gen.gamma(self.shape, 1.0 / self.rate, size=n)

    def _lt(self, u):
        return (1.0 + u / self.rate) ** (-self.shape)

    def exp_moment(self, s):
        if s <= -self.rate:
            return math.inf
        return (1.0 + s / self.rate) ** (-self.shape)

    def power_moment(self, c):
        if c == 0:
            return 1.0
        if self.shape + c <= 0:
            return math.inf
        return math.exp(special.gammaln(self.shape + c) - special.gammaln(self.shape)) * self.rate ** (-c)

    def log_mean(self):
        return float(special.digamma(self.shape)) - math.log(self.rate)


@dataclass(frozen=True)
class Exponential(Gamma):
    """Exponential law with rate ``lam``."""

    shape: float = field(default=1.0, init=False)
    rate: float = 1.0

    def __repr__(self):
        return f"Exponential(rate={self.rate})"


@dataclass(frozen=True)
class Normal(_ScipyBacked):
    mu: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not self.var >= 0:
            raise ValueError("Normal requires var >= 0")

    def __repr__(self):
        return f"Normal(mu={self.mu}, var={self.var})"

    @property
    def sd(self):
        return math.sqrt(self.var)

    @property
    def support(self):
        if self.var == 0:
            return (self.mu, self.mu)
        return (-math.inf, math.inf)

    @property
    def continuous(self):
        return self.var > 0

    def _frozen(self):
        return stats.norm(self.mu, self.sd)

    def pdf(self, x):
        if self.var == 0:
            raise UnsupportedError("degenerate normal has no density")
        return super().pdf(x)

    def cdf(self, x):
        if self.var == 0:
            return _scalar_or_array(x, (np.asarray(x, float) >= self.mu).astype(float))
        return super().cdf(x)

    def _draw(self, gen, n):
        return gen.normal(self.mu, self.sd, size=n)

    def _lt(self, u):
        if self.var == 0 and self.mu >= 0:
            return np.exp(-u * self.mu)
        return None

    def exp_moment(self, s):
        return math.exp(-s * self.mu + 0.5 * s * s * self.var)

    def mean(self):
        return self.mu

    def abs_mean(self):
        m, sd = self.mu, self.sd
        if sd == 0:
            return abs(m)
        return sd * math.sqrt(2 / math.pi) * math.exp(-m * m / (2 * self.var)) + m * (1 - 2 * stats.norm.cdf(-m / sd))


@dataclass(frozen=True)
class HalfNormal(_ScipyBacked):
    """|Z| for standard normal Z; density sqrt(2/pi) exp(-x**2/2)."""

    @property
    def support(self):
        return (0.0, math.inf)

    def _frozen(self):
        return stats.halfnorm()

    def _draw(self, gen, n):
        return np.abs(gen.standard_normal(n))

    def _lt(self, u):
        return special.erfcx(u / math.sqrt(2.0))

    def exp_moment(self, s):
        return float(special.erfcx(s / math.sqrt(2.0)))

    def power_moment(self, c):
        if c <= -1:
            return math.inf
        return 2 ** (c / 2) * math.gamma((c + 1) / 2) / math.sqrt(math.pi)

    def log_mean(self):
        return -(EULER_GAMMA + math.log(2.0)) / 2


@dataclass(frozen=True)
class LogNormal(_ScipyBacked):
    """exp(N) with N ~ Normal(mu, var)."""

    mu: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError("LogNormal requires var > 0")

    def __repr__(self):
        return f"LogNormal(mu={self.mu}, var={self.var})"

    @property
    def support(self):
        return (0.0, math.inf)

    def _frozen(self):
        return stats.lognorm(math.sqrt(self.var), scale=math.exp(self.mu))

    def _draw(self, gen, n):
        return np.exp(gen.normal(self.mu, math.sqrt(self.var), size=n))

    def power_moment(self, c):
        return math.exp(c * self.mu + 0.5 * c * c * self.var)

    def log_mean(self):
        return self.mu


@dataclass(frozen=True)
class PositiveStable(DistributionSpec):
    """One-sided strictly stable law with E[exp(-uS)] = exp(-u**alpha).

    Sampled with Kanter's representation

        S = sin(a U) / sin(U)**(1/a) * (sin((1-a) U) / E)**((1-a)/a),

    U ~ Uniform(0, pi), E ~ Exp(1).
    """

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("PositiveStable requires 0 < alpha < 1")
        if 1 - self.alpha < 1e-6:
            raise ValueError("alpha within 1e-6 of 1 is numerically unstable; rejected")

    @property
    def support(self):
        return (0.0, math.inf)

    def _draw(self, gen, n):
        a = self.alpha
        u = gen.uniform(0.0, math.pi, size=n)
        e = gen.standard_exponential(n)
        return (np.sin(a * u) / np.sin(u) ** (1 / a)) * (np.sin((1 - a) * u) / e) ** ((1 - a) / a)

    def _lt(self, u):
        return np.exp(-(u ** self.alpha))

    def exp_moment(self, s):
        if s < 0:
            return math.inf
        return math.exp(-(s ** self.alpha))

    def power_moment(self, c):
        if c >= self.alpha:
            return math.inf
        return math.exp(special.gammaln(1 - c / self.alpha) - special.gammaln(1 - c))

    def log_mean(self):
        return (1 / self.alpha - 1) * EULER_GAMMA

    # alpha = 1/2 is the Levy law with scale 1/2
    def pdf(self, x):
        if self.alpha != 0.5:
            return super().pdf(x)
        return _scalar_or_array(x, stats.levy(scale=0.5).pdf(np.asarray(x, float)))

    def cdf(self, x):
        if self.alpha != 0.5:
            return super().cdf(x)
        return _scalar_or_array(x, stats.levy(scale=0.5).cdf(np.asarray(x, float)))


@dataclass(frozen=True)
class InverseGaussian(_ScipyBacked):
    """Law with E[exp(-uX)] = exp(-delta (sqrt(beta**2 + 2u) - beta)).

    Mean delta/beta, shape delta**2. Sampled by the Michael-Schucany-Haas
    transformation with one acceptance step.
    """

    beta: float
    delta: float

    def __post_init__(self):
        if not (self.beta > 0 and self.delta > 0):
            raise ValueError("InverseGaussian requires beta > 0 and delta > 0")

    @property
    def support(self):
        return (0.0, math.inf)

    @property
    def mu(self):
        return self.delta / self.beta

    @property
    def lam(self):
        return self.delta ** 2

    def _frozen(self):
        return stats.invgauss(self.mu / self.lam, scale=self.lam)

    def _draw(self, gen, n):
        mu, lam = self.mu, self.lam
        y = gen.standard_normal(n) ** 2
        x = mu + mu * mu * y / (2 * lam) - mu / (2 * lam) * np.sqrt(4 * mu * lam * y + (mu * y) ** 2)
        z = gen.random(n)
        return np.where(z <= mu / (mu + x), x, mu * mu / x)

    def _lt(self, u):
        return np.exp(-self.delta * (np.sqrt(self.beta ** 2 + 2 * u) - self.beta))

    def exp_moment(self, s):
        if self.beta ** 2 + 2 * s < 0:
            return math.inf
        return math.exp(-self.delta * (math.sqrt(self.beta ** 2 + 2 * s) - self.beta))

    def power_moment(self, c):
        if c == 0:
            return 1.0
        if c == 1:
            return self.mu
        return None


@dataclass(frozen=True)
class ParetoTail(_ScipyBacked):
    """P(X > x) = (x_min / x)**shape for x >= x_min."""

    x_min: float
    shape: float

    def __post_init__(self):
        if not (self.x_min > 0 and self.shape > 0):
            raise ValueError("ParetoTail requires x_min > 0 and shape > 0")

    @property
    def support(self):
        return (self.x_min, math.inf)

    def _frozen(self):
        return stats.pareto(self.shape, scale=self.x_min)

    def _draw(self, gen, n):
        return self.x_min * (1.0 - gen.random(n)) ** (-1.0 / self.shape)

    def power_moment(self, c):
        if c >= self.shape:
            return math.inf
        return self.shape * self.x_min ** c / (self.shape - c)

    def log_mean(self):
        return math.log(self.x_min) + 1.0 / self.shape

    def truncated_mean(self, x):
        if x <= self.x_min:
            return max(x, 0.0)
        a, m = self.shape, self.x_min
        if a == 1:
            return m + m * math.log(x / m)
        return m + m ** a * (x ** (1 - a) - m ** (1 - a)) / (1 - a)


@dataclass(frozen=True)
class SlowLogTail(DistributionSpec):
    """P(Y > y) = min(1, 1/log y): a law without logarithmic moment.

    Sampled as ``exp(1/U)``; draws beyond the float range come back as +inf.
    """

    @property
    def support(self):
        return (math.e, math.inf)

    def _draw(self, gen, n):
        u = 1.0 - gen.random(n)
        with np.errstate(over="ignore"):
            return np.exp(1.0 / u)

    def sf(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > math.e, 1.0 / np.log(np.maximum(x, math.e)), 1.0)
        return _scalar_or_array(x, out)

    def cdf(self, x):
        return _scalar_or_array(x, 1.0 - np.asarray(self.sf(x)))

    def pdf(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(np.maximum(x, math.e))
            out = np.where(x > math.e, 1.0 / (np.maximum(x, math.e) * lx * lx), 0.0)
        return _scalar_or_array(x, out)

    def power_moment(self, c):
        if c > 0:
            return math.inf
        return 1.0 if c == 0 else None

    def log_mean(self):
        return math.inf

    def log_moment_finite(self):
        return False

    def truncated_mean(self, x):
        if x <= math.e:
            return max(x, 0.0)
        return math.e + float(special.expi(math.log(x)) - special.expi(1.0))


# ---------------------------------------------------------------------------
# Discrete laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointMass(DistributionSpec):
    c: float

    @property
    def support(self):
        return (self.c, self.c)

    @property
    def continuous(self):
        return False

    def _draw(self, gen, n):
        return np.full(n, float(self.c))

    def _lt(self, u):
        if self.c < 0:
            return None
        return np.exp(-u * self.c)

    def exp_moment(self, s):
        return math.exp(-s * self.c)

    def power_moment(self, c):
        if self.c > 0:
            return self.c ** c
        if self.c == 0:
            return 0.0 if c > 0 else (1.0 if c == 0 else math.inf)
        return None

    def log_mean(self):
        return math.log(self.c) if self.c > 0 else None

    def mean(self):
        return float(self.c)

    def abs_mean(self):
        return abs(float(self.c))

    def cdf(self, x):
        return _scalar_or_array(x, (np.asarray(x, float) >= self.c).astype(float))

    def sf(self, x):
        return _scalar_or_array(x, (np.asarray(x, float) < self.c).astype(float))

    def truncated_mean(self, x):
        return min(max(self.c, 0.0), max(x, 0.0))


@dataclass(frozen=True)
class DiscreteAtoms(DistributionSpec):
    """Finite mixture of point masses, sum_i weights[i] * delta(values[i])."""

    values: tuple
    weights: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        w = tuple(float(x) for x in self.weights)
        if len(v) == 0 or len(v) != len(w):
            raise ValueError("values and weights must be nonempty and of equal length")
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @property
    def support(self):
        return (min(self.values), max(self.values))

    @property
    def continuous(self):
        return False

    @property
    def positive(self):
        return all(v > 0 for v, w in zip(self.values, self.weights) if w > 0)

    def _draw(self, gen, n):
        return np.asarray(self.values)[gen.choice(len(self.values), size=n, p=self.weights)]

    def _lt(self, u):
        if min(self.values) < 0:
            return None
        v, w = np.asarray(self.values), np.asarray(self.weights)
        return np.sum(w * np.exp(-np.multiply.outer(u, v)), axis=-1)

    def exp_moment(self, s):
        return float(sum(w * math.exp(-s * v) for v, w in zip(self.values, self.weights)))

    def power_moment(self, c):
        if not self.positive and c <= 0:
            return None if c != 0 else 1.0
        return float(sum(w * max(v, 0.0) ** c for v, w in zip(self.values, self.weights)))

    def mean(self):
        return float(np.dot(self.values, self.weights))

    def abs_mean(self):
        return float(np.dot(np.abs(self.values), self.weights))

    def cdf(self, x):
        xa = np.asarray(x, float)
        out = sum(w * (xa >= v) for v, w in zip(self.values, self.weights))
        return _scalar_or_array(x, np.asarray(out, float))

    def sf(self, x):
        return _scalar_or_array(x, 1.0 - np.asarray(self.cdf(x)))

    def truncated_mean(self, x):
        return float(sum(w * min(max(v, 0.0), max(x, 0.0)) for v, w in zip(self.values, self.weights)))


# ---------------------------------------------------------------------------
# Log-ratio of exponentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogRatioExp(DistributionSpec):
    """log(Y1 / Y2) for independent Y_j ~ Exponential(rate_j).

    A logistic law centred at log(rate2 / rate1); for rate1 == rate2 its
    density equals exp(-l x) / (B(l, l) (1 + exp(-x))**(2 l)) with l = 1.
    """

    rate1: float = 1.0
    rate2: float = 1.0

    def __post_init__(self):
        if not (self.rate1 > 0 and self.rate2 > 0):
            raise ValueError("LogRatioExp requires positive rates")

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def loc(self):
        return math.log(self.rate2 / self.rate1)

    def _draw(self, gen, n):
        y1 = gen.exponential(1.0 / self.rate1, size=n)
        y2 = gen.exponential(1.0 / self.rate2, size=n)
        return np.log(y1) - np.log(y2)

    def pdf(self, x):
        return _scalar_or_array(x, stats.logistic(self.loc).pdf(np.asarray(x, float)))

    def cdf(self, x):
        return _scalar_or_array(x, stats.logistic(self.loc).cdf(np.asarray(x, float)))

    def sf(self, x):
        return _scalar_or_array(x, stats.logistic(self.loc).sf(np.asarray(x, float)))

    def exp_moment(self, s):
        # E[(Y2/Y1)**s] = Gamma(1-s) Gamma(1+s) (rate1/rate2)**s
        if abs(s) >= 1:
            return math.inf
        return math.gamma(1 - s) * math.gamma(1 + s) * (self.rate1 / self.rate2) ** s

    def mean(self):
        return self.loc

    def abs_mean(self):
        m = self.loc
        # logistic with unit scale: E|X| = m + 2 log(1 + exp(-m))
        return m + 2 * math.log1p(math.exp(-m)) if m >= 0 else -m + 2 * math.log1p(math.exp(m))


# ---------------------------------------------------------------------------
# Transformed laws
# ---------------------------------------------------------------------------

class Map(NamedTuple):
    name: str
    arg: float | None = None


_MAP_NAMES = ("negexp", "log", "power", "scale", "shift")


def _as_map(m) -> Map:
    if isinstance(m, Map):
        out = m
    elif isinstance(m, str):
        out = Map(m.lower())
    elif isinstance(m, (tuple, list)) and len(m) in (1, 2):
        out = Map(str(m[0]).lower(), None if len(m) == 1 else float(m[1]))
    else:
        raise ValueError(f"cannot interpret {m!r} as a map")
    if out.name not in _MAP_NAMES:
        raise ValueError(f"unknown map {out.name!r}; expected one of {_MAP_NAMES}")
    if out.name in ("power", "scale", "shift") and out.arg is None:
        raise ValueError(f"map {out.name!r} needs an argument")
    if out.name in ("power", "scale") and out.arg == 0:
        raise ValueError(f"{out.name}(0) is degenerate")
    return out


def _apply(m: Map, x):
    if m.name == "negexp":
        return np.exp(-x)
    if m.name == "log":
        return np.log(x)
    if m.name == "power":
        return x ** m.arg
    if m.name == "scale":
        return m.arg * x
    return x + m.arg


def _increasing(m: Map) -> bool:
    if m.name == "negexp":
        return False
    if m.name in ("power", "scale"):
        return m.arg > 0
    return True


def _inverse(m: Map, y):
    """Inverse map with |derivative|; points outside the range get nan."""
    y = np.asarray(y, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if m.name == "negexp":
            x = np.where(y > 0, -np.log(np.where(y > 0, y, 1.0)), np.nan)
            return x, np.where(y > 0, 1.0 / np.where(y > 0, y, 1.0), 0.0)
        if m.name == "log":
            return np.exp(y), np.exp(y)
        if m.name == "power":
            yp = np.where(y > 0, y, np.nan)
            return yp ** (1 / m.arg), np.abs(1 / m.arg) * yp ** (1 / m.arg - 1)
        if m.name == "scale":
            return y / m.arg, np.full_like(y, 1 / abs(m.arg))
        return y - m.arg, np.ones_like(y)


def _map_interval(m: Map, lo: float, hi: float) -> tuple[float, float]:
    with np.errstate(divide="ignore", over="ignore"):
        a, b = float(_apply(m, np.float64(lo))), float(_apply(m, np.float64(hi)))
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Transformed(DistributionSpec):
    """Law of ``map_k(... map_1(base))``; maps compose left to right.

    Maps: ``"negexp"`` (x -> exp(-x)), ``"log"``, ``("power", c)``,
    ``("scale", c)``, ``("shift", c)``. At most three maps; ``log`` and
    ``power`` need an a.s. positive argument, checked at construction.
    """

    base: DistributionSpec
    maps: tuple

    def __post_init__(self):
        maps = tuple(_as_map(m) for m in (self.maps if isinstance(self.maps, (tuple, list)) else (self.maps,)))
        if not 1 <= len(maps) <= MAX_CHAIN:
            raise ValueError(f"Transformed supports 1..{MAX_CHAIN} chained maps, got {len(maps)}")
        if isinstance(self.base, Transformed):
            raise ValueError("nest maps in a single Transformed instead of stacking")
        object.__setattr__(self, "maps", maps)
        cur: DistributionSpec = self.base
        for k, m in enumerate(maps):
            if m.name in ("log", "power") and not cur.positive:
                raise ValueError(f"map {m.name!r} applied to a law that is not a.s. positive ({cur!r})")
            if k < len(maps) - 1:
                cur = _Partial(self.base, maps[: k + 1])

    def _inner(self) -> DistributionSpec:
        return self.base if len(self.maps) == 1 else _Partial(self.base, self.maps[:-1])

    @property
    def last(self) -> Map:
        return self.maps[-1]

    @property
    def support(self):
        lo, hi = self.base.support
        for m in self.maps:
            lo, hi = _map_interval(m, lo, hi)
        return (lo, hi)

    @property
    def continuous(self):
        return self.base.continuous

    @property
    def positive(self):
        name = self.last.name
        if name in ("negexp", "power"):
            return True
        return super().positive

    def _draw(self, gen, n):
        x = self.base._draw(gen, n)
        with np.errstate(over="ignore", divide="ignore"):
            for m in self.maps:
                x = _apply(m, x)
        return x

    def _lt(self, u):
        inner, m = self._inner(), self.last
        if m.name == "scale" and m.arg > 0:
            f = inner._lt(np.asarray(u) * m.arg)
            return f
        if m.name == "shift" and inner.nonnegative:
            f = inner._lt(np.asarray(u))
            return None if f is None else np.exp(-np.asarray(u) * m.arg) * f
        return None

    # cdf/pdf by monotone change of variables
    def cdf(self, y):
        inner, m = self._inner(), self.last
        x, _ = _inverse(m, y)
        with np.errstate(invalid="ignore"):
            inner_val = np.asarray(inner.cdf(np.nan_to_num(x, nan=0.0)) if _increasing(m)
                                   else inner.sf(np.nan_to_num(x, nan=0.0)), float)
        out = np.where(np.isnan(x), 0.0, inner_val)
        return _scalar_or_array(y, out)

    def sf(self, y):
        return _scalar_or_array(y, 1.0 - np.asarray(self.cdf(y)))

    def pdf(self, y):
        inner, m = self._inner(), self.last
        x, jac = _inverse(m, y)
        with np.errstate(invalid="ignore"):
            dens = np.asarray(inner.pdf(np.nan_to_num(x, nan=0.0)), float)
        out = np.where(np.isnan(x), 0.0, dens * jac)
        return _scalar_or_array(y, out)

    # moments
    def exp_moment(self, s):
        if s == 0:
            return 1.0
        inner, m = self._inner(), self.last
        if m.name == "scale":
            return inner.exp_moment(s * m.arg)
        if m.name == "shift":
            v = inner.exp_moment(s)
            return None if v is None else math.exp(-s * m.arg) * v
        if m.name == "log":
            return inner.power_moment(-s)
        return None

    def power_moment(self, c):
        if c == 0:
            return 1.0
        inner, m = self._inner(), self.last
        if m.name == "negexp":
            return inner.exp_moment(c)
        if m.name == "power":
            return inner.power_moment(c * m.arg)
        if m.name == "scale" and m.arg > 0 and inner.positive:
            v = inner.power_moment(c)
            return None if v is None else m.arg ** c * v
        return None

    def log_mean(self):
        inner, m = self._inner(), self.last
        if m.name == "negexp":
            return inner.mean()
        if m.name == "power":
            v = inner.log_mean()
            return None if v is None else m.arg * v
        if m.name == "scale" and m.arg > 0:
            v = inner.log_mean()
            return None if v is None else math.log(m.arg) + v
        return None

    def mean(self):
        inner, m = self._inner(), self.last
        if m.name == "negexp":
            return inner.exp_moment(1.0)
        if m.name == "log":
            return inner.log_mean()
        if m.name == "power":
            return inner.power_moment(m.arg)
        v = inner.mean()
        if v is None:
            return None
        return m.arg * v if m.name == "scale" else v + m.arg

    def abs_mean(self):
        if self.nonnegative:
            return self.mean()
        inner, m = self._inner(), self.last
        if m.name == "scale":
            v = inner.abs_mean()
            return None if v is None else abs(m.arg) * v
        return None

    def log_moment_finite(self):
        inner, m = self._inner(), self.last
        if m.name == "negexp":
            # log+ exp(-X) = (-X)+
            if inner.nonnegative or inner.abs_mean() is not None:
                return True
            return None
        if m.name == "log":
            return True if inner.log_mean() not in (None, math.inf, -math.inf) else None
        if m.name == "power":
            if m.arg > 0:
                return inner.log_moment_finite()
            return True if inner.log_mean() not in (None, math.inf, -math.inf) else None
        return inner.log_moment_finite()

    def truncated_mean(self, x):
        if not self.continuous:
            raise UnsupportedError("truncated mean of a transformed discrete law")
        return super().truncated_mean(x)


class _Partial(Transformed):
    """Intermediate stage of a map chain (skips the chain-length checks)."""

    def __init__(self, base, maps):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "maps", tuple(maps))


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def sample(dist: DistributionSpec, rng: RngStream | int, n: int) -> np.ndarray:
    """``n`` i.i.d. draws from ``dist``; deterministic given the stream."""
    return dist.sample(rng, n)


def laplace(dist: DistributionSpec) -> LaplaceFn:
    """Closed-form Laplace transform; raises :class:`UnsupportedError` otherwise."""
    return dist.laplace()


def density(dist: DistributionSpec, x):
    """Pointwise density value(s)."""
    return dist.pdf(x)


def cdf(dist: DistributionSpec, x):
    return dist.cdf(x)
