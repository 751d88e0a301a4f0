"""Laplace-transform algebra: empirical estimates, compound-geometric laws,
infinite decomposability products and the geometric Levy measure."""

from __future__ import annotations

import math
import threading

import numpy as np

from .distributions import LaplaceFn
from .errors import UnsupportedError

__all__ = [
    "empirical_laplace", "EmpiricalLT", "compound_geometric_lt", "decomposability_product_lt",
    "geometric_levy_measure", "geometric_pgf_oracle", "certify_geometric_levy_measure",
]

EXP_GUARD = 700.0


def _check_overflow(x: np.ndarray, u: float) -> None:
    if x.size and np.isfinite(x).any() and u * np.nanmin(x) < -EXP_GUARD:
        raise OverflowError(f"exp(-u*x) overflows at u={u!r} (u*min(x) = {u * np.nanmin(x):.4g})")


def empirical_laplace(samples, u: float) -> tuple[float, float]:
    """Estimate E[exp(-uX)] and its standard error from ``samples``.

    Infinite nonnegative samples contribute exp(-inf) = 0 for u > 0.

    Returns
    -------
    (estimate, stderr)
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empirical_laplace needs at least one sample")
    u = float(u)
    if not u >= 0:
        raise ValueError("u must be >= 0")
    if u == 0:
        return 1.0, 0.0
    _check_overflow(x, u)
    z = np.exp(-u * x)
    if x.size == 1:
        return float(z[0]), 0.0
    return float(z.mean()), float(z.std(ddof=1) / math.sqrt(x.size))


class EmpiricalLT:
    """Empirical Laplace transform of a fixed sample with a per-u cache.

    Evaluating at an array of ``u`` returns arrays. :meth:`as_laplace_fn`
    wraps the estimator as an empirical :class:`LaplaceFn`.
    """

    def __init__(self, samples):
        self.samples = np.asarray(samples, dtype=float).ravel()
        if self.samples.size == 0:
            raise ValueError("EmpiricalLT needs at least one sample")
        self._cache: dict[float, tuple[float, float]] = {}
        self._lock = threading.Lock()

    @property
    def n(self) -> int:
        return self.samples.size

    def _get(self, u: float) -> tuple[float, float]:
        u = float(u)
        hit = self._cache.get(u)
        if hit is None:
            hit = empirical_laplace(self.samples, u)
            with self._lock:
                self._cache.setdefault(u, hit)
        return hit

    def estimate(self, u):
        if np.ndim(u) == 0:
            return self._get(u)[0]
        return np.array([self._get(v)[0] for v in np.ravel(u)]).reshape(np.shape(u))

    __call__ = estimate

    def stderr(self, u):
        if np.ndim(u) == 0:
            return self._get(u)[1]
        return np.array([self._get(v)[1] for v in np.ravel(u)]).reshape(np.shape(u))

    def as_laplace_fn(self, label: str = "empirical") -> LaplaceFn:
        finite = self.samples[np.isfinite(self.samples)]
        mean = float(finite.mean()) if finite.size == self.samples.size else None
        return LaplaceFn(self.estimate, "empirical", stderr_func=self.stderr, mean=mean, label=label)


def compound_geometric_lt(p: float, lt0: LaplaceFn, lt1: LaplaceFn) -> LaplaceFn:
    """Laplace transform (1-p) L1(u) / (1 - p L0(u)) of S_0 + ... + S_M + S'
    with M geometric (P(M = k) = (1-p) p**k), S_i ~ L0 and S' ~ L1."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    for lt in (lt0, lt1):
        if lt.kind != "analytic":
            raise ValueError("compound_geometric_lt composes analytic transforms only")

    def func(u):
        return (1 - p) * np.asarray(lt1(u)) / (1 - p * np.asarray(lt0(u)))

    mean = None
    if lt0.mean is not None and lt1.mean is not None:
        mean = p / (1 - p) * lt0.mean + lt1.mean
    return LaplaceFn(func, "analytic", mean=mean,
                     label=f"compound-geometric(p={p}; {lt0.label}; {lt1.label})",
                     flags=lt0.flags | lt1.flags)


def decomposability_product_lt(lt_rho: LaplaceFn, c: float, tol: float = 1e-10,
                               mean: float | None = None) -> LaplaceFn:
    """Truncated product u -> prod_{n=0}^{N} L_rho(c**-n u).

    Since -log L_rho(v) <= m v (Jensen), the neglected factors shift the log
    of the product by at most sum_{n>N} m c**-n u = m u c**-N / (c - 1);
    N is the smallest integer making this at most ``tol``.

    Parameters
    ----------
    mean : float, optional
        Upper bound on the mean of rho; defaults to ``lt_rho.mean``.
    """
    if not c > 1:
        raise ValueError("c must exceed 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = lt_rho.mean if mean is None else mean
    if m is None or not math.isfinite(m):
        raise UnsupportedError("decomposability_product_lt needs a finite mean bound for rho")
    m = max(float(m), 0.0)

    def n_terms(u_max: float) -> int:
        if m == 0 or u_max == 0:
            return 0
        # m u c^{-N}/(c-1) <= tol
        return max(0, math.ceil(math.log(m * u_max / ((c - 1) * tol)) / math.log(c)))

    def func(u):
        ua = np.asarray(u, dtype=float)
        big = float(np.max(ua)) if ua.size else 0.0
        N = n_terms(big)
        powers = c ** -np.arange(N + 1, dtype=float)
        vals = np.asarray(lt_rho(np.multiply.outer(ua, powers)), dtype=float)
        return np.prod(vals, axis=-1)

    mean_mu = m * c / (c - 1) if lt_rho.mean is not None else None
    return LaplaceFn(func, "analytic", mean=mean_mu,
                     label=f"decomposability-product(c={c:g}; {lt_rho.label})", flags=lt_rho.flags)


# ---------------------------------------------------------------------------
# Geometric law as compound Poisson
# ---------------------------------------------------------------------------

def geometric_levy_measure(p: float, k: int, form: str = "canonical") -> float:
    """Levy-measure weight of the geometric law P(M = j) = (1-p) p**j at atom k.

    form="canonical"  : p**k / k (the log-series weights; total mass -log(1-p))
    form="printed"    : -(1/log(1-p)) * p**(k+1) / (k+1), an alternative
                        normalised shifted form kept for comparison.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    if form in ("canonical", "standard"):
        return p ** k / k
    if form == "printed":
        return -(1.0 / math.log1p(-p)) * p ** (k + 1) / (k + 1)
    raise ValueError(f"unknown form {form!r}")


def geometric_pgf_oracle(p: float, z: float, form: str = "canonical", kmax: int = 200,
                         total_mass: float | None = None) -> float:
    """exp(sum_{k<=kmax} w_k (z**k - 1)) for weights w_k of the given form.

    ``total_mass`` rescales the weights to that total (defaults to the
    compound-Poisson rate -log(1-p) for the printed form, which is a
    normalised probability vector; canonical weights are used as is).
    """
    ks = np.arange(1, kmax + 1)
    w = np.array([geometric_levy_measure(p, int(k), form) for k in ks])
    if total_mass is None and form == "printed":
        total_mass = -math.log1p(-p)
    if total_mass is not None:
        w = w * (total_mass / w.sum())
    return float(math.exp(np.sum(w * (z ** ks - 1.0))))


def certify_geometric_levy_measure(ps=(0.1, 0.3, 0.5), zs=(0.2, 0.5, 0.9), tol: float = 1e-10) -> dict:
    """Compare both weight forms against the geometric PGF (1-p)/(1-pz).

    Returns a dict with the maximal error per form and the name of the form
    certified (error <= tol everywhere), or None when neither passes.
    """
    errors = {}
    for form in ("canonical", "printed"):
        errs = [abs(geometric_pgf_oracle(p, z, form) - (1 - p) / (1 - p * z)) for p in ps for z in zs]
        errors[form] = max(errs)
    certified = [f for f, e in errors.items() if e <= tol]
    return {"max_error": errors, "certified": certified[0] if certified else None, "tol": tol}
