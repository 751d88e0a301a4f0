"""Numerical verifiers for distribution-class properties.

Complete monotonicity is tested through signed, normalised divided
differences on a finite grid; hyperbolic complete monotonicity reduces to
it through w = v + 1/v. Grid verdicts are evidence, not proofs, and their
reasons say so ("grid-certified").
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .distributions import LaplaceFn

__all__ = [
    "PropOutcome", "PropertyVerdict", "CheckConfig", "default_u_grid",
    "check_completely_monotone", "check_hcm", "check_c_decomposability", "ks_test",
    "support_bound_check", "BUILTIN_FUNCTIONS", "builtin_function", "lambda_sweep",
]

DEFAULT_V_GRID = (1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0)
KS_CRIT_01 = 1.63


def default_u_grid(lo: float = 0.01, hi: float = 100.0, ratio: float = 1.25) -> tuple:
    k = int(math.floor(math.log(hi / lo) / math.log(ratio) + 1e-9))
    return tuple(lo * ratio ** i for i in range(k + 1))


class PropOutcome(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class PropertyVerdict:
    outcome: PropOutcome
    reason: str = ""
    witness: dict | None = None

    def __post_init__(self):
        if self.outcome is PropOutcome.FAIL and not self.witness:
            raise ValueError("a Fail verdict needs a witness")

    @property
    def passed(self) -> bool:
        return self.outcome is PropOutcome.PASS

    def to_dict(self) -> dict:
        return {"outcome": self.outcome.value, "reason": self.reason, "witness": self.witness}


@dataclass(frozen=True)
class CheckConfig:
    """Grids and tolerances shared by the checks.

    Parameters
    ----------
    u_grid : strictly increasing positive grid (default: ratio 1.25 from 0.01 to 100)
    v_grid : strictly increasing grid in [1, inf) inducing the w-grid of the HCM check
    diff_order : highest divided-difference order, 2..8
    rel_tol : tolerance relative to max|f| on the grid
    noise_floor : absolute slack for empirical inputs
    """

    u_grid: tuple = field(default_factory=default_u_grid)
    v_grid: tuple = DEFAULT_V_GRID
    diff_order: int = 6
    rel_tol: float = 1e-6
    noise_floor: float = 0.0

    def __post_init__(self):
        u = tuple(float(x) for x in self.u_grid)
        v = tuple(float(x) for x in self.v_grid)
        object.__setattr__(self, "u_grid", u)
        object.__setattr__(self, "v_grid", v)
        if not u or min(u) <= 0 or any(b <= a for a, b in zip(u, u[1:])):
            raise ValueError("u_grid must be nonempty, positive and strictly increasing")
        if not v or min(v) < 1 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("v_grid must be nonempty, >= 1 and strictly increasing")
        if not 2 <= int(self.diff_order) <= 8:
            raise ValueError("diff_order must lie in [2, 8]")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if not self.noise_floor >= 0:
            raise ValueError("noise_floor must be nonnegative")


# ---------------------------------------------------------------------------
# complete monotonicity
# ---------------------------------------------------------------------------

def _evaluate(f, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(x), dtype=float)
        if out.shape == x.shape:
            return out
    except Exception:
        pass
    return np.array([float(f(float(t))) for t in x])


def _extend(grid: np.ndarray, k: int) -> np.ndarray:
    """Append k points continuing the last spacing ratio of ``grid``."""
    if grid.size < 2:
        raise ValueError("grid too short: need at least two points to extend it")
    ratio = grid[-1] / grid[-2]
    return np.concatenate([grid, grid[-1] * ratio ** np.arange(1, k + 1)])


def _normalised_differences(x: np.ndarray, y: np.ndarray, order: int) -> list[np.ndarray]:
    """N_j[i] = f[x_i..x_{i+j}] / sum_k |w_k|, j = 1..order.

    f[x_i..x_{i+j}] = sum_k w_k f(x_k) with w_k = 1/prod_{l != k}(x_k - x_l);
    the normalisation keeps every N_j on the scale of f itself.
    """
    out = []
    n = x.size
    for j in range(1, order + 1):
        vals = np.empty(n - j)
        for i in range(n - j):
            xs = x[i:i + j + 1]
            diff = xs[:, None] - xs[None, :]
            np.fill_diagonal(diff, 1.0)
            w = 1.0 / np.prod(diff, axis=1)
            s = np.sum(np.abs(w))
            vals[i] = np.dot(w / s, y[i:i + j + 1])
        out.append(vals)
    return out


def _cm_on_grid(x: np.ndarray, y: np.ndarray, n_anchor: int, cfg: CheckConfig, noise: float,
                where: dict | None = None) -> PropertyVerdict:
    if x.size < cfg.diff_order + 1:
        raise ValueError("grid too short for diff_order")
    if not np.all(np.isfinite(y)):
        bad = int(np.argmax(~np.isfinite(y)))
        return PropertyVerdict(PropOutcome.FAIL, "function is not finite on the grid",
                               {**(where or {}), "x": float(x[bad]), "value": float(y[bad])})
    if np.any(y < 0):
        bad = int(np.argmax(y < 0))
        return PropertyVerdict(PropOutcome.FAIL, "function is negative on the grid",
                               {**(where or {}), "order": 0, "x": float(x[bad]), "value": float(y[bad]),
                                "threshold": 0.0})
    tol = cfg.rel_tol * float(np.max(np.abs(y)))
    soft = None
    for j, N in enumerate(_normalised_differences(x, y, cfg.diff_order), start=1):
        s = (-1) ** j * N[:n_anchor]
        for i in np.flatnonzero(s < -tol):
            wit = {**(where or {}), "order": j, "x": float(x[i]), "value": float(s[i]),
                   "threshold": -tol - noise}
            if s[i] < -tol - noise:
                return PropertyVerdict(PropOutcome.FAIL, f"sign violation at order {j} (grid-certified)", wit)
            if soft is None:
                soft = wit
    if soft is not None:
        return PropertyVerdict(PropOutcome.INCONCLUSIVE,
                               "sign violations only within the noise floor", soft)
    return PropertyVerdict(PropOutcome.PASS,
                           f"grid-certified: alternating signs up to order {cfg.diff_order}")


def _noise_for(f, x: np.ndarray, cfg: CheckConfig) -> float:
    if isinstance(f, LaplaceFn) and f.kind == "empirical":
        se = np.asarray(f.stderr(x), float)
        return max(cfg.noise_floor, 4.0 * float(np.max(se)))
    return cfg.noise_floor


def check_completely_monotone(f, cfg: CheckConfig | None = None) -> PropertyVerdict:
    """Grid test of complete monotonicity of ``f`` on cfg.u_grid.

    The grid is extended by ``diff_order`` points at the same ratio so that
    every anchor carries differences of all orders. A violation beyond
    rel_tol * max|f| + noise floor is a Fail; violations inside the noise
    floor only give Inconclusive. Empirical transforms use a noise floor of
    at least 4 * max stderr.
    """
    cfg = cfg or CheckConfig()
    x = _extend(np.asarray(cfg.u_grid), cfg.diff_order)
    y = _evaluate(f, x)
    return _cm_on_grid(x, y, len(cfg.u_grid), cfg, _noise_for(f, x, cfg))


def check_hcm(f, cfg: CheckConfig | None = None) -> PropertyVerdict:
    """Grid test of hyperbolic complete monotonicity.

    For every u in cfg.u_grid, g_u(w) = f(u v) f(u / v) with w = v + 1/v is
    checked for complete monotonicity on the w-grid induced by cfg.v_grid
    (extended by ``diff_order`` points).
    """
    cfg = cfg or CheckConfig()
    v = np.asarray(cfg.v_grid)
    w = v + 1.0 / v
    if w.size < 2:
        raise ValueError("v_grid too short")
    w = _extend(w, cfg.diff_order)
    vv = (w + np.sqrt(np.maximum(w * w - 4.0, 0.0))) / 2.0
    for u in cfg.u_grid:
        g = _evaluate(f, u * vv) * _evaluate(f, u / vv)
        res = _cm_on_grid(w, g, v.size, cfg, cfg.noise_floor, where={"u": float(u)})
        if res.outcome is not PropOutcome.PASS:
            if res.witness is not None:
                res.witness.setdefault("u", float(u))
            return res
    return PropertyVerdict(PropOutcome.PASS,
                           f"grid-certified: f(uv)f(u/v) passes the CM check for all {len(cfg.u_grid)} u")


# ---------------------------------------------------------------------------
# decomposability, goodness of fit, support
# ---------------------------------------------------------------------------

def check_c_decomposability(samples, rho_lt, c: float, cfg: CheckConfig | None = None,
                            u_grid=None) -> PropertyVerdict:
    """Residual test of L_mu(u) = L_mu(u/c) L_rho(u) on an MC sample of mu.

    With Z_i = exp(-u X_i) - L_rho(u) exp(-u X_i / c), the residual is the
    mean of Z and its standard error sd(Z)/sqrt(n); an empirical rho adds
    L_mu(u/c) * stderr_rho(u) in quadrature.
    """
    if not c > 1:
        raise ValueError("c must exceed 1")
    cfg = cfg or CheckConfig()
    x = np.asarray(samples, float).ravel()
    n = x.size
    grid = cfg.u_grid if u_grid is None else tuple(float(u) for u in u_grid)
    worst = None
    rows = []
    for u in grid:
        r_u = float(rho_lt(u))
        e1, e2 = np.exp(-u * x), np.exp(-u * x / c)
        z = e1 - r_u * e2
        res = float(z.mean())
        se = float(z.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        if isinstance(rho_lt, LaplaceFn) and rho_lt.kind == "empirical":
            se = math.hypot(se, float(e2.mean()) * float(rho_lt.stderr(u)))
        band = 4 * se + cfg.rel_tol
        rows.append({"u": u, "residual": res, "stderr": se, "band": band})
        if abs(res) > band and (worst is None or abs(res) / band > worst["ratio"]):
            worst = {"u": u, "residual": res, "threshold": band, "ratio": abs(res) / band}
    if worst is not None:
        return PropertyVerdict(PropOutcome.FAIL, "functional-equation residual exceeds its band", worst)
    return PropertyVerdict(PropOutcome.PASS, "residual within 4 stderr on every u", {"rows": rows})


def ks_test(samples, cdf: Callable) -> tuple[float, PropertyVerdict]:
    """One-sample KS statistic and verdict at level 0.01 (critical value 1.63/sqrt(n))."""
    x = np.asarray(samples, float).ravel()
    n = x.size
    if n < 100:
        return math.nan, PropertyVerdict(PropOutcome.INCONCLUSIVE,
                                         f"n = {n} < 100; asymptotic critical value not valid")
    stat = float(stats.kstest(x, cdf).statistic)
    crit = KS_CRIT_01 / math.sqrt(n)
    wit = {"statistic": stat, "critical": crit, "n": n}
    if stat <= crit:
        return stat, PropertyVerdict(PropOutcome.PASS, "KS statistic below the 0.01 critical value", wit)
    return stat, PropertyVerdict(PropOutcome.FAIL, "KS statistic above the 0.01 critical value", wit)


def support_bound_check(samples, lower: float = -math.inf, upper: float = math.inf,
                        eps_trunc: float = 0.0) -> PropertyVerdict:
    """Pass iff every sample lies in [lower - eps_trunc, upper + eps_trunc]."""
    x = np.asarray(samples, float).ravel()
    lo, hi = lower - eps_trunc, upper + eps_trunc
    bad = np.isnan(x) | (x < lo) | (x > hi)
    if bad.any():
        i = int(np.argmax(bad))
        return PropertyVerdict(PropOutcome.FAIL, "sample outside the declared support",
                               {"index": i, "value": float(x[i]), "lower": lo, "upper": hi,
                                "count": int(bad.sum())})
    return PropertyVerdict(PropOutcome.PASS, "all samples inside the declared support",
                           {"min": float(x.min()), "max": float(x.max()), "lower": lo, "upper": hi})


# ---------------------------------------------------------------------------
# builtin functions for the command line
# ---------------------------------------------------------------------------

def _kozubowski(alpha=0.5, drift=1.0, lam=1.0):
    return lambda u: lam / (lam + drift * u + np.asarray(u, float) ** alpha)


BUILTIN_FUNCTIONS: dict[str, tuple[Callable, dict, str]] = {
    "power": (lambda beta=-1.5: (lambda u: np.asarray(u, float) ** beta), {"beta": -1.5}, "u**beta"),
    "exp": (lambda c=1.0: (lambda u: np.exp(-c * np.asarray(u, float))), {"c": 1.0}, "exp(-c u)"),
    "gamma": (lambda c=1.0, alpha=2.0: (lambda u: (1 + c * np.asarray(u, float)) ** -alpha),
              {"c": 1.0, "alpha": 2.0}, "(1 + c u)**-alpha"),
    "stable_stopped": (lambda alpha=0.5, lam=1.0: _kozubowski(alpha, 0.0, lam),
                       {"alpha": 0.5, "lam": 1.0}, "lam / (lam + u**alpha)"),
    "kozubowski": (_kozubowski, {"alpha": 0.5, "drift": 1.0, "lam": 1.0},
                   "lam / (lam + drift u + u**alpha)"),
    "gauss": (lambda: (lambda u: np.exp(-np.square(np.asarray(u, float)))), {}, "exp(-u**2)"),
    "cos_clipped": (lambda: (lambda u: np.maximum(np.cos(np.asarray(u, float)), 0.0)), {},
                    "max(cos u, 0)"),
    "compound_geometric": (lambda p=0.5, b=1.0: (lambda u: (1 - p) / (1 - p * b / (b + np.asarray(u, float)))),
                           {"p": 0.5, "b": 1.0}, "(1-p) / (1 - p b/(b+u))"),
}


def builtin_function(name: str, **params) -> Callable:
    """Instantiate a named test function; unknown parameters raise."""
    if name not in BUILTIN_FUNCTIONS:
        raise KeyError(f"unknown builtin function {name!r}; choose from {sorted(BUILTIN_FUNCTIONS)}")
    make, defaults, _ = BUILTIN_FUNCTIONS[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {name!r}; allowed {sorted(defaults)}")
    return make(**{**defaults, **params})


def lambda_sweep(proc, lambdas, cfg: CheckConfig | None = None) -> list[dict]:
    """HCM verdicts of lam / (lam + phi(u)) for a subordinator over a range of rates.

    Exploratory: no outcome is expected a priori.
    """
    from .distributions import Exponential
    from .processes import stopped_laplace
    out = []
    for lam in lambdas:
        lt = stopped_laplace(proc, Exponential(float(lam)))
        v = check_hcm(lt, cfg)
        out.append({"lambda": float(lam), "outcome": v.outcome.value, "flags": sorted(lt.flags),
                    "witness": v.witness})
    return out
