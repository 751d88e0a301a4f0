import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from levyexpint.diagnostics import (
    BUILTIN_FUNCTIONS, CheckConfig, PropOutcome, PropertyVerdict, builtin_function, check_c_decomposability,
    check_completely_monotone, check_hcm, ks_test, lambda_sweep, support_bound_check)
from levyexpint.distributions import Exponential, Gamma, Normal, PointMass, PositiveStable
from levyexpint.processes import DependentCPPSpec, InverseGaussianSub
from levyexpint.perpetuity import TruncationPolicy, simulate_dependent
from levyexpint.rng import RngStream
from levyexpint.transforms import EmpiricalLT, compound_geometric_lt

CFG = CheckConfig()
P, F, I = PropOutcome.PASS, PropOutcome.FAIL, PropOutcome.INCONCLUSIVE


def f_power(u):
    return np.asarray(u, float) ** -1.5


def f_exp(u):
    return np.exp(-np.asarray(u, float))


# -- configuration ------------------------------------------------------------------

def test_config_validation():
    for kw in ({"u_grid": (1.0, 0.5)}, {"v_grid": (0.5, 1.0)}, {"diff_order": 1}, {"rel_tol": 1.0},
               {"noise_floor": -1.0}):
        with pytest.raises(ValueError):
            CheckConfig(**kw)


def test_fail_needs_witness():
    with pytest.raises(ValueError):
        PropertyVerdict(F, "no witness")


# -- complete monotonicity ------------------------------------------------------

@pytest.mark.parametrize("f", [f_exp, lambda u: 1 / (1 + u), lambda u: np.exp(-3 * u),
                               lambda u: (1 + 2 * u) ** -0.7, lambda u: 1 / (1 + np.sqrt(u)),
                               builtin_function("kozubowski")])
def test_cm_pass(f):
    v = check_completely_monotone(f, CFG)
    assert v.outcome is P, v
    assert "grid-certified" in v.reason


@pytest.mark.parametrize("f", [builtin_function("gauss"), builtin_function("cos_clipped")])
def test_cm_fail(f):
    v = check_completely_monotone(f, CFG)
    assert v.outcome is F and v.witness and "order" in v.witness


def test_cm_gauss_breaks_at_second_order():
    v = check_completely_monotone(builtin_function("gauss"), CFG)
    assert v.witness["order"] == 2


def test_cm_of_stopped_stable_with_drift_is_laplace_transform():
    # 1/(1+u+sqrt u) is the transform of a probability law, hence CM by Bernstein's theorem
    x = np.geomspace(0.01, 100, 30)
    assert np.all(np.diff(1 / (1 + x + np.sqrt(x))) < 0)
    assert check_completely_monotone(builtin_function("kozubowski"), CFG).passed


def test_empirical_never_fails_when_analytic_passes():
    lt = Gamma(2.0, 1.0).laplace()
    assert check_completely_monotone(lt, CFG).passed
    fails = 0
    for seed in range(20):
        e = EmpiricalLT(Gamma(2.0, 1.0).sample(RngStream(seed), 10**6)).as_laplace_fn()
        fails += check_completely_monotone(e, CheckConfig(u_grid=np.geomspace(0.05, 5, 12))).outcome is F
    assert fails <= 1


# -- HCM -----------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["power", "exp", "gamma", "stable_stopped"])
def test_hcm_pass(name):
    v = check_hcm(builtin_function(name), CFG)
    assert v.outcome is P, v


def test_hcm_fail_gauss():
    v = check_hcm(builtin_function("gauss"), CFG)
    assert v.outcome is F and "u" in v.witness


def test_hcm_stopped_stable_with_drift_passes():
    # f(uv) f(u/v) = 1/(1 + u + u^2 + u w + (sqrt u + u^1.5) sqrt(w + 2)); the denominator is a
    # Bernstein function of w, so g_u is CM and the grid check cannot find a violation
    f = builtin_function("kozubowski")
    v = check_hcm(f, CFG)
    assert v.outcome is P, v
    u, w = 0.7, np.linspace(2, 6, 9)
    vv = (w + np.sqrt(w * w - 4)) / 2
    den = 1 + u + u * u + u * w + (math.sqrt(u) + u ** 1.5) * np.sqrt(w + 2)
    assert np.allclose(f(u * vv) * f(u / vv), 1 / den)


def test_hcm_compound_geometric_fails_for_large_u():
    # with b = 1, p = 1/2 the numerator of g_u turns negative once u > b sqrt(1 - p)
    v = check_hcm(builtin_function("compound_geometric"), CFG)
    assert v.outcome is F, v
    assert v.witness["u"] > math.sqrt(0.5)
    small = CheckConfig(u_grid=np.geomspace(0.01, 0.6, 15))
    assert check_hcm(builtin_function("compound_geometric"), small).outcome is P


def test_compound_geometric_has_atom_at_zero():
    # (1-p)/(1 - p b/(b+u)) -> 1 - p as u -> inf: an atom, which a nondegenerate GGC cannot have
    f = builtin_function("compound_geometric")
    assert f(1e12) == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["power", "exp", "gamma", "stable_stopped", "gauss"]),
       st.floats(0.2, 5.0), st.floats(0.5, 2.0))
def test_hcm_scale_robust(name, kappa, sigma):
    # rescaling the argument shifts the geometric u-grid; keep it inside the default range
    f = builtin_function(name)
    g = lambda u: kappa * f(sigma * np.asarray(u, float))
    assert check_hcm(f, CFG).outcome is check_hcm(g, CFG).outcome


def test_builtin_parameter_validation():
    with pytest.raises(KeyError):
        builtin_function("nope")
    with pytest.raises(ValueError):
        builtin_function("exp", beta=2.0)
    assert set(BUILTIN_FUNCTIONS) >= {"power", "exp", "gamma", "gauss", "kozubowski", "compound_geometric"}


def test_lambda_sweep_rows():
    rows = lambda_sweep(InverseGaussianSub(1.0, 1.0), [0.5, 2.0])
    assert [r["lambda"] for r in rows] == [0.5, 2.0]
    assert "hcm_guarantee_void" in rows[0]["flags"] and not rows[1]["flags"]


# -- c-decomposability ----------------------------------------------------------------

RHO = compound_geometric_lt(0.5, Exponential(1.0).laplace(), PointMass(0.0).laplace())


def test_cdec_trivial():
    v = check_c_decomposability(np.zeros(100), PointMass(0.0).laplace(), math.e, u_grid=(0.5, 1.0))
    assert v.outcome is P


def test_cdec_dependent_model():
    spec = DependentCPPSpec(1.0, 0.5, Exponential(1.0), PointMass(0.0))
    x = simulate_dependent(spec, TruncationPolicy(), RngStream(1), 10**6)
    assert check_c_decomposability(x, RHO, math.e, u_grid=(0.5, 1.0, 2.0)).outcome is P


def test_cdec_rejects_exponential():
    x = Exponential(1.0).sample(RngStream(2), 10**5)
    v = check_c_decomposability(x, RHO, math.e, u_grid=(0.5, 1.0, 2.0))
    assert v.outcome is F and v.witness


# -- KS and support ------------------------------------------------------------------------

def test_ks_null_case():
    x = Exponential(1.0).sample(RngStream(3), 10**4)
    stat, v = ks_test(x, stats.expon.cdf)
    assert v.outcome is P and stat <= 1.63 / 100


def test_ks_small_n_inconclusive():
    assert ks_test([0.1, 0.2], stats.expon.cdf)[1].outcome is I


def test_ks_detects_wrong_law():
    x = Exponential(1.0).sample(RngStream(4), 10**4)
    assert ks_test(x, stats.expon(scale=1.2).cdf)[1].outcome is F


def test_ks_f_distribution():
    from levyexpint.processes import StableSubordinator, sample_stopped
    from levyexpint.distributions import HalfNormal
    x = sample_stopped(StableSubordinator(0.5, scale=math.sqrt(2)), HalfNormal(), RngStream(5), 10**5)
    _, v = ks_test(x, lambda t: 2 / math.pi * np.arctan(np.sqrt(t)))
    assert v.outcome is P


def test_support_checks():
    assert support_bound_check(Gamma(1, 1).sample(RngStream(6), 1000), 0.0).outcome is P
    v = support_bound_check(Normal().sample(RngStream(7), 1000), lower=0.0)
    assert v.outcome is F and v.witness["value"] < 0


def test_stable_laplace_is_hcm():
    assert check_hcm(PositiveStable(0.5).laplace(), CFG).outcome is P
