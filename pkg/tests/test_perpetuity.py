import math

import numpy as np
import pytest
from scipy import stats

from levyexpint.distributions import DiscreteAtoms, Exponential, Gamma, PointMass, Transformed
from levyexpint.errors import NotConvergentError, TruncationError, UnsupportedError
from levyexpint.processes import (BrownianWithDrift, CompoundPoisson, CompoundSumSpec, DependentCPPSpec,
                                  Deterministic, StableSubordinator)
from levyexpint.perpetuity import (Dependent, EtaCompoundSum, IndepLevy, TruncationPolicy, XiCompoundSum,
                                   fixed_point_residual, simulate_dependent, simulate_perpetuity, simulate_V,
                                   truncation_bound)
from levyexpint.rng import RngStream
from levyexpint.transforms import compound_geometric_lt, decomposability_product_lt, empirical_laplace

POL = TruncationPolicy()


def mean_se(x):
    return x.mean(), x.std(ddof=1) / math.sqrt(x.size)


# -- truncation bound ------------------------------------------------------------

def test_truncation_bound_values():
    assert truncation_bound(0.5, 1.0, 0) == 1.0
    assert truncation_bound(0.0, 3.0, 5) == 0.0
    assert truncation_bound(0.5, 2.0, 9) == pytest.approx(2 ** -8)


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(eps=0)
    with pytest.raises(ValueError):
        TruncationPolicy(n_max=0)


# -- generic perpetuity -----------------------------------------------------------------

def test_zero_A_returns_first_B():
    assert np.all(simulate_perpetuity(PointMass(0.0), PointMass(3.0), POL, RngStream(1), size=5) == 3.0)
    z = simulate_perpetuity(PointMass(0.0), Exponential(1.0), POL, RngStream(1), size=10**5)
    assert stats.kstest(z, stats.expon.cdf).pvalue > 0.01


def test_geometric_series():
    z = simulate_perpetuity(PointMass(0.5), PointMass(1.0), POL, RngStream(2))
    assert abs(z - 2.0) <= POL.eps


def test_fixed_point_mean():
    a = Transformed(Exponential(1.0), ("negexp",))
    z = simulate_perpetuity(a, PointMass(1.0), POL, RngStream(3), size=10**5)
    m, se = mean_se(z)
    assert abs(m - 2.0) <= 4 * se


def test_truncation_cap():
    with pytest.raises(TruncationError):
        simulate_perpetuity(PointMass(0.999), PointMass(1.0), TruncationPolicy(n_max=10), RngStream(4))


# -- model engine -------------------------------------------------------------------

def test_dufresne_mean_and_law():
    model = IndepLevy(BrownianWithDrift(1.0, 2.0), Deterministic(1.0))
    x, s = simulate_V(model, POL, RngStream(5), 10**5)
    assert abs(s.mean - 2 / 3) <= 5 * s.stderr
    assert stats.kstest(x, stats.invgamma(4, scale=2).cdf).statistic <= 1.63 / math.sqrt(x.size)


def test_dufresne_discretized_oracle_agrees():
    model = IndepLevy(BrownianWithDrift(1.0, 2.0), Deterministic(1.0))
    _, s = simulate_V(model, POL, RngStream(6), 20000)
    _, o = simulate_V(model, POL, RngStream(7), 4000, method="discretized")
    assert abs(s.mean - o.mean) <= 5 * math.hypot(s.stderr, o.stderr)


def test_samorodnitsky_support():
    model = IndepLevy(CompoundPoisson(1.0, Exponential(1.0), drift=2.0), Deterministic(1.0))
    x, s = simulate_V(model, TruncationPolicy(eps=1e-10), RngStream(8), 10**5)
    assert x.max() <= 0.5 + s.bias_bound
    assert 0.4 < x.max() <= 0.5 + s.bias_bound and x.min() > 0


def test_two_code_paths_agree():
    # jumps of size log 2 at rate 1 against dt is the perpetuity A = 1/2, B ~ Exp(1)
    model = IndepLevy(CompoundPoisson(1.0, PointMass(math.log(2.0))), Deterministic(1.0))
    _, s = simulate_V(model, POL, RngStream(9), 10**5)
    z = simulate_perpetuity(PointMass(0.5), Exponential(1.0), POL, RngStream(10), size=10**5)
    m, se = mean_se(z)
    assert abs(s.mean - m) <= 4 * math.hypot(s.stderr, se)
    assert abs(m - 2.0) <= 4 * se


def test_eta_compound_mean():
    # V = sum_k exp(-xi_{T_k}) Y_k with T_k = k, Y ~ Exp(1), xi = t: E V = e^{-1}/(1 - e^{-1})
    model = EtaCompoundSum(Deterministic(1.0), CompoundSumSpec(PointMass(1.0), Exponential(1.0)))
    _, s = simulate_V(model, POL, RngStream(11), 10**5)
    assert abs(s.mean - 1 / (math.e - 1)) <= 4 * s.stderr


def test_xi_compound_mean():
    # unit waits, unit jumps, eta = t: V = sum_k e^{-k} = e/(e-1)
    model = XiCompoundSum(CompoundSumSpec(PointMass(1.0), PointMass(1.0)), Deterministic(1.0))
    _, s = simulate_V(model, POL, RngStream(12), 100)
    assert s.mean == pytest.approx(math.e / (math.e - 1), abs=1e-7)


def test_refuses_divergent_unless_forced():
    model = IndepLevy(Deterministic(-1.0), Deterministic(1.0))
    with pytest.raises(NotConvergentError):
        simulate_V(model, POL, RngStream(13), 10)


def test_unsupported_combination():
    with pytest.raises(UnsupportedError):
        simulate_V(IndepLevy(StableSubordinator(0.5), StableSubordinator(0.5)), POL, RngStream(14), 10)


def test_positivity_for_subordinator_eta():
    model = EtaCompoundSum(BrownianWithDrift(1.0, 1.0), CompoundSumSpec(PointMass(1.0), Gamma(2.0, 1.0)))
    x, _ = simulate_V(model, POL, RngStream(15), 10**4)
    assert np.all(x >= 0)


def test_halving_eps_is_stable():
    model = EtaCompoundSum(BrownianWithDrift(1.0, 1.0), CompoundSumSpec(PointMass(1.0), Gamma(2.0, 1.0)))
    eps = 1e-4
    _, a = simulate_V(model, TruncationPolicy(eps=eps), RngStream(16), 10**5)
    _, b = simulate_V(model, TruncationPolicy(eps=eps / 10), RngStream(17), 10**5)
    assert abs(a.mean - b.mean) < eps + 4 * math.hypot(a.stderr, b.stderr)


@pytest.mark.parametrize("workers", [1, 3])
def test_deterministic_given_workers(workers):
    model = IndepLevy(BrownianWithDrift(1.0, 2.0), Deterministic(1.0))
    x1, _ = simulate_V(model, POL, RngStream(18), 1000, workers=workers)
    x2, _ = simulate_V(model, POL, RngStream(18), 1000, workers=workers)
    assert np.array_equal(x1, x2)


# -- dependent model ------------------------------------------------------------

EX = DependentCPPSpec(1.0, 0.5, Exponential(1.0), PointMass(0.0))


def test_dependent_small_p_limit():
    spec = DependentCPPSpec(1.0, 1e-9, Exponential(1.0), PointMass(1.0))
    x = simulate_dependent(spec, TruncationPolicy(eps=1e-10), RngStream(19), 1000)
    assert np.median(x) == pytest.approx(math.e / (math.e - 1), abs=1e-9)


def test_dependent_lt_matches_product():
    x = simulate_dependent(EX, POL, RngStream(20), 10**6)
    rho = compound_geometric_lt(0.5, Exponential(1.0).laplace(), PointMass(0.0).laplace())
    prod = decomposability_product_lt(rho, math.e)
    for u in (0.5, 1.0, 2.0):
        est, se = empirical_laplace(x, u)
        assert abs(est - prod(u)) <= 4 * se, u


def test_dependent_mean():
    x, s = simulate_V(Dependent(EX), POL, RngStream(21), 10**5)
    # E R = p/(1-p) * 1 + 0 = 1, E V = e/(e-1)
    assert abs(s.mean - math.e / (math.e - 1)) <= 4 * s.stderr


def test_lattice_support():
    # u = v = w: p = 1/3, rho0 = delta_1, rho1 = (delta_0 + delta_1)/2; with c = 2, V 2^N is an integer
    spec = DependentCPPSpec(1.0, 1 / 3, PointMass(1.0), DiscreteAtoms((0.0, 1.0), (0.5, 0.5)), log_scale=2.0)
    x, s = simulate_V(Dependent(spec), TruncationPolicy(eps=1e-6), RngStream(22), 5000)
    N = s.terms - 1
    scaled = x * 2.0 ** N
    assert np.allclose(scaled, np.round(scaled), atol=1e-6)
    assert np.all(x >= 0)


# -- fixed point ----------------------------------------------------------------

@pytest.mark.parametrize("u", [0.5, 1.0, 2.0])
def test_fixed_point_identity(u):
    z = simulate_perpetuity(PointMass(0.5), Exponential(1.0), POL, RngStream(23), size=10**5)
    r = fixed_point_residual(z, PointMass(0.5), Exponential(1.0), u, RngStream(24))
    assert r["ok"], r


def test_fixed_point_detects_wrong_law():
    z = Exponential(0.5).sample(RngStream(25), 10**5)   # right mean, wrong law
    r = fixed_point_residual(z, PointMass(0.5), Exponential(1.0), 1.0, RngStream(26))
    assert not r["ok"], r
