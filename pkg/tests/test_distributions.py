import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from conftest import U_GRID, lt_within
from levyexpint.diagnostics import CheckConfig, check_completely_monotone
from levyexpint.distributions import (
    DiscreteAtoms, Exponential, Gamma, HalfNormal, InverseGaussian, LogNormal, LogRatioExp, Normal,
    ParetoTail, PointMass, PositiveStable, SlowLogTail, Transformed, density, laplace, sample)
from levyexpint.errors import UnsupportedError
from levyexpint.rng import RngStream

CLOSED_FORM = [Gamma(1.0, 2.0), Gamma(2.5, 1.0), Exponential(1.0), HalfNormal(), PositiveStable(0.5),
               PositiveStable(0.3), InverseGaussian(1.0, 1.0), PointMass(0.7),
               DiscreteAtoms((0.0, 1.0), (0.5, 0.5)), Transformed(Gamma(2.0, 1.0), (("scale", 2.0),))]


# -- oracles ----------------------------------------------------------------

def test_point_mass_draws():
    assert sample(PointMass(3.0), 0, 2).tolist() == [3.0, 3.0]


def test_gamma_mean():
    x = sample(Gamma(1.0, 2.0), RngStream(1), 10**6)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - 0.5) <= 3 * se


def test_stable_lt_at_one():
    x = sample(PositiveStable(0.5), RngStream(2), 10**6)
    ok, est, se = lt_within(x, 1.0, math.exp(-1.0), k=3)
    assert ok, (est, se)


def test_gamma_lt_value():
    assert laplace(Gamma(1.0, 2.0))(2.0) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("d", CLOSED_FORM, ids=repr)
def test_lt_at_zero_is_one(d):
    assert laplace(d)(0.0) == 1.0


def test_gamma_density_value():
    assert density(Gamma(2.0, 1.0), 1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_exponential_density_at_zero():
    assert density(Exponential(1.0), 0.0) == 1.0


def test_log_ratio_density_at_zero():
    # exp(-l x) / (B(l, l) (1 + exp(-x))**(2 l)) with l = 1 at x = 0
    assert density(LogRatioExp(1.0, 1.0), 0.0) == pytest.approx(1 / (special.beta(1, 1) * 4), rel=1e-12)


# -- invariants -------------------------------------------------------------

@pytest.mark.parametrize("d", CLOSED_FORM, ids=repr)
def test_sampler_matches_laplace(d):
    x = d.sample(RngStream(3, 1), 10**5)
    lt = d.laplace()
    for u in U_GRID:
        ok, est, se = lt_within(x, u, float(lt(u)))
        assert ok, (u, est, float(lt(u)), se)


@pytest.mark.parametrize("d", [Gamma(2.0, 1.0), PositiveStable(0.5), InverseGaussian(1.0, 2.0),
                               HalfNormal(), Exponential(3.0)], ids=repr)
def test_analytic_lt_completely_monotone(d):
    v = check_completely_monotone(d.laplace(), CheckConfig())
    assert v.passed, v


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_analytic_lt_nonincreasing(shape, rate):
    u = np.linspace(0, 20, 200)
    v = laplace(Gamma(shape, rate))(u)
    assert v[0] == 1.0 and np.all(np.diff(v) <= 0)


@pytest.mark.parametrize("d", [Gamma(2.0, 1.5), Exponential(1.0), HalfNormal(), LogRatioExp(1.0, 1.0),
                               LogRatioExp(1.0, 3.0)], ids=repr)
def test_density_integrates_to_one(d):
    lo, hi = d.support
    total, _ = integrate.quad(lambda t: float(density(d, t)), lo, hi, epsabs=1e-10, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_log_ratio_matches_simulation():
    from scipy import stats
    d = LogRatioExp(1.0, 2.0)
    g = RngStream(4).generator
    ref = np.log(g.exponential(1.0, 20000) / g.exponential(0.5, 20000))
    assert stats.ks_2samp(d.sample(RngStream(5), 20000), ref).pvalue > 0.01


@pytest.mark.parametrize("d", CLOSED_FORM + [SlowLogTail(), Normal(1.0, 1.0)], ids=repr)
def test_sampling_reproducible(d):
    assert np.array_equal(d.sample(RngStream(9, 2), 500), d.sample(RngStream(9, 2), 500))


# -- validation and moments ----------------------------------------------------

def test_construction_errors():
    for bad in (lambda: Gamma(0, 1), lambda: PositiveStable(1 - 1e-7), lambda: PositiveStable(1.2),
                lambda: InverseGaussian(-1, 1), lambda: DiscreteAtoms((1,), (0.5,)),
                lambda: Transformed(Normal(), ("log",)),
                lambda: Transformed(Exponential(), ("negexp", "log", ("scale", 2), ("shift", 1)))):
        with pytest.raises(ValueError):
            bad()


def test_laplace_unsupported_for_signed_law():
    with pytest.raises(UnsupportedError):
        Normal().laplace()


def test_log_moments():
    assert SlowLogTail().log_moment_finite() is False
    assert ParetoTail(1.0, 1.0).log_moment_finite() is True
    assert Gamma(2, 1).log_moment_finite() is True


def test_transformed_moments():
    # exp(-X), X ~ Exp(1): mean 1/2; gamma**-1 with shape 3: mean 1/2
    assert Transformed(Exponential(1.0), ("negexp",)).mean() == pytest.approx(0.5)
    assert Transformed(Gamma(3.0, 1.0), (("power", -1.0),)).mean() == pytest.approx(0.5)


def test_slow_log_tail_sf():
    x = SlowLogTail().sample(RngStream(6), 50000)
    assert abs(np.mean(x > math.e ** 2) - 0.5) < 0.01


def test_lognormal_power_moment():
    assert LogNormal(0.0, 1.0).power_moment(1.0) == pytest.approx(math.exp(0.5))
