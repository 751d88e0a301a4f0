"""Dependent compound Poisson model: simulated transform against the infinite product."""

import math

from levyexpint.distributions import Exponential, PointMass
from levyexpint.perpetuity import TruncationPolicy, simulate_dependent
from levyexpint.processes import DependentCPPSpec
from levyexpint.rng import RngStream
from levyexpint.transforms import compound_geometric_lt, decomposability_product_lt, empirical_laplace

spec = DependentCPPSpec(1.0, 0.5, Exponential(1.0), PointMass(0.0))
x = simulate_dependent(spec, TruncationPolicy(), RngStream(42), 1_000_000)
rho = compound_geometric_lt(0.5, Exponential(1.0).laplace(), PointMass(0.0).laplace())
prod = decomposability_product_lt(rho, math.e)
print(f"mean {x.mean():.5f}  (e/(e-1) = {math.e / (math.e - 1):.5f})")
for u in (0.5, 1.0, 2.0, 4.0):
    est, se = empirical_laplace(x, u)
    print(f"u = {u:<4} empirical {est:.5f} +- {se:.5f}   product {prod(u):.5f}")
