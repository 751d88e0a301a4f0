"""Convergence verdicts for the bundled truth-table scenarios."""

from levyexpint.perpetuity import check_model
from levyexpint.rng import RngStream
from levyexpint.scenario import bundled_scenarios, load_scenario

for p in bundled_scenarios():
    if p.stem.startswith("conv_"):
        sc = load_scenario(p)
        v = check_model(sc.model, RngStream(42, 900))
        print(f"{sc.name:<20} {v.outcome.value:<12} ({v.mode}) {v.reason}")
