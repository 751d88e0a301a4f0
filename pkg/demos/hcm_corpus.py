"""Grid verdicts of the CM and HCM checks on the builtin functions."""

from levyexpint.diagnostics import BUILTIN_FUNCTIONS, CheckConfig, builtin_function, check_completely_monotone, check_hcm

cfg = CheckConfig()
for name, (_, _, formula) in sorted(BUILTIN_FUNCTIONS.items()):
    f = builtin_function(name)
    cm, hcm = check_completely_monotone(f, cfg), check_hcm(f, cfg)
    where = f"  first HCM violation {hcm.witness}" if hcm.witness and "order" in hcm.witness else ""
    print(f"{name:<20} {formula:<28} CM {cm.outcome.value:<5} HCM {hcm.outcome.value:<5}{where}")
