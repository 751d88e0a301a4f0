"""Command-line entry point.

    levyexpint run SCENARIO.toml
    levyexpint reproduce [--only NAME] [--list]
    levyexpint check-hcm --function NAME [--param k=v ...] [--cm]
    levyexpint check-convergence SCENARIO.toml

Global flags: --seed, --workers, --out-dir.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .diagnostics import BUILTIN_FUNCTIONS, CheckConfig, builtin_function, check_completely_monotone, check_hcm
from .perpetuity import check_model
from .scenario import (ConfigError, _jsonable, bundled_scenarios, exit_code, expectation_mismatches,
                       load_scenario, run_scenario)

_VERDICT_CODES = {"Pass": 0, "Converges": 0, "Fail": 2, "Diverges": 2, "Inconclusive": 3}


def _print_report(rep: dict) -> None:
    print(f"scenario {rep['scenario']}  seed={rep['seed']}  workers={rep['workers']}")
    if "convergence" in rep:
        c = rep["convergence"]
        print(f"  convergence: {c['outcome']} ({c['mode']}) - {c['reason']}")
    if "summary" in rep:
        s = rep["summary"]
        print(f"  samples: n={s['n']} mean={s['mean']:.6g} stderr={s['stderr']:.3g} "
              f"min={s['min']:.6g} max={s['max']:.6g} method={s['method']}")
    for c in rep.get("checks", []):
        label = f"[{c['label']}]" if c.get("label") else ""
        exp = f"  (expected {c['expect']})" if c.get("expect") else ""
        print(f"  {c['kind']}{label}: {c['outcome']} - {c['reason']}{exp}")


def _cmd_run(args) -> int:
    try:
        sc = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rep = run_scenario(sc, seed=args.seed, workers=args.workers, out_dir=args.out_dir)
    _print_report(rep)
    if args.json:
        print(json.dumps(_jsonable(rep), indent=2, sort_keys=True))
    return exit_code(rep)


def _cmd_reproduce(args) -> int:
    paths = bundled_scenarios()
    if args.list:
        for p in paths:
            print(p.stem)
        return 0
    if args.only:
        paths = [p for p in paths if p.stem == args.only]
        if not paths:
            print(f"error: no bundled scenario named {args.only!r}", file=sys.stderr)
            return 1
    rows, t0 = [], time.perf_counter()
    out_dir = Path(args.out_dir) if args.out_dir else None
    for p in paths:
        t = time.perf_counter()
        try:
            rep = run_scenario(load_scenario(p), seed=args.seed, workers=args.workers, out_dir=out_dir)
            miss = expectation_mismatches(rep)
            status = "MISMATCH" if miss else "OK"
            detail = "; ".join(miss) if miss else _summary_line(rep)
        except Exception as exc:  # captured per row
            status, detail = "ERROR", f"{type(exc).__name__}: {exc}"
        rows.append({"scenario": p.stem, "status": status, "detail": detail,
                     "seconds": round(time.perf_counter() - t, 2)})
        print(f"{p.stem:<28} {status:<9} {detail}", flush=True)
    total = time.perf_counter() - t0
    n_ok = sum(r["status"] == "OK" for r in rows)
    print(f"{n_ok}/{len(rows)} scenarios match their expectations ({total:.1f} s)")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        agg = {"version": __version__, "seed": args.seed, "workers": args.workers, "rows": rows,
               "wall_clock_s": total}
        (out_dir / "reproduce.json").write_text(json.dumps(agg, indent=2) + "\n")
    return 0 if n_ok == len(rows) else 2


def _summary_line(rep: dict) -> str:
    parts = []
    if "convergence" in rep:
        parts.append(rep["convergence"]["outcome"])
    parts += [f"{c['kind']}={c['outcome']}" for c in rep.get("checks", [])]
    return ", ".join(parts)


def _parse_params(items) -> dict:
    out = {}
    for it in items or ():
        if "=" not in it:
            raise ValueError(f"--param expects k=v, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _cmd_check_hcm(args) -> int:
    try:
        f = builtin_function(args.function, **_parse_params(args.param))
        cfg = CheckConfig(diff_order=args.diff_order, rel_tol=args.rel_tol)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    v = (check_completely_monotone if args.cm else check_hcm)(f, cfg)
    what = "CM" if args.cm else "HCM"
    print(f"{what} {args.function}: {v.outcome.value} - {v.reason}")
    if v.witness:
        print(f"  witness: {v.witness}")
    return _VERDICT_CODES[v.outcome.value]


def _cmd_check_convergence(args) -> int:
    try:
        sc = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if sc.model is None:
        print("error: scenario declares no [model]", file=sys.stderr)
        return 1
    from .rng import RngStream
    v = check_model(sc.model, RngStream(sc.seed if args.seed is None else args.seed, 0).substream(900))
    print(f"{sc.name}: {v.outcome.value} ({v.mode}) - {v.reason}")
    if v.witness:
        print(f"  witness: {json.dumps(_jsonable(v.witness))}")
    return _VERDICT_CODES[v.outcome.value]


def build_parser() -> argparse.ArgumentParser:
    def flags(suppress):
        g = argparse.ArgumentParser(add_help=False)
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=dflt(None), help="override the scenario seed")
        g.add_argument("--workers", type=int, default=dflt(1), help="worker threads per simulation")
        g.add_argument("--out-dir", default=dflt(None), help="directory for samples.csv / report.json")
        return g

    # flags may appear before or after the subcommand
    common = flags(True)
    ap = argparse.ArgumentParser(prog="levyexpint", parents=[flags(False)],
                                 description="Exponential integrals of Levy-type processes: "
                                             "simulation and diagnostics")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario file")
    p.add_argument("config")
    p.add_argument("--json", action="store_true", help="also print the full report as JSON")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("reproduce", parents=[common], help="run the bundled scenario suite")
    p.add_argument("--only", metavar="NAME")
    p.add_argument("--list", action="store_true")
    p.set_defaults(func=_cmd_reproduce)

    p = sub.add_parser("check-hcm", parents=[common], help="HCM (or CM) grid check of a builtin function")
    p.add_argument("--function", required=True, choices=sorted(BUILTIN_FUNCTIONS))
    p.add_argument("--param", action="append", metavar="K=V")
    p.add_argument("--cm", action="store_true", help="check complete monotonicity instead")
    p.add_argument("--diff-order", type=int, default=6)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.set_defaults(func=_cmd_check_hcm)

    p = sub.add_parser("check-convergence", parents=[common], help="convergence verdict of a scenario model")
    p.add_argument("config")
    p.set_defaults(func=_cmd_check_convergence)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
