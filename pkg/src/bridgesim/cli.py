"""Command-line front end.

Exit codes: 0 when the run(s) saw no violation, 2 when some monitor fired,
1 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import canonical_json, config_digest, load_config
from .engine import Simulation
from .errors import BridgeSimError
from .oracle import cross_check
from .presets import build_preset, preset_names
from .report import emit_report, render_report
from .scenario import Scenario

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bridgesim", description="Cross-chain bridge security simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a scenario and write its report")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="scenario JSON file")
    src.add_argument("--preset", help="shipped incident preset")
    src.add_argument("--all-presets", action="store_true", help="run every shipped preset")
    run.add_argument("--seed", type=int, help="overrides the scenario seed (or $BRIDGESIM_SEED)")
    run.add_argument("--horizon", type=int, help="overrides the scenario horizon")
    run.add_argument("--out", type=Path,
                     help="report file; a directory with --all-presets; stdout if omitted")
    run.add_argument("--workers", type=int, default=1, help="parallel runs for --all-presets")

    sub.add_parser("presets", help="list shipped presets")

    surface = sub.add_parser("surface", help="attack-surface report only, no simulation")
    s_src = surface.add_mutually_exclusive_group(required=True)
    s_src.add_argument("--config", type=Path)
    s_src.add_argument("--preset")

    verify = sub.add_parser("verify", help="cross-check the causality monitor against brute force")
    v_src = verify.add_mutually_exclusive_group(required=True)
    v_src.add_argument("--config", type=Path)
    v_src.add_argument("--preset")
    verify.add_argument("--seed", type=int)
    verify.add_argument("--horizon", type=int)
    return parser


def _scenario(args) -> Scenario:
    if args.config is not None:
        return load_config(args.config)
    return build_preset(args.preset)


def _seed(args) -> Optional[int]:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BRIDGESIM_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise BridgeSimError(f"BRIDGESIM_SEED must be an integer, got {env!r}") from None
    return None


def _run_one(scenario: Scenario, seed, horizon, out: Optional[Path]) -> int:
    result = Simulation(scenario, seed, horizon).run()
    digest = config_digest(scenario)
    if out is None:
        sys.stdout.write(render_report(result, digest))
    else:
        emit_report(result, out, digest)
    return EXIT_VIOLATIONS if result.violations else EXIT_CLEAN


def _cmd_run(args) -> int:
    seed = _seed(args)
    if not args.all_presets:
        return _run_one(_scenario(args), seed, args.horizon, args.out)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    from .engine import run_batch

    scenarios = {name: build_preset(name) for name in preset_names()}
    jobs = [(s, s.seed if seed is None else seed) for s in scenarios.values()]
    code = EXIT_CLEAN
    for result in run_batch(jobs, args.horizon, workers=args.workers):
        digest = config_digest(scenarios[result.scenario])
        if args.out is None:
            sys.stdout.write(render_report(result, digest))
        else:
            emit_report(result, args.out / f"{result.scenario}.json", digest)
        if result.violations:
            code = EXIT_VIOLATIONS
    return code


def _cmd_presets(_args) -> int:
    for name in preset_names():
        citation = build_preset(name).expected.citation
        print(f"{name}\t{citation}")
    return EXIT_CLEAN


def _cmd_surface(args) -> int:
    from .engine import trust_set_of, total_area

    scenario = _scenario(args)
    report = total_area(scenario.bridge, scenario.catalog)
    trust = trust_set_of(scenario.bridge)
    doc = {
        "scenario": scenario.name,
        "areas": {"source": report.area_src, "offchain": report.area_off,
                  "destination": report.area_dest, "other": report.area_other,
                  "total": report.area_total},
        "layer_vectors": {layer.value: ids for layer, ids in report.layer_vectors.items()},
        "vectors": {vid: {"der": str(r), "viable": f} for vid, (r, f) in sorted(report.der.items())},
        "trust": {"classification": trust.classification.value, "size": trust.size,
                  "cost": str(trust.cost)},
        "annotations": list(report.annotations),
    }
    sys.stdout.write(canonical_json(doc))
    return EXIT_CLEAN


def _cmd_verify(args) -> int:
    sim = Simulation(_scenario(args), _seed(args), args.horizon)
    result = sim.run()
    check = cross_check(sim.cfg, sim.chains, sim.horizon, sim.monitor.state.grace_window)
    print(json.dumps({
        "scenario": result.scenario,
        "checked": check.checked,
        "agreed": check.agreed,
        "skipped": check.skipped,
        "agreement": check.ok,
    }, sort_keys=True))
    if not check.ok:
        for pair, direction, key, mine, theirs in check.disagreements:
            print(f"disagreement {pair} {direction} {key}: monitor={mine} oracle={theirs}",
                  file=sys.stderr)
        return EXIT_ERROR
    return EXIT_VIOLATIONS if result.violations else EXIT_CLEAN


_COMMANDS = {"run": _cmd_run, "presets": _cmd_presets, "surface": _cmd_surface,
             "verify": _cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (BridgeSimError, OSError) as exc:
        print(f"bridgesim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entry(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))
