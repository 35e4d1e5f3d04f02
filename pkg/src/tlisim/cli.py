"""Command-line entry point: ``tlisim {simulate,compare,modes,analyze}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .analysis import AnalysisError, build_report
from .analytic import leakage_rms_estimate
from .report import ConfigError, ScenarioConfig, compare_all, export_waveforms, parse_config, read_waveforms
from .simulate import SimulationError, run
from .topology import TopologyError, TopologyKind, enumerate_modes

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG = 2

log = logging.getLogger("tlisim")


def _load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return parse_config("{}")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def _fraction(x: float) -> str:
    f = Fraction(x).limit_denominator(4)
    if f == 0:
        return "0"
    sign = "-" if f < 0 else ""
    num = abs(f.numerator)
    if f.denominator == 1:
        return sign + ("V_PV" if num == 1 else f"{num}*V_PV")
    return sign + (f"V_PV/{f.denominator}" if num == 1 else f"{num}/{f.denominator}*V_PV")


def cmd_modes(args) -> int:
    kind = TopologyKind.parse(args.topology)
    print(f"{kind.value}: voltage characteristics of the four conduction modes")
    print(f"{'mode':<5} {'gates':<14} {'i':>3}  {'V_AN':<8} {'V_BN':<8} {'DMV':<8} {'CMV':<8}")
    for row in enumerate_modes(kind):
        on = ",".join(s for s in kind.switches if row.gates.is_on(s))
        cells = [_fraction(v) for v in (row.v_an, row.v_bn, row.dmv, row.cmv)]
        print(f"{row.mode:<5} {on:<14} {row.i_sign:>+3d}  " + " ".join(f"{c:<8}" for c in cells))
    if args.v_pv is not None:
        print(f"\nat V_PV = {args.v_pv:g} V:")
        for row in enumerate_modes(kind):
            vals = [v * args.v_pv for v in (row.v_an, row.v_bn, row.dmv, row.cmv)]
            print(f"{row.mode:<5} " + " ".join(f"{v:>8g}" for v in vals))
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    kind = TopologyKind.parse(args.topology)
    out_dir = Path(args.out or config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        record = run(kind, config.params)
    except SimulationError as exc:
        log.error("%s", exc)
        return EXIT_RUN_FAILURE
    report = build_report(record, config.params, config.max_order)
    doc = report.to_dict()
    doc["analytical_leakage_rms_A"] = leakage_rms_estimate(record, config.params)
    csv_path = export_waveforms(record, out_dir / f"{kind.value}.csv", config.decimation)
    (out_dir / f"{kind.value}_report.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(json.dumps(doc, indent=2))
    print(f"waveforms written to {csv_path}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _load_config(args.config)
    table = compare_all(config, jobs=args.jobs)
    sys.stdout.write(table.format())
    out_dir = Path(args.out or config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "comparison.json").write_text(table.to_json())
    return EXIT_OK if table.ok else EXIT_RUN_FAILURE


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    kind = args.topology
    if kind is None:
        stem = Path(args.waveform).stem
        kind = stem if stem in {k.value for k in TopologyKind} else None
    try:
        record = read_waveforms(args.waveform, kind, config.params)
        max_order = args.max_order if args.max_order is not None else config.max_order
        report = build_report(record, record.params, max_order)
        doc = report.to_dict()
        doc["analytical_leakage_rms_A"] = leakage_rms_estimate(record, record.params)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUN_FAILURE
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlisim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one topology and export its waveforms")
    p.add_argument("--topology", required=True)
    p.add_argument("--config")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run every configured topology and print the comparison table")
    p.add_argument("--config")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("modes", help="print the conduction-mode voltage table")
    p.add_argument("--topology", required=True)
    p.add_argument("--v-pv", type=float, default=None)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("analyze", help="compute metrics from an exported waveform CSV")
    p.add_argument("waveform")
    p.add_argument("--max-order", type=int, default=None)
    p.add_argument("--config")
    p.add_argument("--topology")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TopologyError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
