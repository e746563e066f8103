"""Command-line entry point.

Exit codes: 0 the run completed (whatever the verdicts), 1 usage or
configuration error, 2 numerical hard failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .errors import CatalogError, MissingTable, QLayerError
from .experiment import OUTPUT_ENV, ExperimentConfig, run_experiment, write_report
from .plots import PLOT_KINDS, plot_emit

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected key=value")
    key, value = text.split("=", 1)
    return key, yaml.safe_load(value)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="YAML experiment file")
    p.add_argument("--surface", help="builtin surface name")
    p.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                   help="surface parameter (repeatable)")
    p.add_argument("--a", type=float, help="layer half-width")
    p.add_argument("--C0", type=float, help="validity constant")
    p.add_argument("--R-list", type=_floats, help="truncation radii, comma separated")
    p.add_argument("--h-list", type=_floats, help="base mesh sizes, coarse to fine")
    p.add_argument("--u-intervals", type=_ints, help="transverse cells per level")
    p.add_argument("--grading", type=float)
    p.add_argument("--count", type=int, help="eigenpairs per level")
    p.add_argument("--certificates", type=lambda s: s.split(","), help="certificate kinds, comma separated")
    p.add_argument("--radii", type=_floats)
    p.add_argument("--growth-radii", type=_floats)
    p.add_argument("--ball-mode", choices=("parameter", "geodesic"))
    p.add_argument("--mu", type=_floats, help="invariant coefficients")
    p.add_argument("--C1", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--euler-characteristic", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or ./qlayer-output)")
    p.add_argument("--prefix")
    p.add_argument("--no-write", action="store_true", help="print the report instead of writing files")


_OVERRIDES = ("a", "C0", "R_list", "h_list", "u_intervals", "grading", "count", "certificates", "radii",
              "growth_radii", "ball_mode", "mu", "C1", "epsilon", "euler_characteristic", "seed", "output_dir",
              "prefix")


def config_from_args(args) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data = yaml.safe_load(fh) or {}
    if args.surface:
        data.pop("surface", None)
        data["surface"] = {"name": args.surface, "params": {}}
    if "surface" not in data:
        raise ValueError("give a config file or --surface")
    if args.param:
        surf = data["surface"]
        if not isinstance(surf, dict):
            surf = data["surface"] = {"name": surf, "params": {}}
        surf.setdefault("params", {}).update(dict(args.param))
    cfg = ExperimentConfig.from_dict(data)
    for key in _OVERRIDES:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if cfg.name is None and args.config:
        cfg.name = Path(args.config).stem
    cfg.__post_init__()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qlayer", description="Quantum-layer spectral experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {"describe": "geometry diagnostics only", "spectrum": "ladder and eigensolve",
             "certify": "all requested certificates", "full": "everything"}
    for name, text in helps.items():
        _add_config_flags(sub.add_parser(name, help=text))
    p = sub.add_parser("plot", help="SVG figure from a report")
    p.add_argument("report", help="JSON report")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--output", help="SVG path (default next to the report)")
    return parser


def _summary(report: dict) -> str:
    lines = [f"surface {report['geometry']['surface']}  kappa1 = {report['kappa1']:.10g}"]
    sp = report.get("spectral")
    if sp:
        lines.append(f"lambda1 extrapolated = {sp['extrapolated_lambda1']:.10g} +- {sp['error_bar']:.3g}  "
                     f"below_threshold = {sp['below_threshold']}")
    for cert in report.get("certificates", []):
        mode = cert["provenance"].get("mode")
        lines.append(f"{cert['kind']}{' (' + mode + ')' if mode else ''}: {cert['verdict']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "plot":
            with open(args.report) as fh:
                report = json.load(fh)
            out = args.output or args.report.replace(".report.json", "") + f".{args.kind}.svg"
            print(plot_emit(report, args.kind, out))
            return EXIT_OK
        cfg = config_from_args(args)
        report = run_experiment(cfg, args.command, write=False)
        if args.no_write:
            json.dump(report, sys.stdout, indent=2, sort_keys=True)
            print()
        else:
            paths = write_report(report, cfg)
            print(_summary(report))
            print(f"report written to {paths['report']}")
        return EXIT_OK
    except (CatalogError, MissingTable, ValueError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QLayerError as exc:
        print(f"error [{exc.stage}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
