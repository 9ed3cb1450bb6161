"""Command line entry point: ``simulate``, ``hardening`` and ``selftest``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .frame import ConfigurationError, FrameConfig, load_mapping

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, out_default: str | None) -> None:
    p.add_argument("--config", type=Path, help="JSON or YAML configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", type=Path, default=Path(out_default) if out_default else None,
                   help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthoprecoding", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="BER versus Eb/N0 sweep from a plan file")
    _common(sim, "results")
    sim.add_argument("--stop-below", type=float, default=None,
                     help="end a curve once its final-iteration BER falls below this value")
    hard = sub.add_parser("hardening", help="effective-channel variance table and eigenvalue spectra")
    _common(hard, "hardening")
    hard.add_argument("--frames", type=int, default=None, help="Monte-Carlo frames per preset (0 = analytic only)")
    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    _common(st, None)
    return parser


def _simulate(args) -> int:
    from .sim import SimulationPlan, run_sweep

    plan = SimulationPlan.from_file(args.config) if args.config else SimulationPlan()
    if args.seed is not None:
        plan.seed = args.seed
    plan.validate()
    path = run_sweep(plan, args.out, max(1, args.workers), args.stop_below)
    print(f"wrote {path}")
    return EXIT_OK


def _hardening(args) -> int:
    from .hardening import write_reports

    cfg = load_mapping(args.config) if args.config else {}
    unknown = set(cfg) - {"frame", "n_frames", "seed"}
    if unknown:
        raise ConfigurationError(f"unknown hardening keys: {sorted(unknown)}")
    frame = FrameConfig.from_dict(cfg.get("frame", {}))
    n_frames = args.frames if args.frames is not None else int(cfg.get("n_frames", 0))
    if n_frames < 0:
        raise ConfigurationError("number of frames must be non-negative")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    for path in write_reports(args.out, frame, n_frames, seed):
        print(f"wrote {path}")
    return EXIT_OK


def _selftest(args) -> int:
    from .selftest import run_selftest

    if args.config:
        raise ConfigurationError("selftest takes no configuration file")
    results = run_selftest(args.seed or 0)
    for r in results:
        print(r.line())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        report = [{"name": r.name, "error": r.error, "tolerance": r.tolerance, "passed": r.passed} for r in results]
        (args.out / "selftest.json").write_text(json.dumps(report, indent=2))
    ok = all(r.passed for r in results)
    print("selftest", "passed" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"simulate": _simulate, "hardening": _hardening, "selftest": _selftest}[args.command]
    try:
        return handler(args)
    except (ConfigurationError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
