"""Command line interface: ``simulate``, ``ensemble``, ``corrector-study``, ``verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from stocheuler.dynamics import NumericalFailure
from stocheuler.harness.config import ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stocheuler", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="YAML config file")
        src.add_argument("--preset", help="shipped preset name, e.g. standard_ensemble")
        sp.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        sp.add_argument("--out", type=Path, default=Path(out_default), help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; dotted keys reach nested values, e.g. theta.family=power")

    common(sub.add_parser("simulate", help="run one trajectory (sample 0)"), "out/simulate")
    common(sub.add_parser("ensemble", help="run the scaling-limit ensemble over N_list"), "out/ensemble")
    common(sub.add_parser("corrector-study", help="tabulate the corrector error and tail diagnostic"), "out/corrector")
    v = sub.add_parser("verify", help="run the invariant checks")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--check", action="append", help="run only the named check (repeatable)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "verify":
        from stocheuler.harness.verify import CHECKS, run_checks

        if args.check:
            unknown = sorted(set(args.check) - {c.name for c in CHECKS})
            if unknown:
                print(f"config error: unknown checks {unknown}", file=sys.stderr)
                return EXIT_CONFIG
        results = run_checks(args.level, args.check)
        for r in results:
            print(r.line())
        failed = [r.name for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
        return EXIT_VERIFY if failed else EXIT_OK

    try:
        path = args.config
        if args.preset:
            from stocheuler.presets import preset_path

            try:
                path = preset_path(args.preset)
            except FileNotFoundError as exc:
                raise ConfigError([("--preset", str(exc))]) from exc
        cfg = load_config(path, args.overrides, args.seed)
    except ConfigError as exc:
        for key, msg in exc.errors:
            print(f"config error: {key}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("config error: --threads: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    from stocheuler.harness import runner

    try:
        if args.command == "simulate":
            res = runner.simulate(cfg, args.out)
            print(f"wrote {args.out / 'trajectory.csv'}")
            if res.record.failed:
                print(f"numerical failure: {res.record.failure}", file=sys.stderr)
                return EXIT_NUMERICAL
        elif args.command == "ensemble":
            summary = runner.ensemble(cfg, out=args.out, threads=args.threads)
            for e in summary.entries:
                print(f"N={e.N:4d}  D_N={e.D:.6g}  completed={e.completed}/{e.samples}  "
                      f"P(decay)={e.probabilities['decay_bound']['p']:.3f}")
            if any(e.completed == 0 for e in summary.entries):
                print("numerical failure: every sample failed for some N", file=sys.stderr)
                return EXIT_NUMERICAL
        elif args.command == "corrector-study":
            rows = runner.corrector_study(dict(cfg.theta), cfg.nu, cfg.corrector_N_list, cfg.corrector_modes)
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / "corrector.csv"
            path.write_text(runner.corrector_csv(rows))
            for r in rows:
                print(f"N={r['N']:4d} j=({r['j1']},{r['j2']})  error={r['error']:.6e}  tail={r['tail']:.6e}  eps_N={r['eps_N']:.6e}")
            print(f"wrote {path}")
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
