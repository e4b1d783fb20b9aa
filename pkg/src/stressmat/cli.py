"""Command line front door.

    stressmat analyze --out DIR SESSION_DIR...
    stressmat synth --profile FILE --seed N --out DIR
    stressmat serve [--config FILE]

Exit codes: 0 success, 1 usage error, 2 data/runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import (
    CorruptSessionError,
    IncompleteSessionError,
    analyze_session,
    phase_report,
)
from .config import load_config
from .synthsession import write_synthetic_session

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stressmat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="per-phase HR report for stored sessions")
    p_analyze.add_argument("--out", required=True, type=Path, help="output directory")
    p_analyze.add_argument("session_dirs", nargs="+", type=Path, metavar="SESSION_DIR")

    p_synth = sub.add_parser("synth", help="write a fully synthetic session")
    p_synth.add_argument("--profile", required=True, type=Path,
                         help="JSON file mapping each phase to a target bpm")
    p_synth.add_argument("--seed", required=True, type=int)
    p_synth.add_argument("--out", required=True, type=Path, help="session directory to create")
    p_synth.add_argument("--label", default="", help="participant label")
    p_synth.add_argument("--fs", type=float, default=250.0, help="ECG sampling rate (Hz)")
    p_synth.add_argument("--snr-db", type=float, default=10.0,
                         help="additive noise SNR; negative values disable noise")

    p_serve = sub.add_parser("serve", help="run the ingestion/protocol service")
    p_serve.add_argument("--config", type=Path, default=None, help="JSON config file")
    return parser


def cmd_analyze(args) -> int:
    analyses = []
    had_errors = False
    for d in args.session_dirs:
        try:
            analyses.append(analyze_session(d))
        except IncompleteSessionError as exc:
            print(f"warning: skipping {d}: {exc}", file=sys.stderr)
        except CorruptSessionError as exc:
            print(f"error: {exc}", file=sys.stderr)
            had_errors = True
    if not analyses:
        print("error: no analyzable sessions", file=sys.stderr)
        return EXIT_DATA

    report = phase_report(analyses)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.csv").write_text(report.report_csv())
    (args.out / "plot_data.csv").write_text(report.plot_data_csv())

    print(f"analyzed {len(report.sessions)} session(s)")
    print(report.report_csv(), end="")
    return EXIT_DATA if had_errors else EXIT_OK


def cmd_synth(args) -> int:
    try:
        profile = json.loads(args.profile.read_text())
    except OSError as exc:
        print(f"error: cannot read profile: {exc}", file=sys.stderr)
        return EXIT_DATA
    except json.JSONDecodeError as exc:
        print(f"error: profile is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        out = write_synthetic_session(
            profile,
            seed=args.seed,
            out_dir=args.out,
            participant_label=args.label,
            sampling_rate_hz=args.fs,
            noise_snr_db=None if args.snr_db < 0 else args.snr_db,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"wrote synthetic session to {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_DATA
    app = create_app(config)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    except (OSError, SystemExit) as exc:
        print(f"error: server failed to start: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"analyze": cmd_analyze, "synth": cmd_synth, "serve": cmd_serve}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
