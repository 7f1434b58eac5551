"""Command-line entry points: ``run``, ``verify``, ``audit``.

Exit codes: 0 success, 1 verification or audit failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from typing import Sequence

from .evidence import PackError, audit_pack, emit_pack, replay_verify
from .governance import CommitmentRegistry, RegistryError
from .harness import Arm, Mode, RunConfig, registry_for, run

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _lr(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("learning rate must be non-negative")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ledgerloop", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the two-arm experiment and emit an evidence pack")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--output", required=True, help="empty or missing output directory")
    p.add_argument("--cycles", type=_positive, default=100)
    p.add_argument("--events-per-cycle", type=_positive, default=20)
    p.add_argument("--lr-baseline", type=_lr, default=None, help="override baseline lr (default 0.0)")
    p.add_argument("--lr-treatment", type=_lr, default=None, help="override treatment lr (default 0.1)")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SHADOW.value)
    p.add_argument("--registry", help="commitment registry JSON (default: built-in)")
    p.add_argument("--json", action="store_true", help="print a machine-readable summary")

    p = sub.add_parser("verify", help="replay-verify an evidence pack")
    p.add_argument("pack")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("audit", help="mirror-audit the ledgers in an evidence pack")
    p.add_argument("pack")
    p.add_argument("--json", action="store_true")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        base = CommitmentRegistry.load(args.registry) if args.registry else CommitmentRegistry.default()
    except (RegistryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    committed = base.constraints["lr"]
    lrs = {
        "baseline": args.lr_baseline if args.lr_baseline is not None else Fraction(committed.get("baseline", "0")),
        "treatment": args.lr_treatment if args.lr_treatment is not None else Fraction(committed.get("treatment", "0.1")),
    }
    arms = tuple(Arm(name, lr) for name, lr in lrs.items())
    overridden = args.lr_baseline is not None or args.lr_treatment is not None
    registry = registry_for(arms, base) if overridden else base
    config = RunConfig(
        seed=args.seed,
        cycles=args.cycles,
        events_per_cycle=args.events_per_cycle,
        arms=arms,
        mode=Mode(args.mode),
    )
    try:
        state = run(config, registry)
        manifest = emit_pack(state, args.output)
    except (RegistryError, PackError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    summary = state.summary()
    if args.json:
        print(json.dumps({"manifest_files": len(manifest["files"]), "output": args.output, **summary},
                         sort_keys=True, indent=2))
    else:
        print(f"wrote {args.output} ({len(manifest['files'])} files)")
        for name, row in summary["arms"].items():
            print(f"  {name}: lr={row['lr']} pass_rate={row['pass_rate']} "
                  f"var(dp)={row['delta_p_variance']} abstention={row['abstention_rate']}")
        print(f"  claim level {summary['claim_level']}, fired {summary['fired'] or 'none'}")
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    report = replay_verify(args.pack)
    if args.json:
        print(json.dumps(report.to_doc(), sort_keys=True, indent=2))
    else:
        for r in report.results:
            print(f"[{'PASS' if r.ok else 'FAIL'}] {r.number} {r.name}: {r.detail}")
        failed = report.failed
        print("VERIFIED" if report.ok else f"VERIFICATION FAILED at check {failed.number} ({failed.name})")
        print(report.disclaimer)
    return report.exit_code


def _cmd_audit(args: argparse.Namespace) -> int:
    try:
        reports = audit_pack(args.pack)
    except (PackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.json:
        print(json.dumps({arm: r.to_doc() for arm, r in reports.items()}, sort_keys=True, indent=2))
    else:
        for arm, r in reports.items():
            flags = " [EMPTY]" if r.empty else ""
            head = "head ok" if r.head_match else "HEAD MISMATCH"
            print(f"{arm}: coverage {r.coverage_pct}%, {r.total} blocks, {r.verified} verified, {head}{flags}")
            for d in r.divergences:
                print(f"  divergence at block {d['index']}: {d['reason']}")
    return EXIT_OK if reports and all(r.ok for r in reports.values()) else EXIT_FAIL


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handler = {"run": _cmd_run, "verify": _cmd_verify, "audit": _cmd_audit}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
