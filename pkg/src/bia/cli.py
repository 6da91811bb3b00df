"""Command-line entry point: construct, verify, simulate, bounds."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bounds import curve_csv, outer_bound_curve
from .link import IllConditionedError, UnverifiedSchemeError, estimate_rates
from .scheme import BiaScheme, ConstructionError, ParameterError, build_scheme, optimal_r
from .verify import verify

log = logging.getLogger("bia")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _snr_list(text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}: {exc}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("SNR list is empty")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bia", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def scheme_args(p, need_K=True):
        p.add_argument("--K", type=int, required=need_K, help="number of users")
        p.add_argument("--r", type=int, default=None, help="coalition size (default: optimal)")
        p.add_argument("--pad-b", action="store_true", help="use the full B block")

    def common(p, fmt=("json",)):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=fmt, default=fmt[0])

    p = sub.add_parser("construct", help="build a scheme and write it as JSON")
    scheme_args(p)
    common(p)

    p = sub.add_parser("verify", help="check a scheme; exit 1 if any check fails")
    scheme_args(p, need_K=False)
    p.add_argument("--scheme", type=Path, default=None, help="scheme JSON file")
    p.add_argument("--seeds", type=int, default=3, help="independent field evaluations")
    common(p)

    p = sub.add_parser("simulate", help="Monte-Carlo rate curve and DoF slope")
    scheme_args(p, need_K=False)
    p.add_argument("--scheme", type=Path, default=None)
    p.add_argument("--snr-db", type=_snr_list, default=_snr_list("30,40,50,60"))
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--allow-unverified", action="store_true",
                   help="simulate even if verification fails (diagnostics only)")
    common(p, fmt=("csv", "json"))

    p = sub.add_parser("bounds", help="optimal sum-DoF curve as CSV")
    p.add_argument("--K-min", type=int, default=2)
    p.add_argument("--K-max", type=int, default=50)
    common(p, fmt=("csv", "json"))
    return ap


def _scheme_from_args(args, defaults: list[str]) -> BiaScheme:
    if getattr(args, "scheme", None) is not None:
        if args.K is not None or args.r is not None:
            raise UsageError("give either --scheme or --K/--r, not both")
        try:
            return BiaScheme.load(args.scheme)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read scheme {args.scheme}: {exc}") from exc
    if args.K is None:
        raise UsageError("--K or --scheme is required")
    if args.K < 1:
        raise UsageError(f"--K must be >= 1, got {args.K}")
    r_opt = optimal_r(args.K)
    if args.r is None:
        defaults.append("r")
    elif args.r != r_opt:
        log.warning("r=%d is not optimal for K=%d (optimal r=%d)", args.r, args.K, r_opt)
    return build_scheme(args.K, args.r, pad_b=args.pad_b)


def _meta(args, scheme: BiaScheme | None, defaults: list[str], timestamp: bool = True) -> dict:
    meta = {"tool": "bia", "tool_version": __version__, "command": args.command, "seed": args.seed}
    if scheme is not None:
        p = scheme.params
        meta.update(K=p.K, r=p.r, n=p.n, M=p.M, pad_b=p.pad_b)
    meta["defaults"] = sorted(defaults)
    if timestamp:
        meta["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _emit(args, text: str, suffix_path: Path | None = None) -> None:
    target = suffix_path or args.out
    if target is None:
        sys.stdout.write(text)
    else:
        target.write_text(text)


def _cmd_construct(args, defaults) -> int:
    scheme = _scheme_from_args(args, defaults)
    _emit(args, scheme.to_json(**_meta(args, scheme, defaults)) + "\n")
    return EXIT_OK


def _cmd_verify(args, defaults) -> int:
    scheme = _scheme_from_args(args, defaults)
    if args.seeds < 3:
        log.warning("fewer than 3 seeds weakens the random-evaluation guarantee")
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    report = verify(scheme, seeds=args.seeds, master_seed=args.seed)
    doc = {"meta": _meta(args, scheme, defaults), **report.to_dict()}
    _emit(args, json.dumps(doc, indent=1) + "\n")
    if not report.passed:
        for f in report.failures():
            log.error("FAIL %s", f)
        return EXIT_VERIFY
    return EXIT_OK


def _rates_csv(curve, header: list[str]) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "user", "rate_bpcu", "sum_rate"])
    for snr, user, rate, total in curve.csv_rows():
        w.writerow([f"{snr:g}", user, repr(rate), repr(total)])
    return buf.getvalue()


def _header(meta: dict) -> list[str]:
    return [f"{k}={v}" for k, v in meta.items()]


def _cmd_simulate(args, defaults) -> int:
    scheme = _scheme_from_args(args, defaults)
    if args.trials < 100:
        raise UsageError(f"--trials must be >= 100, got {args.trials}")
    try:
        curve = estimate_rates(scheme, args.snr_db, args.trials, args.seed,
                               allow_unverified=args.allow_unverified)
    except UnverifiedSchemeError as exc:
        log.error("%s (use --allow-unverified for a diagnostic run)", exc)
        return EXIT_VERIFY
    except (ValueError, IllConditionedError) as exc:
        raise UsageError(str(exc)) from exc
    meta = _meta(args, scheme, defaults, timestamp=False)
    meta["snr_db"] = ",".join(f"{s:g}" for s in args.snr_db)
    meta["trials"] = args.trials
    summary = {"meta": {**meta, "generated_at": _meta(args, None, [])["generated_at"]}, **curve.summary()}
    if args.format == "json":
        summary["rows"] = [
            {"snr_db": s, "user": u, "rate_bpcu": r, "sum_rate": t} for s, u, r, t in curve.csv_rows()
        ]
        _emit(args, json.dumps(summary, indent=1) + "\n")
        return EXIT_OK
    _emit(args, _rates_csv(curve, _header(meta)))
    text = json.dumps(summary, indent=1) + "\n"
    if args.out is None:
        sys.stderr.write(text)
    else:
        args.out.with_suffix(".json").write_text(text)
    return EXIT_OK


def _cmd_bounds(args, defaults) -> int:
    if not 1 <= args.K_min <= args.K_max:
        raise UsageError(f"need 1 <= --K-min <= --K-max, got {args.K_min}, {args.K_max}")
    points = outer_bound_curve(args.K_min, args.K_max)
    meta = _meta(args, None, defaults, timestamp=False)
    meta.update(K_min=args.K_min, K_max=args.K_max)
    if args.format == "json":
        doc = {
            "meta": {**meta, "generated_at": _meta(args, None, [])["generated_at"]},
            "points": [
                {"K": p.K, "r_star": p.r_star, "dof": str(p.dof), "dof_decimal": p.dof_decimal,
                 "sqrtK_over_2": p.asymptote}
                for p in points
            ],
        }
        _emit(args, json.dumps(doc, indent=1) + "\n")
    else:
        _emit(args, curve_csv(points, _header(meta)))
    return EXIT_OK


COMMANDS = {
    "construct": _cmd_construct,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "bounds": _cmd_bounds,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    defaults: list[str] = []
    try:
        return COMMANDS[args.command](args, defaults)
    except ConstructionError as exc:
        log.error("construction infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (ParameterError, UsageError) as exc:
        log.error("usage: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
