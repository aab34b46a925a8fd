"""Command-line front end.

Subcommands: report (closed-form quantities for one configuration),
simulate (placement + scheduling + bit-exact decode), sweep (CSV over the
memory grid), verify (constant-gap and invariant sweep, or schedule-file
validation).

Exit codes: 0 success, 1 parameter validation, 2 scheduler infeasibility
or invalid schedule, 3 decode failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from .analysis import (
    DelayReport,
    baseline_D2D,
    baseline_MN,
    delay_report,
    envelope,
    lower_bound,
    memory_grid,
    rate_RC,
    verify_gap,
)
from .delivery import (
    SchedulingError,
    build_schedule,
    export_schedule,
    import_schedule,
    validate_schedule,
)
from .params import ParameterError, SystemParams, derive
from .placement import FileLibrary, SplitError, fill_caches
from .simulator import (
    DecodeError,
    decode_user,
    execute_schedule,
    normalized_delay,
    worst_case_demands,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SCHEDULING = 2
EXIT_DECODE = 3

CSV_COLUMNS = [
    "M",
    "t",
    "alpha_star",
    "L1",
    "L2",
    "R1",
    "R2",
    "R_C",
    "envelope",
    "lower_bound",
    "R_MN",
    "R_D2D",
    "G_c",
    "G_p",
    "gap_ratio",
]
RATIONAL_COLUMNS = [
    "M",
    "R1",
    "R2",
    "R_C",
    "envelope",
    "lower_bound",
    "R_MN",
    "R_D2D",
    "G_c",
    "G_p",
    "gap_ratio",
]


def _dec(x: Fraction | None) -> str:
    return "" if x is None else format(float(x), ".12g")


def _exact(x: Fraction | None) -> str:
    return "" if x is None else f"{x.numerator}/{x.denominator}"


def _threads() -> int:
    raw = os.environ.get("COOPCACHE_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _params(args) -> SystemParams:
    M = Fraction(args.cache)
    return SystemParams(
        N=args.files,
        K=args.users,
        M=M,
        alpha_max=args.alpha_max,
        F=args.file_bits,
    )


def _print_report(rep: DelayReport, out) -> None:
    p = rep.params
    print(f"N={p.N} K={p.K} M={p.M} alpha_max={p.alpha_max}", file=out)
    print(f"t           = {rep.t}", file=out)
    print(f"alpha*      = {rep.alpha_star}", file=out)
    print(f"(L1, L2)    = ({rep.L1}, {rep.L2})", file=out)
    print(f"R1          = {rep.R1}", file=out)
    print(f"R2          = {rep.R2}", file=out)
    print(f"R_C         = {rep.R_C}", file=out)
    print(f"G_c         = {rep.G_c}", file=out)
    print(f"G_p         = {rep.G_p if rep.G_p is not None else 'undefined (t=0)'}", file=out)
    print(f"R_MN        = {rep.R_MN}", file=out)
    print(f"R_D2D       = {rep.R_D2D if rep.R_D2D is not None else 'undefined (M=0)'}", file=out)
    print(f"lower_bound = {rep.lower_bound}", file=out)
    print(f"gap_ratio   = {rep.gap_ratio} ({float(rep.gap_ratio):.4f})", file=out)


def cmd_report(args) -> int:
    params = _params(args)
    rep = delay_report(params)
    _print_report(rep, sys.stdout)
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    d = derive(params)
    library = FileLibrary.generate(params, d, seed=args.seed, target_bits=args.target_bits)
    caches = fill_caches(params, d)
    demands = worst_case_demands(params, seed=args.seed)
    try:
        schedule = build_schedule(params, d, demands)
    except SchedulingError as exc:
        print(f"scheduling failed: {exc}", file=sys.stderr)
        return EXIT_SCHEDULING
    report = validate_schedule(schedule, caches, demands, d)
    print(f"t={d.t} alpha={d.alpha} L1={d.L1} L2={d.L2} g={d.g}")
    print(f"user slots     : {schedule.user_slot_count} (expected {schedule.expected_user_slots})")
    print(f"server symbols : {schedule.server_symbol_count}")
    if not report.ok:
        for f in report.failures:
            print(f"invalid schedule: {f}", file=sys.stderr)
        return EXIT_SCHEDULING
    log = execute_schedule(schedule, library)
    by_user = {c.user: c for c in caches}
    failures = 0
    for k in sorted(demands):
        try:
            got = decode_user(k, log, by_user[k], library, demands[k])
            ok = got == library.file_payload(demands[k])
        except DecodeError:
            ok = False
        if not ok:
            failures += 1
        print(f"user {k}: file {demands[k]} decode {'OK' if ok else 'FAIL'}")
    delay = normalized_delay(schedule)
    print(f"decodes        : {len(demands) - failures}/{len(demands)}")
    print(f"measured delay : {delay}")
    if args.out:
        with open(args.out, "w") as fp:
            export_schedule(schedule, fp)
        print(f"schedule written to {args.out}")
    return EXIT_OK if failures == 0 else EXIT_DECODE


def _sweep_row(N: int, K: int, alpha_max: int, M: Fraction, env) -> dict:
    p = SystemParams(N=N, K=K, M=M, alpha_max=alpha_max)
    rep = delay_report(p)
    lb = rep.lower_bound
    env_val = env(M)
    gap = env_val / lb if lb > 0 else Fraction(1)
    vals: dict[str, Fraction | int | None] = {
        "M": M,
        "t": rep.t,
        "alpha_star": rep.alpha_star,
        "L1": rep.L1,
        "L2": rep.L2,
        "R1": rep.R1,
        "R2": rep.R2,
        "R_C": rep.R_C,
        "envelope": env_val,
        "lower_bound": lb,
        "R_MN": rep.R_MN,
        "R_D2D": rep.R_D2D,
        "G_c": rep.G_c,
        "G_p": rep.G_p,
        "gap_ratio": gap,
    }
    row = {}
    for col in CSV_COLUMNS:
        v = vals[col]
        if col in RATIONAL_COLUMNS:
            frac = None if v is None else Fraction(v)
            row[col] = _dec(frac)
            row[col + "_exact"] = _exact(frac)
        else:
            row[col] = str(v)
    return row


def cmd_sweep(args) -> int:
    params = SystemParams(
        N=args.files, K=args.users, M=Fraction(0), alpha_max=args.alpha_max
    )
    env = envelope(params)
    grid = memory_grid(params.N, params.K)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(
            pool.map(
                lambda M: _sweep_row(params.N, params.K, params.alpha_max, M, env),
                grid,
            )
        )
    header = []
    for col in CSV_COLUMNS:
        header.append(col)
        if col in RATIONAL_COLUMNS:
            header.append(col + "_exact")
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    if args.out:
        print(f"{len(rows)} rows written to {args.out}")
    return EXIT_OK


def _verify_schedule_file(path: str) -> int:
    try:
        with open(path) as fp:
            schedule = import_schedule(fp)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read schedule: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    params, d = schedule.params, schedule.derived
    caches = fill_caches(params, d)
    demands = schedule.demand_map
    report = validate_schedule(schedule, caches, demands, d)
    if report.ok:
        print(
            f"schedule valid: {schedule.user_slot_count} user slots, "
            f"{schedule.server_symbol_count} server symbols"
        )
        return EXIT_OK
    for f in report.failures:
        print(f"violation {f}", file=sys.stderr)
    return EXIT_SCHEDULING


def _verify_grid(args) -> list[tuple[int, int, int]]:
    grid = []
    for N in range(args.grid_files_min, args.grid_files_max + 1):
        for K in range(2, min(N, args.grid_users_max) + 1):
            for amax in range(1, K // 2 + 1):
                grid.append((N, K, amax))
    return grid


def cmd_verify(args) -> int:
    if args.schedule:
        return _verify_schedule_file(args.schedule)
    grid = _verify_grid(args)
    failures = []
    rep = verify_gap(grid)
    for N, K, amax, M, ratio in rep.violations:
        failures.append(f"gap: N={N} K={K} alpha_max={amax} M={M} ratio={ratio} > 31")
    # Pointwise invariants on every config: bound <= envelope <= baselines,
    # and the two gain identities.
    def check(cfg: tuple[int, int, int]) -> list[str]:
        N, K, amax = cfg
        errs = []
        env = envelope(SystemParams(N=N, K=K, M=Fraction(0), alpha_max=amax))
        for M in memory_grid(N, K):
            p = SystemParams(N=N, K=K, M=M, alpha_max=amax)
            tag = f"N={N} K={K} alpha_max={amax} M={M}"
            lb, up, rc = lower_bound(p), env(M), rate_RC(p)
            if lb > up:
                errs.append(f"bound-vs-envelope: {tag}: {lb} > {up}")
            if up > rc:
                errs.append(f"envelope-above-corner: {tag}: {up} > {rc}")
            rep = delay_report(p)
            if rc > rep.R_MN:
                errs.append(f"cooperation-gain: {tag}: R_C {rc} > R_MN {rep.R_MN}")
            if rc != rep.R_MN * rep.G_c:
                errs.append(f"identity-Gc: {tag}")
            if rep.t >= 1 and M > 0:
                d2d = baseline_D2D(p)
                if rc > d2d:
                    errs.append(f"parallel-gain: {tag}: R_C {rc} > R_D2D {d2d}")
                if rep.G_p is None or rc != d2d * rep.G_p:
                    errs.append(f"identity-Gp: {tag}")
            if M < N and max(rep.R1, rep.R2) != rc:
                errs.append(f"allocation-balance: {tag}")
        return errs

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for errs in pool.map(check, grid):
            failures.extend(errs)
    print(f"{len(grid)} configurations checked")
    print(f"max gap ratio: {rep.max_ratio} ({float(rep.max_ratio):.4f}) at {rep.argmax}")
    if failures:
        for f in failures:
            print(f"violation {f}", file=sys.stderr)
        return EXIT_SCHEDULING
    print("all invariants hold")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopcache",
        description="Coded caching with user cooperation: analysis and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cache=True):
        p.add_argument("--files", type=int, required=True, help="library size N")
        p.add_argument("--users", type=int, required=True, help="user count K")
        if cache:
            p.add_argument(
                "--cache", type=str, required=True, help="cache size M (fraction ok, e.g. 4 or 8/3)"
            )
        p.add_argument("--alpha-max", type=int, required=True, help="max concurrent user senders")

    rep = sub.add_parser("report", help="closed-form delay/gain/bound report")
    common(rep)
    rep.add_argument("--file-bits", type=int, default=None, help="file size F in bits")
    rep.set_defaults(func=cmd_report)

    sim = sub.add_parser("simulate", help="build, validate, execute and decode a schedule")
    common(sim)
    sim.add_argument("--seed", type=int, default=0, help="seed for payloads and demands")
    sim.add_argument("--file-bits", type=int, default=None, help="file size F in bits")
    sim.add_argument(
        "--target-bits", type=int, default=4096, help="approximate file size when F not given"
    )
    sim.add_argument("--out", type=str, default=None, help="write schedule JSON here")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="CSV over the memory grid M in {0, N/K, ..., N}")
    common(sw, cache=False)
    sw.add_argument("--out", type=str, default=None, help="CSV output path (default stdout)")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="constant-gap and invariant sweep, or schedule check")
    ver.add_argument("--schedule", type=str, default=None, help="validate this schedule file")
    ver.add_argument("--grid-files-min", type=int, default=4)
    ver.add_argument("--grid-files-max", type=int, default=40)
    ver.add_argument("--grid-users-max", type=int, default=12)
    ver.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, SplitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SchedulingError as exc:
        print(f"scheduling failed: {exc}", file=sys.stderr)
        return EXIT_SCHEDULING
    except DecodeError as exc:
        print(f"decode failed: {exc}", file=sys.stderr)
        return EXIT_DECODE


if __name__ == "__main__":
    raise SystemExit(main())
