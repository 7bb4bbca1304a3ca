"""Command-line front end.

Subcommands:

    solve    run the solver on one system file and print the boxes found
    bench    solve every instance in a dataset tree and record timings
    gen      generate parametric instance families into a dataset tree
    compare  cross-check two solution.txt files for the same instance
    report   summarize a records.csv produced by bench

Exit codes: 0 on success, 1 on usage errors, 2 when instances failed or
were skipped.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .bench import (
    STATUS_ERROR,
    compare_results,
    read_records_csv,
    read_solution_file,
    run_benchmark,
    summarize,
    write_records_csv,
)
from .expression import parse_system, system_to_text
from .generators import (
    CORRELATION_TEMPLATE,
    FlashParams,
    KuramotoParams,
    OrbitParams,
    RobotParams,
    StewartParams,
    gen_flash,
    gen_kuramoto,
    gen_orbit,
    gen_orbit_oracle,
    gen_planar_robot,
    gen_spatial_robot,
    gen_stewart,
)
from .generators.common import make_rng
from .sdd import format_box, load_sdd
from .solver import SolverConfig, solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INSTANCE_ERRORS = 2

GEN_FAMILIES = ("planar-robot", "spatial-robot", "stewart", "kuramoto", "flash", "orbit")


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; argparse's default of 2 is reserved for
    # instance-level failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _count_arg(text: str):
    if text == "all":
        return None
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("must be 'all' or a positive integer")
    if n < 1:
        raise argparse.ArgumentTypeError("must be 'all' or a positive integer")
    return n


def _floats_arg(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="boxroots", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one system file")
    p_solve.add_argument("system", help="path to a sys.txt system file")
    p_solve.add_argument("-e", "--eps", type=float, default=1e-6,
                         help="box tolerance (default 1e-6)")
    p_solve.add_argument("--timeout", type=float, default=1000.0,
                         help="time budget in seconds (default 1000)")
    p_solve.add_argument("--bisector", default="smear_rel",
                         help="branching policy (default smear_rel)")
    p_solve.add_argument("--node-select", default="dfs", dest="node_select",
                         help="worklist policy: dfs, bfs, min_mid_residual")
    p_solve.add_argument("--pipeline", default="hc4,hc4bc3,3b,hs",
                         help="contractor pipeline spec")
    p_solve.add_argument("--number", type=_count_arg, default=None,
                         help="stop after this many roots ('all' for every root)")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="run the solver over a dataset tree")
    p_bench.add_argument("root", help="dataset root directory")
    p_bench.add_argument("--config", help="JSON file of solver config fields")
    p_bench.add_argument("--jobs", type=int, default=1,
                         help="worker processes (instances run whole; default 1)")
    p_bench.set_defaults(func=cmd_bench)

    p_gen = sub.add_parser("gen", help="generate a parametric instance family")
    p_gen.add_argument("family", choices=GEN_FAMILIES)
    p_gen.add_argument("--count", type=int, default=1, help="instances to generate")
    p_gen.add_argument("--seed", type=int, default=0,
                       help="seed of the first instance; later ones increment")
    p_gen.add_argument("--out", default="sdd", help="dataset root to write into")
    p_gen.add_argument("--m", type=int, default=3, help="robot: number of links")
    p_gen.add_argument("--mode", help="robot: planar_trig, planar_poly, "
                       "spatial_trig, spatial_poly")
    p_gen.add_argument("--lengths", type=_floats_arg,
                       help="robot: comma-separated link lengths")
    p_gen.add_argument("--end", type=_floats_arg,
                       help="robot: explicit end-effector target")
    p_gen.add_argument("--N", type=int, default=3, dest="n_osc",
                       help="kuramoto: number of oscillators")
    p_gen.add_argument("--correlations",
                       help="flash: JSON file of correlation coefficients")
    p_gen.add_argument("--correlations-template", action="store_true",
                       help="flash: print an empty correlation file and exit")
    p_gen.add_argument("--random-geometry", action="store_true",
                       help="orbit: sample observer geometry instead of "
                       "constructing an ellipse with a known root")
    p_gen.add_argument("--no-ellipse-ineq", action="store_true",
                       help="orbit: drop the elliptical side inequality")
    p_gen.set_defaults(func=cmd_gen)

    p_cmp = sub.add_parser("compare", help="cross-check two result directories")
    p_cmp.add_argument("dir_a", help="instance directory holding solution.txt")
    p_cmp.add_argument("dir_b", help="instance directory holding solution.txt")
    p_cmp.add_argument("--tol", type=float, default=1e-6,
                       help="root matching tolerance (default 1e-6)")
    p_cmp.set_defaults(func=cmd_compare)

    p_rep = sub.add_parser("report", help="summarize a bench records.csv")
    p_rep.add_argument("records", help="records.csv written by bench")
    p_rep.add_argument("--csv-dir", help="also write bins/cumulative/roots CSVs here")
    p_rep.set_defaults(func=cmd_report)

    return parser


def cmd_solve(args) -> int:
    path = Path(args.system)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_INSTANCE_ERRORS
    t0 = time.monotonic()
    try:
        system = parse_system(text)
    except ValueError as exc:
        print(f"parse error in {path}: {exc}", file=sys.stderr)
        return EXIT_INSTANCE_ERRORS
    parse_time = time.monotonic() - t0
    try:
        cfg = SolverConfig(
            eps=args.eps,
            timeout=args.timeout,
            bisector=args.bisector,
            node_selection=args.node_select,
            pipeline=args.pipeline,
            target_count=args.number,
        )
    except ValueError as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rep = solve(system, cfg)
    except Exception as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_INSTANCE_ERRORS
    print(f"status={rep.status}")
    print(f"time={rep.stats['wall_time']:.6f}")
    print(f"parse_time={parse_time:.6f}")
    print(f"cells={rep.stats['cells_processed']}")
    print(f"certified={len(rep.certified)}")
    print(f"unknown={len(rep.unknown)}")
    for b in rep.certified:
        print("certified " + format_box(b))
    for b in rep.unknown:
        print("unknown " + format_box(b))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg_kwargs = {}
    if args.config:
        try:
            cfg_kwargs = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read config {args.config}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        cfg = SolverConfig(**cfg_kwargs)
    except (TypeError, ValueError) as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.jobs < 1:
        print("jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    skipped: list = []
    try:
        instances = load_sdd(args.root, skipped)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    for rel, reason in skipped:
        print(f"skipped {rel}: {reason}", file=sys.stderr)
    records = run_benchmark(instances, cfg, jobs=args.jobs)
    csv_path = Path(args.root) / "records.csv"
    write_records_csv(records, csv_path)
    print(summarize(records).to_text())
    print(f"records written to {csv_path}")
    failed = bool(skipped) or any(r.status == STATUS_ERROR for r in records)
    return EXIT_INSTANCE_ERRORS if failed else EXIT_OK


def _gen_instance(args, seed: int):
    """Build one system for the requested family; returns (system, summary)."""
    fam = args.family
    if fam in ("planar-robot", "spatial-robot"):
        planar = fam == "planar-robot"
        mode = args.mode or ("planar_trig" if planar else "spatial_trig")
        p = RobotParams(m=args.m, mode=mode, lengths=args.lengths, seed=seed,
                        end=args.end)
        system = gen_planar_robot(p) if planar else gen_spatial_robot(p)
        return system, f"seed={seed} m={p.m} mode={p.mode}"
    if fam == "stewart":
        return gen_stewart(StewartParams(seed=seed)), f"seed={seed}"
    if fam == "kuramoto":
        system = gen_kuramoto(KuramotoParams(N=args.n_osc, seed=seed))
        return system, f"seed={seed} N={args.n_osc}"
    if fam == "flash":
        corr = None
        if args.correlations:
            corr = json.loads(Path(args.correlations).read_text())
        rng = make_rng(seed)
        dp = float(rng.uniform(0.01, 0.1))
        p_feed = float(rng.uniform(0.6, 1.5))
        x1 = float(rng.uniform(0.05, 0.95))
        flow = float(rng.uniform(0.5, 5.0))
        p = FlashParams(dp=dp, p_feed=p_feed, x_feed1=x1, flow_feed=flow,
                        correlations=corr)
        summary = (f"seed={seed} dp={dp:.6g} p_feed={p_feed:.6g} "
                   f"x_feed1={x1:.6g} flow_feed={flow:.6g}")
        return gen_flash(p), summary
    if fam == "orbit":
        ellipse = not args.no_ellipse_ineq
        if args.random_geometry:
            system = gen_orbit(OrbitParams(seed=seed, ellipse_only=ellipse))
        else:
            system = gen_orbit_oracle(seed=seed, ellipse_only=ellipse)
        return system, f"seed={seed}"
    raise ValueError(f"unknown family {fam!r}")


def cmd_gen(args) -> int:
    if args.family == "flash" and args.correlations_template:
        print(json.dumps(CORRELATION_TEMPLATE, indent=2))
        return EXIT_OK
    if args.count < 1:
        print("count must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    entries = []
    try:
        for k in range(args.count):
            seed = args.seed + k
            system, summary = _gen_instance(args, seed)
            entries.append((f"{k:04d}", summary, system))
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    fam_dir = Path(args.out) / "parametric" / args.family
    inst_root = fam_dir / "instances"
    inst_root.mkdir(parents=True, exist_ok=True)
    for inst_id, summary, system in entries:
        d = inst_root / inst_id
        d.mkdir(exist_ok=True)
        (d / "sys.txt").write_text(system_to_text(system))
        (d / "info.txt").write_text(
            f"family={args.family}\ngenerator=boxroots 0.1.0\n{summary}\n"
        )
    (fam_dir / "parameter.txt").write_text(
        "".join(f"{inst_id}: {summary}\n" for inst_id, summary, _ in entries)
    )
    (fam_dir / "parametricSys.txt").write_text(
        f"family={args.family}\n"
        f"generator=boxroots 0.1.0\n"
        f"instances={len(entries)}\n"
        "# Each instances/<id>/sys.txt holds one specialization; parameter.txt\n"
        "# lists the generating parameter values per instance id.\n"
    )
    print(f"wrote {len(entries)} instances under {fam_dir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        a = read_solution_file(Path(args.dir_a) / "solution.txt")
        b = read_solution_file(Path(args.dir_b) / "solution.txt")
    except (OSError, ValueError) as exc:
        print(f"cannot load solutions: {exc}", file=sys.stderr)
        return EXIT_INSTANCE_ERRORS
    rep = compare_results(a, b, args.tol)
    print(f"matched={rep.matched}")
    print(f"consistent_suspect={rep.consistent_suspect}")
    print(f"discrepancy={rep.discrepancy}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        records = read_records_csv(args.records)
    except (OSError, KeyError, ValueError) as exc:
        print(f"cannot read records: {exc}", file=sys.stderr)
        return EXIT_INSTANCE_ERRORS
    s = summarize(records)
    print(s.to_text())
    if args.csv_dir:
        for p in s.write_csv(args.csv_dir):
            print(f"wrote {p}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
