"""Batch solving over dataset trees, result comparison, and run summaries.

run_benchmark solves each instance under one solver configuration and
drops output.txt / solution.txt next to its sys.txt.  Parallel runs
(jobs > 1) spread whole instances over worker processes; a single solve
is never split, so per-instance results match the sequential run.
Solve wall time is measured inside the solver and excludes parsing,
which is timed separately.

compare_results cross-checks two result sets for the same instance:
certified roots are matched bipartitely within a tolerance, and each
unmatched root is either explained by an unknown box of the other set
(consistent-suspect) or flagged as a discrepancy.

summarize turns run records into timing bins, a cumulative-runtime
curve, and a root-count distribution, as CSV files plus a plain-text
report.
"""

from __future__ import annotations

import csv
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from .expression import parse_system
from .interval import Box
from .sdd import encode_result, decode_result, format_float
from .solver import SolverConfig, solve

SOLVER_ID = "boxroots 0.1.0"
STATUS_ERROR = "error"

_BIN_LABELS = ("<=1s", "1-10s", "10-100s", "100-1000s", "timeout", "error")


def config_fingerprint(cfg: SolverConfig) -> str:
    """Stable one-line rendering of every config knob, for result headers."""
    return ";".join(f"{f.name}={getattr(cfg, f.name)}" for f in fields(cfg))


@dataclass
class RunRecord:
    """Outcome of solving one instance under one configuration."""

    instance_id: str
    config: str
    status: str  # complete | target_reached | timeout | error
    wall_time: float  # solve only; parsing is timed separately
    parse_time: float
    certified: int
    unknown: int
    cells: int


_CSV_FIELDS = (
    "instance_id",
    "config",
    "status",
    "wall_time",
    "parse_time",
    "certified",
    "unknown",
    "cells",
)


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_FIELDS)
        for r in records:
            w.writerow(
                [
                    r.instance_id,
                    r.config,
                    r.status,
                    format_float(r.wall_time),
                    format_float(r.parse_time),
                    r.certified,
                    r.unknown,
                    r.cells,
                ]
            )


def read_records_csv(path) -> list[RunRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                RunRecord(
                    instance_id=row["instance_id"],
                    config=row["config"],
                    status=row["status"],
                    wall_time=float(row["wall_time"]),
                    parse_time=float(row["parse_time"]),
                    certified=int(row["certified"]),
                    unknown=int(row["unknown"]),
                    cells=int(row["cells"]),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Benchmark runs
# ---------------------------------------------------------------------------


def _errmsg(exc: BaseException) -> str:
    text = str(exc).replace("\n", " ").strip()
    return f"{type(exc).__name__}: {text}" if text else type(exc).__name__


def _solve_payload(payload):
    """Worker body: parse and solve one instance from its raw text.

    Returns (record, certified endpoint pairs, unknown endpoint pairs,
    error message or None); boxes travel as plain lists so the payload
    stays picklable for process pools.
    """
    inst_id, sys_text, cfg = payload
    fp = config_fingerprint(cfg)
    t0 = time.monotonic()
    try:
        system = parse_system(sys_text)
    except Exception as exc:
        rec = RunRecord(inst_id, fp, STATUS_ERROR, 0.0, time.monotonic() - t0, 0, 0, 0)
        return rec, [], [], _errmsg(exc)
    parse_time = time.monotonic() - t0
    try:
        rep = solve(system, cfg)
    except Exception as exc:
        rec = RunRecord(inst_id, fp, STATUS_ERROR, 0.0, parse_time, 0, 0, 0)
        return rec, [], [], _errmsg(exc)
    rec = RunRecord(
        inst_id,
        fp,
        rep.status,
        rep.stats["wall_time"],
        parse_time,
        len(rep.certified),
        len(rep.unknown),
        rep.stats["cells_processed"],
    )
    cert = [(list(b.lo), list(b.hi)) for b in rep.certified]
    unk = [(list(b.lo), list(b.hi)) for b in rep.unknown]
    return rec, cert, unk, None


def render_output(rec: RunRecord, error: str | None = None) -> bytes:
    header = {
        "solver": SOLVER_ID,
        "config": rec.config,
        "status": rec.status,
        "time": format_float(rec.wall_time),
        "parse_time": format_float(rec.parse_time),
        "certified": rec.certified,
        "unknown": rec.unknown,
        "cells": rec.cells,
    }
    if error:
        header["error"] = error
    return encode_result(header)


def render_solution(rec: RunRecord, certified, unknown) -> bytes:
    header = {
        "solver": SOLVER_ID,
        "config": rec.config,
        "status": rec.status,
        "certified": rec.certified,
        "unknown": rec.unknown,
    }
    return encode_result(header, {"certified": certified, "unknown": unknown})


def run_benchmark(instances, cfg: SolverConfig | None = None, jobs: int = 1,
                  write: bool = True) -> list[RunRecord]:
    """Solve every instance under one configuration.

    With write=True each instance directory (when it has one) receives
    fresh output.txt and solution.txt files and the in-memory instance is
    updated to match.  A parse failure or solver exception yields a record
    with status error and the run continues.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if cfg is None:
        cfg = SolverConfig()
    payloads = [(inst.id, inst.sys_text, cfg) for inst in instances]
    if jobs == 1 or len(payloads) <= 1:
        results = [_solve_payload(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_payload, payloads))
    records = []
    for inst, (rec, cert, unk, err) in zip(instances, results):
        records.append(rec)
        if not write:
            continue
        out_b = render_output(rec, err)
        sol_b = render_solution(
            rec,
            [Box._raw(lo, hi) for lo, hi in cert],
            [Box._raw(lo, hi) for lo, hi in unk],
        )
        inst.files["output.txt"] = out_b
        inst.files["solution.txt"] = sol_b
        if inst.path is not None:
            (inst.path / "output.txt").write_bytes(out_b)
            (inst.path / "solution.txt").write_bytes(sol_b)
    return records


# ---------------------------------------------------------------------------
# Result comparison
# ---------------------------------------------------------------------------


@dataclass
class SolutionSet:
    """Boxes reported for one instance, as read back from solution.txt."""

    certified: list
    unknown: list
    meta: dict


def read_solution_file(path) -> SolutionSet:
    header, sections = decode_result(Path(path).read_bytes())
    return SolutionSet(
        certified=sections.get("certified", []),
        unknown=sections.get("unknown", []),
        meta=header,
    )


@dataclass
class ConsistencyReport:
    matched: int
    consistent_suspect: int
    discrepancy: int
    pairs: list  # (index in a.certified, index in b.certified)
    suspect_a: list  # unmatched a-roots sitting inside some unknown box of b
    suspect_b: list
    discrepancy_a: list
    discrepancy_b: list


def compare_results(a, b, tol: float) -> ConsistencyReport:
    """Match certified roots of two result sets for the same instance.

    Roots pair up when their enclosure midpoints agree within tol in every
    coordinate; the pairing is a maximum bipartite matching, so the matched
    count is the same whichever set comes first.  Leftover roots inside an
    unknown box of the other set count as consistent-suspect, the rest as
    discrepancies.
    """
    mids_a = [box.mid_point() for box in a.certified]
    mids_b = [box.mid_point() for box in b.certified]
    adj = []
    for pa in mids_a:
        cand = []
        for j, pb in enumerate(mids_b):
            d = max((abs(x - y) for x, y in zip(pa, pb)), default=0.0)
            if d <= tol:
                cand.append((d, j))
        cand.sort()
        adj.append([j for _, j in cand])

    match_b = [-1] * len(mids_b)

    def augment(u: int, seen: list) -> bool:
        for v in adj[u]:
            if seen[v]:
                continue
            seen[v] = True
            if match_b[v] == -1 or augment(match_b[v], seen):
                match_b[v] = u
                return True
        return False

    for u in range(len(adj)):
        augment(u, [False] * len(mids_b))
    pairs = sorted((u, v) for v, u in enumerate(match_b) if u != -1)
    matched_a = {u for u, _ in pairs}
    matched_b = {v for _, v in pairs}

    def classify(mids, matched, other_unknown):
        suspect, disc = [], []
        for i, pm in enumerate(mids):
            if i in matched:
                continue
            if any(u.contains_point(pm) for u in other_unknown):
                suspect.append(i)
            else:
                disc.append(i)
        return suspect, disc

    suspect_a, disc_a = classify(mids_a, matched_a, b.unknown)
    suspect_b, disc_b = classify(mids_b, matched_b, a.unknown)
    return ConsistencyReport(
        matched=len(pairs),
        consistent_suspect=len(suspect_a) + len(suspect_b),
        discrepancy=len(disc_a) + len(disc_b),
        pairs=pairs,
        suspect_a=suspect_a,
        suspect_b=suspect_b,
        discrepancy_a=disc_a,
        discrepancy_b=disc_b,
    )


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


@dataclass
class Summary:
    """Aggregate view of a record list.

    bins counts records per timing bin (error records get their own bin so
    the bin totals always add up to the record count); cumulative is the
    runtime curve over non-timeout, non-error records as (time, running
    total) points; root_counts maps certified-root count to the number of
    records reporting it.
    """

    bins: dict
    cumulative: list
    root_counts: dict
    n_records: int

    def to_text(self) -> str:
        lines = [f"records: {self.n_records}", "", "timing bins"]
        for label in _BIN_LABELS:
            lines.append(f"  {label:<10} {self.bins[label]}")
        lines.append("")
        lines.append("cumulative runtime (timeouts and errors excluded)")
        if self.cumulative:
            for t, total in self.cumulative:
                lines.append(f"  {format_float(t):<24} {format_float(total)}")
        else:
            lines.append("  (none)")
        lines.append("")
        lines.append("certified-root distribution")
        if self.root_counts:
            for roots, n in self.root_counts.items():
                lines.append(f"  {roots} roots: {n} records")
        else:
            lines.append("  (none)")
        return "\n".join(lines) + "\n"

    def write_csv(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        bins_path = directory / "bins.csv"
        with open(bins_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin", "count"])
            for label in _BIN_LABELS:
                w.writerow([label, self.bins[label]])
        cum_path = directory / "cumulative.csv"
        with open(cum_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "cumulative"])
            for t, total in self.cumulative:
                w.writerow([format_float(t), format_float(total)])
        roots_path = directory / "roots.csv"
        with open(roots_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["certified_roots", "records"])
            for roots, n in self.root_counts.items():
                w.writerow([roots, n])
        return [bins_path, cum_path, roots_path]


def summarize(records) -> Summary:
    bins = {label: 0 for label in _BIN_LABELS}
    times = []
    roots: Counter = Counter()
    for r in records:
        if r.status == "timeout":
            bins["timeout"] += 1
        elif r.status == STATUS_ERROR:
            bins["error"] += 1
        else:
            t = r.wall_time
            if t <= 1.0:
                bins["<=1s"] += 1
            elif t <= 10.0:
                bins["1-10s"] += 1
            elif t <= 100.0:
                bins["10-100s"] += 1
            else:
                bins["100-1000s"] += 1
            times.append(t)
        roots[r.certified] += 1
    times.sort()
    cumulative = []
    total = 0.0
    for t in times:
        total += t
        cumulative.append((t, total))
    return Summary(
        bins=bins,
        cumulative=cumulative,
        root_counts=dict(sorted(roots.items())),
        n_records=len(records),
    )
