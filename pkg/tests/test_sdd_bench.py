"""Dataset I/O, benchmark runs, result comparison, summaries, and the CLI."""

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxroots.bench import (
    ConsistencyReport,
    RunRecord,
    SolutionSet,
    compare_results,
    config_fingerprint,
    read_records_csv,
    read_solution_file,
    render_output,
    render_solution,
    run_benchmark,
    summarize,
    write_records_csv,
)
from boxroots.cli import main
from boxroots.interval import Box
from boxroots.sdd import (
    SddInstance,
    decode_result,
    encode_result,
    format_box,
    format_float,
    load_sdd,
    parse_box,
    write_sdd,
)
from boxroots.solver import SolverConfig

ONE_ROOT = "vars x\nbox x in [-1, 2]\neq x - 1\n"
TWO_ROOTS = "vars x\nbox x in [-2, 2]\neq x^2 - 1\n"
CIRCLE_LINE = (
    "vars x, y\nbox x in [-2, 2]\nbox y in [-2, 2]\n"
    "eq x^2 + y^2 - 1\neq x - y\n"
)


def make_instance(root, rel, text=ONE_ROOT, extra=()):
    d = root / rel
    d.mkdir(parents=True)
    (d / "sys.txt").write_text(text)
    for name, content in extra:
        (d / name).write_text(content)
    return d


# ---------------------------------------------------------------------------
# load_sdd / write_sdd


def test_load_missing_root_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_sdd(tmp_path / "nowhere")


def test_load_empty_root(tmp_path):
    assert load_sdd(tmp_path) == []


def test_load_single_instance_only_sys(tmp_path):
    make_instance(tmp_path, "non-parametric/polynomial/a")
    insts = load_sdd(tmp_path)
    assert len(insts) == 1
    inst = insts[0]
    assert inst.id == "non-parametric/polynomial/a"
    assert inst.category == "polynomial"
    assert set(inst.files) == {"sys.txt"}  # reference files absent
    assert inst.system().var_names == ("x",)


def test_load_parametric_family(tmp_path):
    fam = tmp_path / "parametric" / "toy"
    for k in range(3):
        make_instance(tmp_path, f"parametric/toy/instances/{k:04d}")
    (fam / "parameter.txt").write_text("0000: seed=0\n0001: seed=1\n0002: seed=2\n")
    (fam / "parametricSys.txt").write_text("family=toy\n")
    insts = load_sdd(tmp_path)
    assert len(insts) == 3
    assert all(i.category == "toy" for i in insts)
    assert all(set(i.family_files) == {"parameter.txt", "parametricSys.txt"}
               for i in insts)


def test_load_skips_malformed(tmp_path):
    make_instance(tmp_path, "non-parametric/polynomial/good")
    make_instance(tmp_path, "non-parametric/polynomial/bad", text="vars x\nbox x in [oops]\n")
    (tmp_path / "non-parametric" / "polynomial" / "empty").mkdir()
    skipped = []
    insts = load_sdd(tmp_path, skipped)
    assert [i.id for i in insts] == ["non-parametric/polynomial/good"]
    reasons = dict(skipped)
    assert "non-parametric/polynomial/bad" in reasons
    assert reasons["non-parametric/polynomial/empty"] == "no sys.txt"


def test_round_trip_byte_identical(tmp_path):
    src = tmp_path / "src"
    make_instance(src, "non-parametric/polynomial/a", extra=[
        ("output.txt", "status=complete\ncertified=1\n"),
        ("solution.txt", "certified [1,1]\n"),
        ("info.txt", "origin: hand written\n"),
    ])
    make_instance(src, "non-parametric/non-polynomial/b",
                  text="vars x\nbox x in [0, 2]\neq sin(x)\n")
    for k in range(2):
        make_instance(src, f"parametric/toy/instances/{k:04d}")
    (src / "parametric" / "toy" / "parameter.txt").write_text("0000: s=0\n0001: s=1\n")
    (src / "parametric" / "toy" / "parametricSys.txt").write_text("family=toy\n")

    dst = tmp_path / "dst"
    write_sdd(load_sdd(src), dst)
    src_files = sorted(p.relative_to(src) for p in src.rglob("*") if p.is_file())
    dst_files = sorted(p.relative_to(dst) for p in dst.rglob("*") if p.is_file())
    assert src_files == dst_files
    for rel in src_files:
        assert (dst / rel).read_bytes() == (src / rel).read_bytes()


def test_write_back_into_same_root_is_noop(tmp_path):
    make_instance(tmp_path, "non-parametric/polynomial/a")
    before = (tmp_path / "non-parametric/polynomial/a/sys.txt").read_bytes()
    write_sdd(load_sdd(tmp_path), tmp_path)
    assert (tmp_path / "non-parametric/polynomial/a/sys.txt").read_bytes() == before


# ---------------------------------------------------------------------------
# result-file syntax


def test_box_format_fixed_example():
    b = Box([0.1, -2.0], [0.25, 3.5])
    text = format_box(b)
    assert text == "[0.10000000000000001,0.25] x [-2,3.5]"
    back = parse_box(text)
    assert back.lo == b.lo and back.hi == b.hi


@given(st.lists(st.tuples(
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.floats(allow_nan=False, allow_infinity=False, width=64)),
    min_size=1, max_size=4))
def test_box_format_round_trips_exactly(pairs):
    lo = [min(a, b) for a, b in pairs]
    hi = [max(a, b) for a, b in pairs]
    b = Box(lo, hi)
    back = parse_box(format_box(b))
    assert back.lo == b.lo and back.hi == b.hi


def test_parse_box_rejects_garbage():
    with pytest.raises(ValueError):
        parse_box("1,2 x 3,4")
    with pytest.raises(ValueError):
        parse_box("[1;2]")
    with pytest.raises(ValueError):
        parse_box("")


def test_result_encode_decode_round_trip():
    header = {"solver": "boxroots 0.1.0", "status": "complete", "certified": 2}
    sections = {
        "certified": [Box([0.0], [1.0]), Box([2.0], [3.0])],
        "unknown": [Box([-1.0, -1.0], [1.0, 1.0])],
    }
    header2, sections2 = decode_result(encode_result(header, sections))
    assert header2 == {k: str(v) for k, v in header.items()}
    assert [b.lo for b in sections2["certified"]] == [[0.0], [2.0]]
    assert sections2["unknown"][0].hi == [1.0, 1.0]


def test_decode_rejects_unlabelled_line():
    with pytest.raises(ValueError):
        decode_result(b"status=ok\njust some text\n")


# ---------------------------------------------------------------------------
# run_benchmark


def test_run_benchmark_three_trivial_instances(tmp_path):
    for name, text in (("a", ONE_ROOT), ("b", TWO_ROOTS), ("c", CIRCLE_LINE)):
        make_instance(tmp_path, f"non-parametric/polynomial/{name}", text=text)
    insts = load_sdd(tmp_path)
    records = run_benchmark(insts, SolverConfig(eps=1e-6, timeout=60), jobs=1)
    assert [r.status for r in records] == ["complete"] * 3
    assert all(r.wall_time > 0 for r in records)
    assert all(r.parse_time > 0 for r in records)
    assert [r.certified for r in records] == [1, 2, 2]
    # result files appeared next to each sys.txt
    for inst in insts:
        assert (inst.path / "output.txt").is_file()
        assert (inst.path / "solution.txt").is_file()
        sol = read_solution_file(inst.path / "solution.txt")
        assert len(sol.certified) == int(sol.meta["certified"])


def test_run_benchmark_timeout_record(tmp_path):
    # 9-var platform pose instance: far too hard for a 0.3 s budget
    from boxroots.generators import StewartParams, gen_stewart
    from boxroots.expression import system_to_text

    d = tmp_path / "non-parametric" / "polynomial" / "hard"
    d.mkdir(parents=True)
    (d / "sys.txt").write_text(system_to_text(gen_stewart(StewartParams(seed=3))))
    records = run_benchmark(load_sdd(tmp_path), SolverConfig(eps=1e-8, timeout=0.3))
    assert len(records) == 1
    assert records[0].status == "timeout"
    assert 0.3 <= records[0].wall_time < 5.0  # stops near the budget


def test_run_benchmark_error_record_continues(tmp_path):
    make_instance(tmp_path, "non-parametric/polynomial/a")
    make_instance(tmp_path, "non-parametric/polynomial/odd",
                  text="nonsquare\nvars x, y\nbox x in [0, 1]\nbox y in [0, 1]\neq x - y\n")
    records = run_benchmark(load_sdd(tmp_path), SolverConfig(timeout=30))
    by_id = {r.instance_id.rsplit("/", 1)[1]: r for r in records}
    assert by_id["a"].status == "complete"
    assert by_id["odd"].status == "error"
    out = (tmp_path / "non-parametric/polynomial/odd/output.txt").read_text()
    assert "status=error" in out and "error=" in out


def test_run_benchmark_rerun_deterministic(tmp_path):
    for name, text in (("a", TWO_ROOTS), ("b", CIRCLE_LINE)):
        make_instance(tmp_path, f"non-parametric/polynomial/{name}", text=text)
    cfg = SolverConfig(eps=1e-6, timeout=60)
    first = run_benchmark(load_sdd(tmp_path), cfg)
    second = run_benchmark(load_sdd(tmp_path), cfg)
    assert [(r.certified, r.unknown, r.cells, r.status) for r in first] == \
           [(r.certified, r.unknown, r.cells, r.status) for r in second]


def test_run_benchmark_parallel_matches_sequential(tmp_path):
    for name, text in (("a", ONE_ROOT), ("b", TWO_ROOTS), ("c", CIRCLE_LINE)):
        make_instance(tmp_path, f"non-parametric/polynomial/{name}", text=text)
    cfg = SolverConfig(eps=1e-6, timeout=60)
    seq = run_benchmark(load_sdd(tmp_path), cfg, jobs=1)
    par = run_benchmark(load_sdd(tmp_path), cfg, jobs=3)
    key = lambda rs: [(r.instance_id, r.status, r.certified, r.unknown, r.cells)
                      for r in rs]
    assert key(seq) == key(par)


def test_run_benchmark_write_false_leaves_files_alone(tmp_path):
    d = make_instance(tmp_path, "non-parametric/polynomial/a")
    run_benchmark(load_sdd(tmp_path), SolverConfig(timeout=30), write=False)
    assert sorted(p.name for p in d.iterdir()) == ["sys.txt"]


def test_run_benchmark_rejects_bad_jobs(tmp_path):
    with pytest.raises(ValueError):
        run_benchmark([], jobs=0)


def test_records_csv_round_trip(tmp_path):
    records = [
        RunRecord("a", "eps=1e-06", "complete", 0.125, 0.001, 2, 0, 17),
        RunRecord("b", "eps=1e-06", "timeout", 1000.0, 0.002, 1, 5, 90210),
        RunRecord("c", "eps=1e-06", "error", 0.0, 0.0005, 0, 0, 0),
    ]
    path = tmp_path / "records.csv"
    write_records_csv(records, path)
    assert read_records_csv(path) == records


def test_config_fingerprint_reflects_fields():
    a = config_fingerprint(SolverConfig())
    b = config_fingerprint(SolverConfig(eps=1e-8))
    assert a != b
    assert "eps=1e-08" in b and "bisector=smear_rel" in a


# ---------------------------------------------------------------------------
# compare_results


def pt_box(*coords):
    return Box(list(coords), list(coords))


def test_compare_identical_sets_all_matched():
    s = SolutionSet([pt_box(0.0, 1.0), pt_box(2.0, 3.0)], [], {})
    rep = compare_results(s, s, 1e-9)
    assert (rep.matched, rep.consistent_suspect, rep.discrepancy) == (2, 0, 0)
    assert rep.pairs == [(0, 0), (1, 1)]


def test_compare_root_inside_unknown_is_suspect():
    a = SolutionSet([pt_box(0.0), pt_box(5.0)], [], {})
    b = SolutionSet([pt_box(0.0)], [Box([4.9], [5.1])], {})
    rep = compare_results(a, b, 1e-9)
    assert rep.matched == 1
    assert rep.consistent_suspect == 1 and rep.suspect_a == [1]
    assert rep.discrepancy == 0


def test_compare_far_root_is_discrepancy():
    a = SolutionSet([pt_box(0.0)], [], {})
    b = SolutionSet([pt_box(0.0), pt_box(40.0)], [Box([-1.0], [1.0])], {})
    rep = compare_results(a, b, 1e-9)
    assert rep.matched == 1
    assert rep.consistent_suspect == 0
    assert rep.discrepancy == 1 and rep.discrepancy_b == [1]


def test_compare_is_idempotent():
    a = SolutionSet([pt_box(0.0), pt_box(1.0)], [Box([2.0], [3.0])], {})
    b = SolutionSet([pt_box(1.0), pt_box(2.5)], [], {})
    first = compare_results(a, b, 0.5)
    second = compare_results(a, b, 0.5)
    assert first == second


def test_compare_matched_count_uses_maximum_matching():
    # chain a0-b0-a1-b1: a greedy pairing could stop at one pair
    a = SolutionSet([pt_box(0.0), pt_box(1.0)], [], {})
    b = SolutionSet([pt_box(0.5), pt_box(1.5)], [], {})
    rep = compare_results(a, b, 0.6)
    assert rep.matched == 2


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-5, 5).map(lambda v: round(v, 2)), max_size=5),
    st.lists(st.floats(-5, 5).map(lambda v: round(v, 2)), max_size=5),
    st.floats(0.01, 2.0),
)
def test_compare_matched_count_symmetric(xs, ys, tol):
    a = SolutionSet([pt_box(x) for x in xs], [], {})
    b = SolutionSet([pt_box(y) for y in ys], [], {})
    assert compare_results(a, b, tol).matched == compare_results(b, a, tol).matched


# ---------------------------------------------------------------------------
# summarize


def rec(t, status="complete", roots=1):
    return RunRecord("x", "cfg", status, t, 0.0, roots, 0, 1)


def test_summarize_bins_fixed_example():
    records = [rec(0.5), rec(5.0), rec(50.0), rec(1000.0, status="timeout")]
    s = summarize(records)
    assert s.bins["<=1s"] == 1
    assert s.bins["1-10s"] == 1
    assert s.bins["10-100s"] == 1
    assert s.bins["100-1000s"] == 0
    assert s.bins["timeout"] == 1
    assert s.bins["error"] == 0


def test_summarize_empty_records():
    s = summarize([])
    assert all(v == 0 for v in s.bins.values())
    assert s.cumulative == [] and s.root_counts == {} and s.n_records == 0


def test_summarize_cumulative_prefix_sums():
    records = [rec(3.0), rec(1.0), rec(2.0)]
    s = summarize(records)
    assert s.cumulative == [(1.0, 1.0), (2.0, 3.0), (3.0, 6.0)]


def test_summarize_excludes_timeouts_and_errors_from_curve():
    records = [rec(1.0), rec(999.0, status="timeout"), rec(0.0, status="error")]
    s = summarize(records)
    assert s.cumulative == [(1.0, 1.0)]


def test_summarize_root_count_distribution():
    records = [rec(1.0, roots=2), rec(1.0, roots=2), rec(1.0, roots=0)]
    s = summarize(records)
    assert s.root_counts == {0: 1, 2: 2}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(
    st.floats(0.001, 2000.0),
    st.sampled_from(["complete", "target_reached", "timeout", "error"]),
    st.integers(0, 6))))
def test_summarize_bin_totals_equal_record_count(entries):
    records = [rec(t, status=status, roots=n) for t, status, n in entries]
    s = summarize(records)
    assert sum(s.bins.values()) == len(records)
    assert sum(s.root_counts.values()) == len(records)


def test_summary_text_and_csv(tmp_path):
    s = summarize([rec(0.5, roots=2), rec(20.0), rec(1.0, status="timeout")])
    text = s.to_text()
    assert "records: 3" in text and "timing bins" in text
    paths = s.write_csv(tmp_path)
    assert [p.name for p in paths] == ["bins.csv", "cumulative.csv", "roots.csv"]
    lines = (tmp_path / "bins.csv").read_text().splitlines()
    assert lines[0] == "bin,count" and "timeout,1" in lines


# ---------------------------------------------------------------------------
# render helpers


def test_render_output_and_solution():
    r = RunRecord("a", "cfg", "complete", 0.5, 0.01, 1, 1, 9)
    header, _ = decode_result(render_output(r))
    assert header["status"] == "complete"
    assert header["cells"] == "9"
    assert float(header["time"]) == 0.5
    sol = render_solution(r, [Box([1.0], [2.0])], [Box([3.0], [4.0])])
    header, sections = decode_result(sol)
    assert header["solver"].startswith("boxroots")
    assert len(sections["certified"]) == 1 and len(sections["unknown"]) == 1


def test_render_output_carries_error_message():
    r = RunRecord("a", "cfg", "error", 0.0, 0.0, 0, 0, 0)
    header, _ = decode_result(render_output(r, "ValueError: solve requires a square system"))
    assert header["error"].startswith("ValueError")


# ---------------------------------------------------------------------------
# CLI


def test_cli_solve_prints_boxes(tmp_path, capsys):
    f = tmp_path / "sys.txt"
    f.write_text(TWO_ROOTS)
    rc = main(["solve", str(f), "-e", "1e-6"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "status=complete" in out
    assert "certified=2" in out
    assert out.count("certified [") == 2


def test_cli_solve_number_limits_roots(tmp_path, capsys):
    f = tmp_path / "sys.txt"
    f.write_text(TWO_ROOTS)
    rc = main(["solve", str(f), "--number", "1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "status=target_reached" in out
    assert "certified=1" in out


def test_cli_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as e:
        main(["solve"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["solve", "x.txt", "--number", "zero"])
    assert e.value.code == 1


def test_cli_missing_file_exits_2(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.txt")]) == 2


def test_cli_bad_eps_is_usage_error(tmp_path, capsys):
    f = tmp_path / "sys.txt"
    f.write_text(ONE_ROOT)
    assert main(["solve", str(f), "-e", "-1"]) == 1


def test_cli_gen_bench_report_round(tmp_path, capsys):
    root = tmp_path / "sdd"
    rc = main(["gen", "kuramoto", "--count", "2", "--seed", "5", "--N", "2",
               "--out", str(root)])
    assert rc == 0
    fam = root / "parametric" / "kuramoto"
    assert (fam / "parameter.txt").is_file()
    assert (fam / "parametricSys.txt").is_file()
    assert (fam / "instances" / "0000" / "sys.txt").is_file()
    assert (fam / "instances" / "0001" / "info.txt").is_file()

    rc = main(["bench", str(root), "--jobs", "1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert (root / "records.csv").is_file()
    assert "timing bins" in out

    rc = main(["report", str(root / "records.csv"), "--csv-dir", str(tmp_path / "csv")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "records: 2" in out
    assert (tmp_path / "csv" / "bins.csv").is_file()


def test_cli_bench_flags_instance_errors(tmp_path, capsys):
    make_instance(tmp_path, "non-parametric/polynomial/bad",
                  text="vars x\nbox x in [oops]\n")
    make_instance(tmp_path, "non-parametric/polynomial/good")
    assert main(["bench", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "skipped" in err


def test_cli_compare_self(tmp_path, capsys):
    d = make_instance(tmp_path, "non-parametric/polynomial/a", text=TWO_ROOTS)
    run_benchmark(load_sdd(tmp_path), SolverConfig(timeout=30))
    rc = main(["compare", str(d), str(d), "--tol", "1e-8"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "matched=2" in out
    assert "discrepancy=0" in out


def test_cli_gen_config_template(capsys):
    rc = main(["gen", "flash", "--correlations-template"])
    assert rc == 0
    template = json.loads(capsys.readouterr().out)
    assert set(template) == {"h_liquid", "h_vapor", "h_feed", "p_sat"}


def test_cli_gen_flash_without_correlations_fails(tmp_path, capsys):
    rc = main(["gen", "flash", "--count", "1", "--out", str(tmp_path / "s")])
    assert rc == 1
    assert "correlation coefficients missing" in capsys.readouterr().err


def test_cli_gen_robot_with_end(tmp_path):
    root = tmp_path / "sdd"
    rc = main(["gen", "planar-robot", "--count", "1", "--m", "2",
               "--lengths", "1,1", "--end", "1,1", "--out", str(root)])
    assert rc == 0
    text = (root / "parametric" / "planar-robot" / "instances" / "0000" /
            "sys.txt").read_text()
    assert "# end: 1 1" in text
    assert "# root:" not in text  # explicit target carries no embedded root
