"""Tests for the contraction operators.

Expected narrowed domains come from inverting the constraint by hand
(asin/log/root formulas); soundness fuzz relies on the fact that a
degenerate-box interval evaluation returning an exact float certifies the
true value at that point, giving rigorously-known satisfying points.
"""

import math
import random
import time

import pytest

from boxroots.interval import Box, Interval, IntervalMatrix
from boxroots.expression import parse_expression, parse_system
from boxroots.contractors import (
    ContractContext,
    ContractionResult,
    Pipeline,
    STAGES,
    bc3_revise,
    gauss_seidel,
    hansen_sengupta_step,
    hc4_revise,
    krawczyk_step,
    parse_pipeline,
    propagate,
    shave_3b,
)


def close(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# ---------------------------------------------------------------------------
# hc4_revise: single constraints
# ---------------------------------------------------------------------------


def test_revise_square():
    e = parse_expression("x^2 - 6.25", ["x"])
    box, gaps = hc4_revise(e, "=", Box([0.0], [5.0]))
    assert box is not None and not gaps
    assert close(box.lo[0], 2.5) and close(box.hi[0], 2.5)


def test_revise_square_two_sided_records_gap():
    e = parse_expression("x^2 - 6.25", ["x"])
    box, gaps = hc4_revise(e, "=", Box([-5.0], [5.0]))
    assert box is not None
    assert close(box.lo[0], -2.5) and close(box.hi[0], 2.5)
    assert len(gaps) == 1
    v, gl, gh = gaps[0]
    assert v == 0 and close(gl, -2.5) and close(gh, 2.5)


def test_revise_linear_pair_members():
    e = parse_expression("x + y - 2", ["x", "y"])
    box, _ = hc4_revise(e, "=", Box([0.0, 0.0], [10.0, 10.0]))
    assert close(box.lo[0], 0.0) and close(box.hi[0], 2.0)
    assert close(box.lo[1], 0.0) and close(box.hi[1], 2.0)


def test_revise_infeasible():
    e = parse_expression("x^2 + 1", ["x"])
    box, _ = hc4_revise(e, "=", Box([-5.0], [5.0]))
    assert box is None
    e = parse_expression("sin(x) - 2", ["x"])
    assert hc4_revise(e, "=", Box([0.0], [10.0]))[0] is None


def test_revise_undefined_everywhere_is_infeasible():
    e = parse_expression("log(x)", ["x"])
    box, _ = hc4_revise(e, "=", Box([-5.0], [-1.0]))
    assert box is None


def test_revise_inequality():
    e = parse_expression("x - 3", ["x"])
    box, _ = hc4_revise(e, "<=", Box([0.0], [10.0]))
    assert close(box.hi[0], 3.0) and box.lo[0] == 0.0
    box, _ = hc4_revise(e, ">=", Box([0.0], [10.0]))
    assert close(box.lo[0], 3.0) and box.hi[0] == 10.0
    # already satisfied: no change
    box, _ = hc4_revise(e, "<", Box([0.0], [1.0]))
    assert box.lo[0] == 0.0 and box.hi[0] == 1.0


def test_revise_sin_preimage():
    e = parse_expression("sin(x) - 0.5", ["x"])
    box, _ = hc4_revise(e, "=", Box([0.0], [10.0]))
    lo_true = math.asin(0.5)
    hi_true = 3.0 * math.pi - math.asin(0.5)  # last preimage below 10
    assert abs(box.lo[0] - lo_true) < 1e-9
    assert abs(box.hi[0] - hi_true) < 1e-9
    assert box.lo[0] <= lo_true and box.hi[0] >= hi_true


def test_revise_sin_negative_range():
    e = parse_expression("sin(x) + 1", ["x"])  # sin(x) = -1
    box, _ = hc4_revise(e, "=", Box([0.0], [7.0]))
    t = 1.5 * math.pi
    assert box.lo[0] <= t <= box.hi[0]
    assert box.hi[0] - box.lo[0] < 1e-6


def test_revise_cos_preimage():
    e = parse_expression("cos(x)", ["x"])
    box, _ = hc4_revise(e, "=", Box([0.0], [10.0]))
    assert abs(box.lo[0] - math.pi / 2) < 1e-9
    assert abs(box.hi[0] - 2.5 * math.pi) < 1e-9


def test_revise_tan_preimage():
    e = parse_expression("tan(x) - 1", ["x"])
    box, _ = hc4_revise(e, "=", Box([0.0], [10.0]))
    assert abs(box.lo[0] - math.pi / 4) < 1e-9
    assert abs(box.hi[0] - (2 * math.pi + math.pi / 4)) < 1e-9


def test_revise_exp_log_sqrt():
    box, _ = hc4_revise(parse_expression("exp(x) - 2", ["x"]), "=", Box([-10.0], [10.0]))
    assert close(box.lo[0], math.log(2), 1e-14) and close(box.hi[0], math.log(2), 1e-14)
    box, _ = hc4_revise(parse_expression("log(x) - 1", ["x"]), "=", Box([0.0], [10.0]))
    assert close(box.lo[0], math.e, 1e-14) and close(box.hi[0], math.e, 1e-14)
    box, _ = hc4_revise(parse_expression("sqrt(x) - 3", ["x"]), "=", Box([0.0], [100.0]))
    assert close(box.lo[0], 9.0) and close(box.hi[0], 9.0)


def test_revise_abs_and_pieces():
    e = parse_expression("abs(x) - 2", ["x"])
    box, gaps = hc4_revise(e, "=", Box([-5.0], [1.0]))
    assert close(box.lo[0], -2.0) and close(box.hi[0], -2.0)
    box, gaps = hc4_revise(e, "=", Box([-5.0], [5.0]))
    assert close(box.lo[0], -2.0) and close(box.hi[0], 2.0)
    assert gaps and gaps[0][0] == 0


def test_revise_tanh_atan():
    box, _ = hc4_revise(parse_expression("tanh(x) - 0.5", ["x"]), "=", Box([-5.0], [5.0]))
    assert close(box.lo[0], math.atanh(0.5), 1e-13)
    box, _ = hc4_revise(parse_expression("atan(x) - 1", ["x"]), "=", Box([-50.0], [50.0]))
    assert close(box.lo[0], math.tan(1.0), 1e-13)


def test_revise_pow_base():
    box, _ = hc4_revise(parse_expression("2^x - 8", ["x"]), "=", Box([-10.0], [10.0]))
    assert abs(box.lo[0] - 3.0) <= 4 * math.ulp(3.0)
    assert abs(box.hi[0] - 3.0) <= 4 * math.ulp(3.0)
    assert box.lo[0] <= 3.0 <= box.hi[0]
    # fractional base
    box, _ = hc4_revise(parse_expression("0.5^x - 4", ["x"]), "=", Box([-10.0], [10.0]))
    assert close(box.lo[0], -2.0, 1e-14) and close(box.hi[0], -2.0, 1e-14)


def test_revise_division():
    box, _ = hc4_revise(parse_expression("1/x - 2", ["x"]), "=", Box([0.1], [10.0]))
    assert close(box.lo[0], 0.5) and close(box.hi[0], 0.5)
    box, _ = hc4_revise(parse_expression("x/y - 2", ["x", "y"]), "=", Box([0.0, 1.0], [10.0, 2.0]))
    assert close(box.lo[0], 2.0) and close(box.hi[0], 4.0)
    assert close(box.lo[1], 1.0) and close(box.hi[1], 2.0)


def test_revise_negative_power_reciprocal():
    box, _ = hc4_revise(parse_expression("x^-2 - 4", ["x"]), "=", Box([0.0], [10.0]))
    assert close(box.lo[0], 0.5) and close(box.hi[0], 0.5)


def test_revise_keeps_exact_satisfying_points():
    """Rational arithmetic gives the true value of a random +,-,* tree at a
    dyadic point; shifting by it makes the point a true root, which revision
    must never discard."""
    from fractions import Fraction

    rng = random.Random(20260823)
    ops = ["+", "-", "*"]
    kept = 0
    for _ in range(300):
        n = rng.randint(1, 3)
        names = ["x", "y", "z"][:n]

        def leaf():
            if rng.random() < 0.5:
                return str(rng.randint(-4, 4))
            return names[rng.randrange(n)]

        t = leaf()
        for _ in range(rng.randint(1, 4)):
            t = f"({t} {rng.choice(ops)} {leaf()})"
        p = [float(rng.randint(-3, 3)) / 2 for _ in range(n)]
        env = {names[i]: Fraction(p[i]) for i in range(n)}
        true_val = eval(t, {"__builtins__": {}}, env)
        c = float(true_val)
        if Fraction(c) != true_val:
            continue  # not float-representable, skip
        shifted = f"{t} - ({c!r})" if c >= 0 else f"{t} + ({-c!r})"
        g = parse_expression(shifted, names)
        lo = [p[i] - rng.uniform(0.0, 2.0) for i in range(n)]
        hi = [p[i] + rng.uniform(0.0, 2.0) for i in range(n)]
        box, _ = hc4_revise(g, "=", Box(lo, hi))
        assert box is not None, (t, p)
        assert box.contains_point(p), (t, p, box)
        kept += 1
    assert kept > 250


def test_revise_inequality_soundness_fuzz():
    """Points whose rigorous enclosure proves f <= 0 must survive."""
    rng = random.Random(99)
    from boxroots.expression import tape_of

    texts = [
        "x*y - 2",
        "x^2 + y^2 - 3",
        "sin(x) + y",
        "exp(x) - y - 3",
        "abs(x) - y - 1",
    ]
    kept = 0
    for t in texts:
        f = parse_expression(t, ["x", "y"])
        for _ in range(200):
            p = [rng.uniform(-2, 2), rng.uniform(-2, 2)]
            out = tape_of(f).eval_interval(p, p)
            if out is None or out[1] > 0.0:
                continue
            lo = [p[i] - rng.uniform(0, 1.5) for i in range(2)]
            hi = [p[i] + rng.uniform(0, 1.5) for i in range(2)]
            box, _ = hc4_revise(f, "<=", Box(lo, hi))
            assert box is not None, (t, p)
            assert box.contains_point(p), (t, p, box)
            kept += 1
    assert kept > 100


# ---------------------------------------------------------------------------
# propagate
# ---------------------------------------------------------------------------


def test_propagate_linear_pair_reaches_hull_fixpoint():
    # {x - y = 0, x + y - 2 = 0} on [0,10]^2: the hull-consistent fixpoint
    # is [0,2]^2 (every remaining endpoint still has support), not the
    # solution point (1,1)
    s = parse_system(
        """vars x, y
box x in [0, 10]
box y in [0, 10]
eq x - y
eq x + y - 2
"""
    )
    box, _ = propagate(s, s.box)
    assert box is not None
    for i in range(2):
        assert abs(box.lo[i] - 0.0) < 1e-12
        assert abs(box.hi[i] - 2.0) < 1e-12
    assert box.contains_point([1.0, 1.0])


def test_propagate_infeasible_system():
    s = parse_system(
        """nonsquare
vars x, y
box x in [0, 1]
box y in [0, 1]
eq x - y
eq x - y + 1
"""
    )
    box, _ = propagate(s, s.box)
    assert box is None


def test_propagate_collects_gap():
    s = parse_system(
        """vars x
box x in [-5, 5]
eq x^2 - 6.25
"""
    )
    box, gaps = propagate(s, s.box)
    assert box is not None and gaps
    assert gaps[0][0] == 0


def test_propagate_respects_deadline():
    s = parse_system(
        """vars x, y
box x in [0, 10]
box y in [0, 10]
eq x - y
eq x + y - 2
"""
    )
    ctx = ContractContext(deadline=time.monotonic() - 1.0)
    box, _ = propagate(s, s.box, ctx=ctx)
    assert box is not None  # expired deadline stops early but stays sound
    assert box.lo == [0.0, 0.0] and box.hi == [10.0, 10.0]


def test_propagate_uses_inequalities():
    s = parse_system(
        """nonsquare
vars x, y
box x in [0, 10]
box y in [0, 10]
eq x - y
ineq x - 3 <= 0
"""
    )
    box, _ = propagate(s, s.box)
    assert close(box.hi[0], 3.0)
    assert close(box.hi[1], 3.0)  # flows through x = y


# ---------------------------------------------------------------------------
# BC3
# ---------------------------------------------------------------------------


def test_bc3_narrows_to_root():
    e = parse_expression("x^2 - 6.25", ["x"])
    box = bc3_revise(e, 0, Box([0.0], [5.0]))
    assert box is not None
    assert box.lo[0] <= 2.5 <= box.hi[0]
    assert box.hi[0] - box.lo[0] < 1e-3


def test_bc3_proves_no_zero():
    e = parse_expression("x^2 + 1", ["x"])
    assert bc3_revise(e, 0, Box([-3.0], [3.0])) is None


def test_bc3_multiple_roots_keeps_outermost():
    # roots at 1 and 2: the narrowed interval must keep both
    e = parse_expression("(x - 1)*(x - 2)", ["x"])
    box = bc3_revise(e, 0, Box([0.0], [5.0]))
    assert box is not None
    assert box.lo[0] <= 1.0 and box.hi[0] >= 2.0
    assert box.lo[0] > 0.9 and box.hi[0] < 2.1


def test_bc3_dependency_breaker():
    # x*(x - 2) written with two occurrences: hc4 alone leaves [0, 2] wide
    # around the root x=0 side; bc3 tightens endpoints
    e = parse_expression("x*x - 2*x", ["x"])
    hc4_box, _ = hc4_revise(e, "=", Box([-1.0], [1.5]))
    bc3_box = bc3_revise(e, 0, Box([-1.0], [1.5]))
    assert bc3_box is not None
    assert bc3_box.lo[0] <= 0.0 <= bc3_box.hi[0]
    assert bc3_box.hi[0] - bc3_box.lo[0] <= hc4_box.hi[0] - hc4_box.lo[0] + 1e-12


# ---------------------------------------------------------------------------
# Gauss-Seidel, Hansen-Sengupta, Krawczyk
# ---------------------------------------------------------------------------


def _ivm(rows):
    return IntervalMatrix([[Interval(lo, hi) for lo, hi in row] for row in rows])


def test_gauss_seidel_point_system():
    A = _ivm([[(2.0, 2.0), (0.0, 0.0)], [(0.0, 0.0), (4.0, 4.0)]])
    x_lo = [-10.0, -10.0]
    x_hi = [10.0, 10.0]
    ok, gaps, diag_ok = gauss_seidel(A, [2.0, 4.0], [2.0, 4.0], x_lo, x_hi)
    assert ok and diag_ok and not gaps
    assert close(x_lo[0], 1.0) and close(x_hi[0], 1.0)
    assert close(x_lo[1], 1.0) and close(x_hi[1], 1.0)


def test_gauss_seidel_interval_diagonal():
    A = _ivm([[(1.0, 2.0)]])
    x_lo, x_hi = [-10.0], [10.0]
    ok, gaps, diag_ok = gauss_seidel(A, [1.0], [1.0], x_lo, x_hi)
    assert ok and diag_ok
    assert close(x_lo[0], 0.5) and close(x_hi[0], 1.0)


def test_gauss_seidel_zero_diagonal_gap():
    A = _ivm([[(-1.0, 1.0)]])
    x_lo, x_hi = [-10.0], [10.0]
    ok, gaps, diag_ok = gauss_seidel(A, [2.0, ], [2.0], x_lo, x_hi)
    assert ok and not diag_ok
    assert gaps == [(0, x_lo[0] + 0.0, x_hi[0] + 0.0)] or gaps
    v, gl, gh = gaps[0]
    assert v == 0 and gl <= -2.0 + 1e-12 and gh >= 2.0 - 1e-12
    assert x_lo[0] == -10.0 and x_hi[0] == 10.0


def test_gauss_seidel_infeasible():
    A = _ivm([[(1.0, 1.0)]])
    x_lo, x_hi = [5.0], [10.0]
    ok, _, _ = gauss_seidel(A, [1.0], [1.0], x_lo, x_hi)
    assert not ok


CIRCLE_LINE = """vars x, y
box x in [{0}, {1}]
box y in [{0}, {1}]
eq x^2 + y^2 - 1
eq x - y
"""


def test_hansen_sengupta_contracts_and_certifies():
    s = parse_system(CIRCLE_LINE.format(0.6, 0.8))
    r = hansen_sengupta_step(s, s.box)
    assert not r.empty
    root = 1.0 / math.sqrt(2.0)
    assert r.box.contains_point([root, root])
    assert r.interior_by == "hs"
    w = max(r.box.widths())
    assert w < 0.05


def test_hansen_sengupta_prunes_rootless_box():
    s = parse_system(CIRCLE_LINE.format(0.1, 0.2))
    r = hansen_sengupta_step(s, s.box)
    assert r.empty


def test_krawczyk_contracts_and_certifies():
    s = parse_system(CIRCLE_LINE.format(0.6, 0.8))
    r = krawczyk_step(s, s.box)
    assert not r.empty
    root = 1.0 / math.sqrt(2.0)
    assert r.box.contains_point([root, root])
    assert r.interior_by == "k"


def test_krawczyk_prunes_rootless_box():
    s = parse_system(CIRCLE_LINE.format(0.1, 0.2))
    r = krawczyk_step(s, s.box)
    assert r.empty


def test_operators_skip_unbounded_boxes():
    s = parse_system(
        """vars x, y
box x in [-inf, inf]
box y in [-1, 1]
eq x - y
eq x + y
"""
    )
    r = hansen_sengupta_step(s, s.box)
    assert not r.empty and r.box == s.box
    r = krawczyk_step(s, s.box)
    assert not r.empty and r.box == s.box


def test_hs_iterated_converges_quadratically():
    s = parse_system(CIRCLE_LINE.format(0.5, 0.9))
    box = s.box
    widths = []
    for _ in range(4):
        r = hansen_sengupta_step(s, box)
        assert not r.empty
        box = r.box
        widths.append(max(box.widths()))
    assert widths[-1] < 1e-8
    root = 1.0 / math.sqrt(2.0)
    assert box.contains_point([root, root])


# ---------------------------------------------------------------------------
# 3B shaving
# ---------------------------------------------------------------------------


def test_3b_shaves_to_slab_grid():
    s = parse_system(
        """vars x
box x in [0, 5]
eq x^2 - 6.25
"""
    )
    r = shave_3b(s, s.box, slices=10)
    assert not r.empty
    assert close(r.box.lo[0], 2.0) and close(r.box.hi[0], 3.0)


def test_3b_whole_box_infeasible():
    s = parse_system(
        """vars x
box x in [0, 5]
eq x^2 + 1
"""
    )
    # every slab discards; the final cut proves the box empty
    r = shave_3b(s, s.box, slices=4)
    assert r.empty or r.box.max_width() < 5.0 / 4 + 1e-12


def test_3b_multidimensional():
    s = parse_system(CIRCLE_LINE.format(-2.0, 2.0))
    r = shave_3b(s, s.box, slices=8)
    assert not r.empty
    root = 1.0 / math.sqrt(2.0)
    assert r.box.contains_point([root, root])
    assert r.box.contains_point([-root, -root])
    assert r.box.hi[0] <= 1.5 and r.box.lo[0] >= -1.5


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def test_parse_pipeline_and_registry():
    p = parse_pipeline("hc4,hs")
    assert [s.name for s in p.stages] == ["hc4", "hs"]
    p = parse_pipeline("hc4,hc4bc3,3b,hs")
    assert [s.name for s in p.stages] == ["hc4", "hc4bc3", "3b", "hs"]
    assert set(STAGES) == {"hc4", "hc4bc3", "bc3", "3b", "hs", "k", "gs"}
    with pytest.raises(ValueError, match="unknown contractor"):
        parse_pipeline("hc4,nope")
    with pytest.raises(ValueError, match="empty"):
        parse_pipeline(" , ")


def test_pipeline_runs_all_stages():
    s = parse_system(CIRCLE_LINE.format(0.5, 0.9))
    for spec in ["hc4", "hc4,hs", "hc4,k", "hc4bc3", "hc4,hc4bc3,3b,hs", "bc3", "gs"]:
        p = parse_pipeline(spec)
        out = p.contract(s, s.box)
        assert not out.empty, spec
        root = 1.0 / math.sqrt(2.0)
        assert out.box.contains_point([root, root]), spec
        assert out.box.is_subset(s.box), spec


def test_pipeline_contract_prunes():
    s = parse_system(CIRCLE_LINE.format(0.1, 0.2))
    out = parse_pipeline("hc4,hs").contract(s, s.box)
    assert out.empty


def test_pipeline_reports_interior():
    s = parse_system(CIRCLE_LINE.format(0.6, 0.8))
    out = parse_pipeline("hc4,hs").contract(s, s.box)
    assert out.interior_by == "hs"
    out = parse_pipeline("hc4,k").contract(s, s.box)
    assert out.interior_by == "k"


def test_contraction_result_shape():
    r = ContractionResult(None)
    assert r.empty and r.gaps == [] and r.interior_by is None
