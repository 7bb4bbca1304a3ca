"""Branch-and-prune search for all certified roots of a square system.

The loop is select / contract / check / bisect:

* select   pop a box off the worklist (dfs, bfs, or smallest midpoint
           residual first)
* contract run the configured contractor pipeline; empty means no roots
* check    a verification operator landing strictly inside certifies a
           unique root and retires the box; boxes narrower than ``eps``
           that resist certification are retried once under inflation and
           otherwise reported as unknown
* bisect   split along a dimension chosen by the bisector policy (or along
           a solution-free gap when the policy asks for that) and push the
           halves

Certified enclosures of the same root are merged before reporting, so the
certified list counts distinct roots.
"""

from __future__ import annotations

import heapq
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .certify import (
    dedup_solutions,
    hansen_sengupta_test,
    inequalities_decided,
    inflate_and_certify,
    krawczyk_test,
)
from .contractors import (
    ContractContext,
    Pipeline,
    hansen_sengupta_step,
    krawczyk_step,
    parse_pipeline,
)
from .expression import System, eval_point
from .interval import Box

STATUS_COMPLETE = "complete"
STATUS_TIMEOUT = "timeout"
STATUS_TARGET_REACHED = "target_reached"

_NODE_POLICIES = ("dfs", "bfs", "min_mid_residual")
_BISECTORS = ("round_robin", "largest_first", "max_smear", "sum_smear", "smear_rel")
_BISECTOR_ALIASES = {
    "rr": "round_robin",
    "largest": "largest_first",
    "round_robin": "round_robin",
    "largest_first": "largest_first",
    "max_smear": "max_smear",
    "sum_smear": "sum_smear",
    "smear_rel": "smear_rel",
}
_CERTIFIERS = {
    "hs": "hs",
    "hansen_sengupta": "hs",
    "k": "k",
    "krawczyk": "k",
}


class UnboundedBoxError(RuntimeError):
    """The search box stayed unbounded after the first contraction."""


@dataclass
class SolverConfig:
    """Knobs of the branch-and-prune search.

    ``target_count=None`` asks for all roots; an integer k stops the search
    once k distinct certified roots are in hand.  ``bisector`` accepts the
    policy names round_robin (rr), largest_first (largest), max_smear,
    sum_smear, smear_rel, each optionally prefixed with "gap+" to branch on
    solution-free gaps when the last contraction found one.
    ``dedup_tol=None`` defaults to 10*eps.
    """

    eps: float = 1e-6
    timeout: float = 1000.0
    pipeline: str = "hc4,hc4bc3,3b,hs"
    certifier: str = "hs"
    bisector: str = "smear_rel"
    node_selection: str = "dfs"
    target_count: int | None = None
    tau: float = 0.1
    slices_3b: int = 10
    inflation_factor: float = 1.1
    inflation_rounds: int = 5
    dedup_tol: float | None = None

    def __post_init__(self):
        if not (self.eps > 0.0):
            raise ValueError("eps must be positive")
        if not (self.timeout > 0.0):
            raise ValueError("timeout must be positive")
        if self.target_count is not None and self.target_count < 1:
            raise ValueError("target_count must be at least 1")
        if self.node_selection not in _NODE_POLICIES:
            raise ValueError(
                f"unknown node selection {self.node_selection!r}; "
                f"available: {', '.join(_NODE_POLICIES)}"
            )
        name = self.bisector
        if name.startswith("gap+"):
            name = name[4:]
        if name not in _BISECTOR_ALIASES:
            raise ValueError(
                f"unknown bisector {self.bisector!r}; available: "
                f"{', '.join(_BISECTORS)} (optionally prefixed with 'gap+')"
            )
        if self.certifier not in _CERTIFIERS:
            raise ValueError(
                f"unknown certifier {self.certifier!r}; available: hs, k"
            )


@dataclass
class SolveReport:
    """Search outcome: merged certified root enclosures, unknown (suspect)
    boxes, search statistics, and a completion status.  When the search stops
    early (timeout or target reached) the unexplored worklist is flushed into
    ``unknown`` so the output still covers every root."""

    certified: list[Box]
    unknown: list[Box]
    stats: dict
    status: str


# ---------------------------------------------------------------------------
# Worklist / node selection
# ---------------------------------------------------------------------------


class _Worklist:
    """Search frontier under one of the node-selection policies.  Entries are
    (box, gaps) pairs; gaps come from the contraction that produced the box
    and are only consumed by gap-first bisection."""

    def __init__(self, policy: str, system: System):
        self.policy = policy
        self.system = system
        if policy == "bfs":
            self._q = deque()
        elif policy == "min_mid_residual":
            self._h: list = []
            self._seq = 0
        else:
            self._s: list = []

    def __len__(self) -> int:
        if self.policy == "bfs":
            return len(self._q)
        if self.policy == "min_mid_residual":
            return len(self._h)
        return len(self._s)

    def push(self, box: Box, gaps) -> None:
        if self.policy == "bfs":
            self._q.append((box, gaps))
        elif self.policy == "min_mid_residual":
            key = _mid_residual_sum(self.system, box)
            heapq.heappush(self._h, (key, self._seq, box, gaps))
            self._seq += 1
        else:
            self._s.append((box, gaps))

    def pop(self):
        if self.policy == "bfs":
            return self._q.popleft()
        if self.policy == "min_mid_residual":
            _, _, box, gaps = heapq.heappop(self._h)
            return box, gaps
        return self._s.pop()

    def drain(self):
        out = []
        while len(self):
            out.append(self.pop()[0])
        return out


def _mid_residual_sum(system: System, box: Box) -> float:
    if not box.is_bounded():
        return math.inf
    m = box.mid_point()
    total = 0.0
    for e in system.equations:
        v = eval_point(e, m)
        if math.isnan(v):
            return math.inf
        total += abs(v)
    return total


def select_node(worklist: _Worklist, policy: str):
    """Pop the next box: dfs = last in, bfs = first in, min_mid_residual =
    smallest sum of midpoint residual magnitudes."""
    if len(worklist) == 0:
        raise ValueError("empty worklist")
    if worklist.policy != policy:
        raise ValueError("worklist was built for a different policy")
    return worklist.pop()


# ---------------------------------------------------------------------------
# Bisection
# ---------------------------------------------------------------------------


def smear_values(system: System, b: Box) -> np.ndarray:
    """Smear matrix S[j, i] = mag(J[j, i]) * wid(x_i): how much constraint j
    can move across dimension i.  Zero-width dimensions score 0 even against
    unbounded derivative entries."""
    J = system.jacobian_evaluator().interval(b)
    n_eqs, n_vars = J.shape
    widths = b.widths()
    S = np.zeros((n_eqs, n_vars))
    for j in range(n_eqs):
        for i in range(n_vars):
            w = widths[i]
            if w == 0.0:
                continue
            m = max(abs(J.lo[j][i]), abs(J.hi[j][i]))
            if m == 0.0:
                continue
            S[j, i] = m * w if not math.isinf(m) else math.inf
    return S


def _bisectable(b: Box, i: int, eps: float) -> bool:
    if not (b.hi[i] - b.lo[i] > eps):
        return False
    m = b[i].mid()
    return b.lo[i] < m < b.hi[i]


def choose_bisection_var(
    system: System, b: Box, policy: str, state: dict, eps: float = 0.0
) -> int:
    """Dimension to split under the given policy; dimensions at or below
    ``eps`` width (or too thin to hold an interior midpoint) are skipped and
    ties go to the lowest index.  ``state`` carries the round-robin cursor."""
    policy = _BISECTOR_ALIASES.get(policy, policy)
    n = len(b)
    eligible = [i for i in range(n) if _bisectable(b, i, eps)]
    if not eligible:
        raise ValueError("no bisectable dimension")
    if policy == "largest_first":
        widths = b.widths()
        best = eligible[0]
        for i in eligible[1:]:
            if widths[i] > widths[best]:
                best = i
        return best
    if policy == "round_robin":
        ok = set(eligible)
        start = state.get("rr", 0) % n
        for d in range(n):
            i = (start + d) % n
            if i in ok:
                state["rr"] = (i + 1) % n
                return i
    S = smear_values(system, b)
    if policy == "max_smear":
        scores = [float(np.max(S[:, i])) if S.shape[0] else 0.0 for i in range(n)]
    elif policy == "sum_smear":
        scores = [float(np.sum(S[:, i])) for i in range(n)]
    elif policy == "smear_rel":
        # normalize each constraint row so every equation votes with weight 1
        R = np.minimum(S, 1e280)
        sums = R.sum(axis=1)
        scores = [0.0] * n
        for j in range(S.shape[0]):
            if sums[j] <= 0.0:
                continue
            for i in range(n):
                scores[i] += float(R[j, i] / sums[j])
    else:
        raise ValueError(f"unknown bisector policy {policy!r}")
    best = eligible[0]
    for i in eligible[1:]:
        if scores[i] > scores[best]:
            best = i
    return best


def _gap_children(b: Box, gaps, eps: float):
    """Split on the widest recorded solution-free gap that removes at least
    1% of its dimension (keeps the branching geometric, hence terminating).
    Returns a list of child boxes, possibly empty, or None when no gap
    qualifies."""
    best = None
    best_w = 0.0
    for v, gl, gh in gaps:
        lo, hi = b.lo[v], b.hi[v]
        cl, ch = max(gl, lo), min(gh, hi)
        w = ch - cl
        if w > best_w and hi > lo and w > 0.01 * (hi - lo):
            best = (v, gl, gh)
            best_w = w
    if best is None:
        return None
    v, gl, gh = best
    children = []
    if gl >= b.lo[v]:
        left = b.copy()
        left.hi[v] = min(gl, b.hi[v])
        if left.lo[v] <= left.hi[v]:
            children.append(left)
    if gh <= b.hi[v]:
        right = b.copy()
        right.lo[v] = max(gh, b.lo[v])
        if right.lo[v] <= right.hi[v]:
            children.append(right)
    return children


def _refine_enclosure(system: System, box: Box, kind: str, max_iter: int = 25) -> Box:
    """Iterate the verification operator on an already-certified box; each
    step keeps the unique root and shrinks the enclosure quadratically, so
    the midpoint converges to the root itself."""
    step = hansen_sengupta_step if kind == "hs" else krawczyk_step
    for _ in range(max_iter):
        r = step(system, box)
        if r.empty or r.box == box:
            break
        new_w = max(r.box.widths())
        old_w = max(box.widths())
        box = r.box
        if new_w > 0.9 * old_w:
            break
    return box


# ---------------------------------------------------------------------------
# Solve loop
# ---------------------------------------------------------------------------


def solve(system: System, cfg: SolverConfig | None = None) -> SolveReport:
    """Find every root of the square system inside its box (or the first
    ``target_count`` of them), each wrapped in a certified enclosure, along
    with suspect boxes that could be neither discarded nor certified."""
    if cfg is None:
        cfg = SolverConfig()
    if system.nonsquare or len(system.equations) != system.n_vars:
        raise ValueError("solve requires a square system")
    start = time.monotonic()
    deadline = start + cfg.timeout
    ctx = ContractContext(deadline=deadline)
    pipeline = (
        cfg.pipeline
        if isinstance(cfg.pipeline, Pipeline)
        else parse_pipeline(cfg.pipeline, tau=cfg.tau, slices_3b=cfg.slices_3b)
    )
    cert_kind = _CERTIFIERS[cfg.certifier]
    cert_fn = hansen_sengupta_test if cert_kind == "hs" else krawczyk_test
    bis_name = cfg.bisector
    gap_first = bis_name.startswith("gap+")
    if gap_first:
        bis_name = bis_name[4:]
    bis_policy = _BISECTOR_ALIASES[bis_name]
    dedup_tol = cfg.dedup_tol if cfg.dedup_tol is not None else 10.0 * cfg.eps

    certified: list[Box] = []
    unknown: list[Box] = []
    state: dict = {}
    stats = {"cells_processed": 0, "bisections": 0}
    worklist = _Worklist(cfg.node_selection, system)
    worklist.push(system.box.copy(), [])
    status = STATUS_COMPLETE

    def distinct_roots() -> int:
        return len(dedup_solutions(certified, dedup_tol, system))

    target = cfg.target_count
    while len(worklist):
        if time.monotonic() > deadline:
            status = STATUS_TIMEOUT
            break
        box, _ = select_node(worklist, cfg.node_selection)
        stats["cells_processed"] += 1
        res = pipeline.contract(system, box, ctx)
        if res.empty:
            continue
        b = res.box
        if not b.is_bounded():
            raise UnboundedBoxError(
                "box is still unbounded after contraction; tighten the "
                "initial domain"
            )
        # check: certificate from the pipeline's own operator stage, else an
        # explicit test
        cert_box = None
        if res.interior_by == cert_kind:
            cert_box = b
        else:
            cert = cert_fn(system, b)
            if cert.unique:
                cert_box = cert.box
        if cert_box is not None:
            cert_box = _refine_enclosure(system, cert_box, cert_kind)
            if inequalities_decided(system, cert_box):
                certified.append(cert_box)
                if target is not None and len(certified) >= target:
                    if distinct_roots() >= target:
                        status = STATUS_TARGET_REACHED
                        break
            else:
                unknown.append(cert_box)
            continue
        if b.max_width() < cfg.eps or not any(
            _bisectable(b, i, cfg.eps) for i in range(len(b))
        ):
            inf = inflate_and_certify(
                system, b, cfg.inflation_factor, cfg.inflation_rounds
            )
            if inf.unique:
                inf_box = _refine_enclosure(system, inf.box, "hs")
            if inf.unique and inequalities_decided(system, inf_box):
                certified.append(inf_box)
                if target is not None and len(certified) >= target:
                    if distinct_roots() >= target:
                        status = STATUS_TARGET_REACHED
                        break
            else:
                unknown.append(b)
            continue
        # bisect
        children = None
        if gap_first and res.gaps:
            children = _gap_children(b, res.gaps, cfg.eps)
        if children is None:
            i = choose_bisection_var(system, b, bis_policy, state, cfg.eps)
            left, right = b.bisect(i)
            children = [left, right]
        stats["bisections"] += 1
        for child in reversed(children):
            worklist.push(child, [])

    unknown.extend(worklist.drain())
    merged = dedup_solutions(certified, dedup_tol, system)
    stats["wall_time"] = time.monotonic() - start
    for key, val in sorted(ctx.stats.items()):
        stats[key] = val
    return SolveReport(certified=merged, unknown=unknown, stats=stats, status=status)
