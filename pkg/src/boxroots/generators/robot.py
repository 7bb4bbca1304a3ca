"""Serial-chain inverse kinematics instances.

A chain of m rigid links with integer lengths is posed at random joint
angles.  The cumulative joint positions along the chain give the forward
kinematics; the instance fixes the end effector plus a subset of the
intermediate coordinates to the posed values, and asks for all joint
configurations reaching them.  By construction the posed configuration
is a root, and it is stored in the instance metadata.

Planar chains give 2m equations (trig mode) or 3m (polynomial mode,
where cos/sin become fresh variables tied by c^2 + s^2 = 1).  Spatial
chains use azimuth/elevation angles per link and give 3m or 5m
equations.

Not every subset of intermediate coordinates yields a well-posed square
system: fixing both coordinates of joint j closes the subchain 1..j,
which must itself be square.  check_square_selection tests the
prefix-balance condition; the generator resamples subsets until it
passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .common import RNG_KIND, build_system, make_rng, num, vec

_MODES = ("planar_trig", "planar_poly", "spatial_trig", "spatial_poly")
_MAX_SELECTION_TRIES = 10_000


@dataclass
class RobotParams:
    m: int
    mode: str = "planar_trig"
    lengths: tuple | None = None  # integer link lengths; sampled from 1..10 if None
    seed: int = 0
    end: tuple | None = None  # explicit end-effector target; sampled pose if None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("chain needs at least 2 links")
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.lengths is not None and len(self.lengths) != self.m:
            raise ValueError("need one length per link")
        if self.end is not None:
            want = 3 if self.mode.startswith("spatial") else 2
            if len(self.end) != want:
                raise ValueError(f"end pose needs {want} coordinates")


def check_square_selection(m: int, chosen) -> bool:
    """Planar case: is fixing these intermediate coordinates well posed?

    chosen holds names among x1..x_{m-1}, y1..y_{m-1}, exactly m-2 of
    them.  Ordering the candidates x1 < y1 < x2 < y2 < ... , the rule
    is: whenever both xj and yj are chosen, exactly j-2 chosen names
    must precede xj.  (Fixing both coordinates of joint j decouples the
    subchain of links 1..j, which is square only with j-2 earlier
    coordinates fixed.)
    """
    chosen = set(chosen)
    if len(chosen) != m - 2:
        raise ValueError("selection must fix exactly m-2 coordinates")
    order = [f"{axis}{i}" for i in range(1, m) for axis in ("x", "y")]
    if not chosen <= set(order):
        raise ValueError("selection may only use intermediate coordinates")
    picked = [name for name in order if name in chosen]
    for j in range(1, m):
        if f"x{j}" in chosen and f"y{j}" in chosen:
            if picked.index(f"x{j}") != j - 2:
                return False
    return True


def _check_selection_spatial(m: int, chosen) -> bool:
    # same prefix-balance idea with coordinate triples: closing joint j
    # (all of xj, yj, zj fixed) needs 2j-3 earlier coordinates fixed
    chosen = set(chosen)
    if len(chosen) != 2 * m - 3:
        raise ValueError("selection must fix exactly 2m-3 coordinates")
    order = [f"{axis}{i}" for i in range(1, m) for axis in ("x", "y", "z")]
    if not chosen <= set(order):
        raise ValueError("selection may only use intermediate coordinates")
    picked = [name for name in order if name in chosen]
    for j in range(1, m):
        if {f"x{j}", f"y{j}", f"z{j}"} <= chosen:
            if picked.index(f"x{j}") != 2 * j - 3:
                return False
    return True


def _sample_selection(rng, candidates, k, check):
    for _ in range(_MAX_SELECTION_TRIES):
        idx = rng.choice(len(candidates), size=k, replace=False)
        chosen = {candidates[i] for i in idx}
        if check(chosen):
            return chosen
    raise RuntimeError("no well-posed coordinate selection found")


def _angle_terms(mode, axis, lengths, j):
    # forward-kinematics partial sum for coordinate `axis` of joint j
    terms = []
    for i in range(1, j + 1):
        li = num(lengths[i - 1])
        if mode.startswith("planar"):
            if mode == "planar_trig":
                f = {"x": f"cos(th{i})", "y": f"sin(th{i})"}[axis]
            else:
                f = {"x": f"c{i}", "y": f"s{i}"}[axis]
        else:
            if mode == "spatial_trig":
                f = {
                    "x": f"cos(th{i})*cos(ph{i})",
                    "y": f"cos(th{i})*sin(ph{i})",
                    "z": f"sin(th{i})",
                }[axis]
            else:
                f = {
                    "x": f"ct{i}*cp{i}",
                    "y": f"ct{i}*sp{i}",
                    "z": f"st{i}",
                }[axis]
        terms.append(f"{li}*{f}")
    return " + ".join(terms)


def _gen_robot(p: RobotParams, axes: str) -> "System":
    rng = make_rng(p.seed)
    m = p.m
    spatial = len(axes) == 3
    if p.lengths is not None:
        lengths = [float(v) for v in p.lengths]
        if any(v <= 0 for v in lengths):
            raise ValueError("link lengths must be positive")
    else:
        lengths = [int(v) for v in rng.integers(1, 11, size=m)]

    # pose the chain
    theta = rng.uniform(-math.pi, math.pi, size=m)
    phi = rng.uniform(-math.pi, math.pi, size=m) if spatial else None
    coords = {}
    acc = {axis: 0.0 for axis in axes}
    reach = []
    total = 0.0
    for i in range(1, m + 1):
        li = lengths[i - 1]
        if spatial:
            acc["x"] += li * math.cos(theta[i - 1]) * math.cos(phi[i - 1])
            acc["y"] += li * math.cos(theta[i - 1]) * math.sin(phi[i - 1])
            acc["z"] += li * math.sin(theta[i - 1])
        else:
            acc["x"] += li * math.cos(theta[i - 1])
            acc["y"] += li * math.sin(theta[i - 1])
        total += li
        reach.append(total)
        for axis in axes:
            coords[f"{axis}{i}"] = acc[axis]

    # an explicit target replaces the posed end effector; the posed
    # configuration then stops being a root (the target may even be out of
    # reach), so no root is embedded in that case
    if p.end is not None:
        for axis, val in zip(axes, p.end):
            coords[f"{axis}{m}"] = float(val)

    # pick which intermediate coordinates to freeze
    candidates = [f"{axis}{i}" for i in range(1, m) for axis in axes]
    n_fix = (2 * m - 3) if spatial else (m - 2)
    check = _check_selection_spatial if spatial else check_square_selection
    chosen = _sample_selection(rng, candidates, n_fix, lambda s: check(m, s))

    free_coords = [name for name in candidates if name not in chosen]
    if p.mode.endswith("trig"):
        angle_vars = [f"th{i}" for i in range(1, m + 1)]
        if spatial:
            angle_vars += [f"ph{i}" for i in range(1, m + 1)]
        angle_boxes = ["[-pi, pi]"] * len(angle_vars)
    else:
        angle_vars = []
        for i in range(1, m + 1):
            if spatial:
                angle_vars += [f"st{i}", f"ct{i}", f"sp{i}", f"cp{i}"]
            else:
                angle_vars += [f"c{i}", f"s{i}"]
        angle_boxes = ["[-1, 1]"] * len(angle_vars)

    var_names = free_coords + angle_vars
    boxes = []
    for name in free_coords:
        r = num(reach[int(name[1:]) - 1])
        boxes.append(f"[-{r}, {r}]")
    boxes += angle_boxes

    equations = []
    for j in range(1, m + 1):
        for axis in axes:
            name = f"{axis}{j}"
            lhs = name if name in free_coords else num(coords[name])
            equations.append(f"{lhs} - ({_angle_terms(p.mode, axis, lengths, j)})")
    if p.mode.endswith("poly"):
        for i in range(1, m + 1):
            if spatial:
                equations.append(f"st{i}^2 + ct{i}^2 - 1")
                equations.append(f"sp{i}^2 + cp{i}^2 - 1")
            else:
                equations.append(f"c{i}^2 + s{i}^2 - 1")

    # the posed configuration, in variable order, is one guaranteed root
    root = []
    for name in free_coords:
        root.append(coords[name])
    for i in range(1, m + 1):
        if p.mode == "planar_trig":
            root_i = [theta[i - 1]]
        elif p.mode == "planar_poly":
            root_i = [math.cos(theta[i - 1]), math.sin(theta[i - 1])]
        elif p.mode == "spatial_trig":
            root_i = []
        else:
            root_i = [
                math.sin(theta[i - 1]),
                math.cos(theta[i - 1]),
                math.sin(phi[i - 1]),
                math.cos(phi[i - 1]),
            ]
        root.extend(root_i)
    if p.mode == "spatial_trig":
        root.extend(theta)
        root.extend(phi)

    end = [coords[f"{axis}{m}"] for axis in axes]
    metadata = [
        ("family", f"robot-{p.mode.replace('_', '-')}"),
        ("rng", RNG_KIND),
        ("seed", p.seed),
        ("m", m),
        ("lengths", vec(lengths)),
        ("end", vec(end)),
    ]
    if p.end is None:
        metadata.append(("root", vec(root)))
    if chosen:
        fixed = " ".join(f"{n}={num(coords[n])}" for n in candidates if n in chosen)
        metadata.insert(6, ("fixed", fixed))
    return build_system(metadata, var_names, boxes, equations)


def gen_planar_robot(p: RobotParams):
    if not p.mode.startswith("planar"):
        raise ValueError("planar generator needs a planar mode")
    return _gen_robot(p, "xy")


def gen_spatial_robot(p: RobotParams):
    if not p.mode.startswith("spatial"):
        raise ValueError("spatial generator needs a spatial mode")
    return _gen_robot(p, "xyz")
