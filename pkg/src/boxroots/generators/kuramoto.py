"""Kuramoto oscillator equilibrium instances.

Equilibria of N coupled phase oscillators, in polynomial form: phase i
is represented by (c_i, s_i) on the unit circle, the last oscillator is
pinned to phase zero (c_N = 1, s_N = 0), and each remaining oscillator
balances its natural frequency against the mean coupling:

    w_i - (1/N) * sum_j (s_i c_j - s_j c_i) = 0      i = 1..N-1
    c_i^2 + s_i^2 - 1 = 0                            i = 1..N-1

The coupling sum telescopes to s_i * C - c_i * S with C = 1 + sum c_j
and S = sum s_j, which is how the equations are written (single
occurrence of each foreign variable).  Frequencies default to
N(0, 0.3) draws; instances with large |w_i| can be infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .common import RNG_KIND, build_system, make_rng, num, vec


@dataclass
class KuramotoParams:
    N: int
    omegas: tuple | None = None  # natural frequencies w_1..w_{N-1}
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least 2 oscillators")
        if self.omegas is not None and len(self.omegas) != self.N - 1:
            raise ValueError("need N-1 natural frequencies")


def gen_kuramoto(p: KuramotoParams):
    rng = make_rng(p.seed)
    n = p.N
    if p.omegas is not None:
        omegas = [float(w) for w in p.omegas]
    else:
        omegas = [float(w) for w in rng.normal(0.0, 0.3, size=n - 1)]

    var_names = []
    for i in range(1, n):
        var_names += [f"c{i}", f"s{i}"]
    csum = " + ".join([f"c{i}" for i in range(1, n)] + ["1"])
    ssum = " + ".join(f"s{i}" for i in range(1, n))

    equations = []
    for i in range(1, n):
        w = num(omegas[i - 1])
        equations.append(f"{w} - (s{i}*({csum}) - c{i}*({ssum}))/{n}")
    for i in range(1, n):
        equations.append(f"c{i}^2 + s{i}^2 - 1")

    metadata = [
        ("family", "kuramoto"),
        ("rng", RNG_KIND),
        ("seed", p.seed),
        ("N", n),
        ("omegas", vec(omegas)),
    ]
    boxes = ["[-1, 1]"] * len(var_names)
    return build_system(metadata, var_names, boxes, equations)
