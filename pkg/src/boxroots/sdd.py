"""Dataset-directory I/O for benchmark instances.

A dataset root holds two top-level directories:

    non-parametric/
        polynomial/<id>/
        non-polynomial/<id>/
    parametric/
        <family>/
            parameter.txt        one line of parameter values per instance
            parametricSys.txt    family description
            instances/<id>/

Every instance directory carries sys.txt (system text in the expression
grammar) and optionally output.txt (run counters), solution.txt (boxes
found) and info.txt (provenance).  Loading keeps the raw bytes of each
file, so writing a loaded tree back is byte identical.

The result-file syntax used by output.txt and solution.txt is a run of
``key=value`` header lines followed by one box per line as

    certified [lo,hi] x [lo,hi] x ... x [lo,hi]

with endpoints printed to 17 significant digits (lossless float
round-trip).  The helpers at the bottom read and write that syntax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .expression import System, parse_system
from .interval import Box

OWNED_FILES = ("sys.txt", "output.txt", "solution.txt", "info.txt")
FAMILY_FILES = ("parameter.txt", "parametricSys.txt")


@dataclass
class SddInstance:
    """One benchmark instance: a directory with a sys.txt inside.

    ``id`` is the directory path relative to the dataset root, which makes
    it unique across the tree; ``category`` is polynomial, non-polynomial,
    or the parametric family name.  ``files`` maps owned file names to
    their raw bytes (sys.txt is always present); parametric instances also
    carry their family's descriptor files so a loaded tree can be written
    back whole.
    """

    id: str
    category: str
    files: dict
    family_files: dict = field(default_factory=dict)
    path: Path | None = None  # on-disk directory, None for in-memory instances

    @property
    def sys_text(self) -> str:
        return self.files["sys.txt"].decode()

    def system(self) -> System:
        return parse_system(self.sys_text)


def load_sdd(root, skipped: list | None = None) -> list[SddInstance]:
    """Collect every instance below a dataset root.

    Walks non-parametric/{non-polynomial,polynomial}/* and
    parametric/*/instances/*.  A subdirectory becomes an instance when its
    sys.txt exists and parses; anything else is appended to ``skipped`` as
    (relative path, reason) and the walk continues.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    if skipped is None:
        skipped = []
    out: list[SddInstance] = []
    for sub in ("non-polynomial", "polynomial"):
        base = root / "non-parametric" / sub
        if base.is_dir():
            for entry in sorted(base.iterdir()):
                _collect(entry, root, sub, {}, out, skipped)
    pbase = root / "parametric"
    if pbase.is_dir():
        for family in sorted(pbase.iterdir()):
            if not family.is_dir():
                continue
            fam_files = {}
            for name in FAMILY_FILES:
                f = family / name
                if f.is_file():
                    fam_files[name] = f.read_bytes()
            inst_root = family / "instances"
            if inst_root.is_dir():
                for entry in sorted(inst_root.iterdir()):
                    _collect(entry, root, family.name, fam_files, out, skipped)
    return out


def _collect(entry, root, category, fam_files, out, skipped):
    if not entry.is_dir():
        return
    rel = entry.relative_to(root).as_posix()
    if not (entry / "sys.txt").is_file():
        skipped.append((rel, "no sys.txt"))
        return
    files = {}
    try:
        for name in OWNED_FILES:
            f = entry / name
            if f.is_file():
                files[name] = f.read_bytes()
        parse_system(files["sys.txt"].decode())
    except Exception as exc:  # any per-instance failure skips, never aborts
        skipped.append((rel, str(exc) or type(exc).__name__))
        return
    out.append(
        SddInstance(
            id=rel,
            category=category,
            files=files,
            family_files=dict(fam_files),
            path=entry,
        )
    )


def write_sdd(instances, root) -> None:
    """Write instances back under a dataset root, byte for byte."""
    root = Path(root)
    for inst in instances:
        d = root / inst.id
        d.mkdir(parents=True, exist_ok=True)
        for name, data in inst.files.items():
            (d / name).write_bytes(data)
        if inst.family_files:
            fam_dir = d.parent.parent  # <family>/instances/<id>
            for name, data in inst.family_files.items():
                (fam_dir / name).write_bytes(data)


# ---------------------------------------------------------------------------
# Result-file syntax
# ---------------------------------------------------------------------------


def format_float(v: float) -> str:
    return f"{v:.17g}"


def format_box(box: Box) -> str:
    return " x ".join(
        f"[{format_float(l)},{format_float(h)}]" for l, h in zip(box.lo, box.hi)
    )


def parse_box(text: str) -> Box:
    lo, hi = [], []
    for part in text.strip().split(" x "):
        part = part.strip()
        if not (part.startswith("[") and part.endswith("]")):
            raise ValueError(f"bad box component {part!r}")
        try:
            a, b = part[1:-1].split(",")
            lo.append(float(a))
            hi.append(float(b))
        except ValueError as exc:
            raise ValueError(f"bad box component {part!r}") from exc
    if not lo:
        raise ValueError("empty box text")
    return Box(lo, hi)


def encode_result(header: dict, sections: dict | None = None) -> bytes:
    """Render key=value header lines plus labelled box lines."""
    lines = [f"{k}={v}" for k, v in header.items()]
    for label, boxes in (sections or {}).items():
        for b in boxes:
            lines.append(f"{label} {format_box(b)}")
    return ("\n".join(lines) + "\n").encode()


def decode_result(data: bytes) -> tuple[dict, dict]:
    """Inverse of encode_result; box-line labels become section keys."""
    header: dict = {}
    sections: dict = {}
    for raw in data.decode().splitlines():
        line = raw.strip()
        if not line:
            continue
        if " [" in line and line.endswith("]"):
            label, _, rest = line.partition(" ")
            sections.setdefault(label, []).append(parse_box(rest))
        elif "=" in line:
            k, _, v = line.partition("=")
            header[k.strip()] = v.strip()
        else:
            raise ValueError(f"unrecognized result line {line!r}")
    return header, sections
