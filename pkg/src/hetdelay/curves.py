"""CDF curves and the CSV schema shared by analytic and empirical output."""

from __future__ import annotations

import csv
import enum
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

CSV_HEADER = ["x", "value", "lower", "upper", "kind", "policy", "q"]


class CurveKind(str, enum.Enum):
    SUCCESS = "success"
    DELAY = "delay"


@dataclass(frozen=True)
class CdfCurve:
    """CDF values on a strictly increasing grid.

    ``values`` is the headline curve. Bound pairs fill ``lower`` and
    ``upper`` too; empirical curves may carry a +/- standard error band
    there instead. ``q`` is the interferer activity used, or None when the
    row does not come from a single activity (bounds, simulation).
    """

    grid: np.ndarray
    values: np.ndarray
    kind: CurveKind
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    policy: str = ""
    q: Optional[float] = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "kind", CurveKind(self.kind))
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float))
        if g.ndim != 1 or g.size == 0:
            raise ValueError("grid must be a non-empty 1-d array")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        for name in ("values", "lower", "upper"):
            v = getattr(self, name)
            if v is not None and v.shape != g.shape:
                raise ValueError(f"{name} has shape {v.shape}, grid has {g.shape}")

    def check(self, tol: float = 1e-3) -> None:
        """Raise if any stored series leaves [0, 1] or decreases by more than ``tol``."""
        for name in ("values", "lower", "upper"):
            v = getattr(self, name)
            if v is None:
                continue
            if np.any(v < -tol) or np.any(v > 1 + tol):
                raise ValueError(f"{name} leaves [0, 1]")
            if np.any(np.diff(v) < -tol):
                raise ValueError(f"{name} is not non-decreasing")

    def rows(self) -> Iterable[list[str]]:
        n = self.grid.size
        lo = self.lower if self.lower is not None else [None] * n
        hi = self.upper if self.upper is not None else [None] * n
        q = _fmt(self.q)
        for x, v, a, b in zip(self.grid, self.values, lo, hi):
            yield [_fmt(x), _fmt(v), _fmt(a), _fmt(b), self.kind.value, self.policy, q]


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _parse(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def write_atomic(path: "str | Path", text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def curves_to_csv(curves: Sequence[CdfCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in curves:
        w.writerows(c.rows())
    return buf.getvalue()


def write_curves(path: "str | Path", curves: Sequence[CdfCurve]) -> None:
    write_atomic(path, curves_to_csv(curves))


def read_curves(path: "str | Path") -> list[CdfCurve]:
    """Inverse of :func:`write_curves`; rows are grouped by (kind, policy, q) in file order."""
    groups: dict[tuple, list[dict]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for r in reader:
            groups.setdefault((r["kind"], r["policy"], r["q"]), []).append(r)
    out = []
    for (kind, policy, q), rows in groups.items():
        col = lambda name: [_parse(r[name]) for r in rows]  # noqa: E731
        lo, hi = col("lower"), col("upper")
        out.append(CdfCurve(
            np.array(col("x")), np.array(col("value")), kind,
            None if all(v is None for v in lo) else np.array(lo, dtype=float),
            None if all(v is None for v in hi) else np.array(hi, dtype=float),
            policy, _parse(q)))
    return out
