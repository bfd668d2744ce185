"""
Point clouds, discrete measures, ground metrics and their text formats.

Vectors file::

    N d
    x_11 x_12 ... x_1d
    ...

Measures file, one measure per line, 0-based point indices::

    k idx:mass idx:mass ...
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

METRICS = ("euclidean", "manhattan")
MASS_TOL = 1e-6


class FormatError(ValueError):
    """Malformed input file. ``lineno`` is 1-based, or None for whole-file errors."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}"
        if lineno is not None:
            where = f"{where}:{lineno}" if where else f"line {lineno}"
        super().__init__(f"{where}: {message}" if where else message)


def fmt(x: float) -> str:
    """17 significant digits: lossless for float64."""
    return "%.17g" % x


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """Support vectors shared by every measure."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64, copy=True)
        if c.ndim != 2:
            raise ValueError(f"coords must be 2-D, got shape {c.shape}")
        if c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("point cloud needs at least one point and one dimension")
        if not np.all(np.isfinite(c)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "coords", _frozen(c))

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __len__(self):
        return self.n_points


@dataclass(frozen=True)
class Measure:
    """Sparse probability vector over point indices.

    Masses are renormalised to sum to one; the raw sum must already be within
    ``MASS_TOL`` of one.
    """

    indices: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        m = np.asarray(self.masses, dtype=np.float64).ravel()
        if idx.shape != m.shape:
            raise ValueError("indices and masses differ in length")
        if idx.size == 0:
            raise ValueError("measure has empty support")
        if np.any(idx < 0):
            raise ValueError("negative point index")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate point index in measure")
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValueError("masses must be finite and strictly positive")
        total = m.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1 (tolerance {MASS_TOL})")
        # already-normalised vectors are kept bit-for-bit so that save/load is idempotent
        if abs(total - 1.0) > 8 * np.finfo(np.float64).eps * m.size:
            m = m / total
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "masses", _frozen(m))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "Measure":
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @classmethod
    def point_mass(cls, index: int) -> "Measure":
        return cls([index], [1.0])

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.masses.tolist()))

    def __len__(self):
        return self.indices.size

    def check_cloud(self, cloud: PointCloud):
        if self.indices.max() >= cloud.n_points:
            raise ValueError(
                f"point index {int(self.indices.max())} out of range for "
                f"{cloud.n_points} points"
            )


# ----------------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------------


def check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return metric


def ground_distance(metric: str, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    if check_metric(metric) == "euclidean":
        return float(np.sqrt(np.dot(diff, diff)))
    return float(np.abs(diff).sum())


def pairwise_distances(metric: str, X, Y) -> np.ndarray:
    """Dense ``len(X) x len(Y)`` distance matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError("dimension mismatch")
    diff = X[:, None, :] - Y[None, :, :]
    if check_metric(metric) == "euclidean":
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return np.abs(diff).sum(axis=2)


def paired_distances(metric: str, coords, i, j, chunk: int = 65536) -> np.ndarray:
    """``d(coords[i[k]], coords[j[k]])`` for every k."""
    check_metric(metric)
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    out = np.empty(i.size, dtype=np.float64)
    for s in range(0, i.size, chunk):
        diff = coords[i[s:s + chunk]] - coords[j[s:s + chunk]]
        if metric == "euclidean":
            out[s:s + chunk] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        else:
            out[s:s + chunk] = np.abs(diff).sum(axis=1)
    return out


# ----------------------------------------------------------------------------
# file formats
# ----------------------------------------------------------------------------


def _parse_float(tok, path, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(f"not a number: {tok!r}", path, lineno) from None
    if not np.isfinite(v):
        raise FormatError(f"non-finite value {tok!r}", path, lineno)
    return v


def _parse_int(tok, path, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"bad {what}: {tok!r}", path, lineno) from None


def parse_point_cloud(text: str, path=None) -> PointCloud:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError("missing header 'N d'", path, 1)
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError("header must be 'N d'", path, 1)
    n = _parse_int(head[0], path, 1, "point count")
    d = _parse_int(head[1], path, 1, "dimension")
    if n < 1 or d < 1:
        raise FormatError("header needs N >= 1 and d >= 1", path, 1)
    body = lines[1:]
    # tolerate trailing blank lines only
    while body and not body[-1].strip():
        body.pop()
    if len(body) != n:
        raise FormatError(f"expected {n} rows, found {len(body)}", path, None)
    coords = np.empty((n, d), dtype=np.float64)
    for r, line in enumerate(body):
        lineno = r + 2
        toks = line.split()
        if len(toks) != d:
            raise FormatError(f"expected {d} values, found {len(toks)}", path, lineno)
        for c, tok in enumerate(toks):
            coords[r, c] = _parse_float(tok, path, lineno)
    return PointCloud(coords)


def load_point_cloud(path) -> PointCloud:
    path = Path(path)
    return parse_point_cloud(path.read_text(), path)


def format_point_cloud(cloud: PointCloud) -> str:
    out = [f"{cloud.n_points} {cloud.dim}"]
    for row in cloud.coords:
        out.append(" ".join(fmt(v) for v in row))
    return "\n".join(out) + "\n"


def save_point_cloud(path, cloud: PointCloud):
    Path(path).write_text(format_point_cloud(cloud))


def parse_measures(text: str, cloud: PointCloud | None = None, path=None) -> list[Measure]:
    measures = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        toks = line.split()
        if not toks:
            continue
        k = _parse_int(toks[0], path, lineno, "support size")
        if k < 1 or len(toks) - 1 != k:
            raise FormatError(f"declared {k} entries, found {len(toks) - 1}", path, lineno)
        idx = np.empty(k, dtype=np.int64)
        mass = np.empty(k, dtype=np.float64)
        for e, tok in enumerate(toks[1:]):
            a, sep, b = tok.partition(":")
            if not sep:
                raise FormatError(f"entry {tok!r} is not idx:mass", path, lineno)
            idx[e] = _parse_int(a, path, lineno, "point index")
            mass[e] = _parse_float(b, path, lineno)
        if cloud is not None and (idx.min() < 0 or idx.max() >= cloud.n_points):
            raise FormatError(
                f"point index out of range for {cloud.n_points} points", path, lineno
            )
        try:
            measures.append(Measure(idx, mass))
        except ValueError as exc:
            raise FormatError(str(exc), path, lineno) from None
    return measures


def load_measures(path, cloud: PointCloud | None = None) -> list[Measure]:
    path = Path(path)
    return parse_measures(path.read_text(), cloud, path)


def format_measures(measures: Sequence[Measure]) -> str:
    out = []
    for m in measures:
        body = " ".join(f"{i}:{fmt(v)}" for i, v in zip(m.indices.tolist(), m.masses.tolist()))
        out.append(f"{len(m)} {body}")
    return "\n".join(out) + ("\n" if out else "")


def save_measures(path, measures: Sequence[Measure]):
    Path(path).write_text(format_measures(measures))
