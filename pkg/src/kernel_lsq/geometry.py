"""Points on the unit 2-sphere and their mesh statistics.

Point clouds are stored as ``(n, 3)`` float arrays of unit vectors. The
mesh norm ``h`` (fill distance) is estimated from below by scanning a
nested candidate sequence; the separation radius ``q`` is exact.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateSetError, DomainError, SizeError

DUPLICATE_TOL = 1e-12
MIN_CANDIDATE_RESOLUTION = 16
# candidates per center when no resolution is given
DEFAULT_CANDIDATE_FACTOR = 100

_PLASTIC = 1.324717957244746
_KRONECKER_STEP = (1.0 / _PLASTIC, 1.0 / _PLASTIC**2)
_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class SpherePoint:
    """A unit vector; the constructor normalizes its input."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        r = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(r) or r == 0.0:
            raise DomainError(f"cannot normalize ({self.x}, {self.y}, {self.z})")
        object.__setattr__(self, "x", self.x / r)
        object.__setattr__(self, "y", self.y / r)
        object.__setattr__(self, "z", self.z / r)

    @classmethod
    def from_lonlat(cls, lon: float, lat: float) -> "SpherePoint":
        return cls(math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


NORTH = SpherePoint(0.0, 0.0, 1.0)
SOUTH = SpherePoint(0.0, 0.0, -1.0)


def as_points(points) -> np.ndarray:
    """Coerce SpherePoints or an array-like to a normalized ``(n, 3)`` array."""
    if isinstance(points, PointSet):
        return points.points
    if isinstance(points, SpherePoint):
        return points.as_array()[None, :]
    seq = list(points) if not isinstance(points, np.ndarray) else points
    if len(seq) and isinstance(seq[0], SpherePoint):
        arr = np.array([p.as_array() for p in seq])
    else:
        arr = np.array(seq, dtype=float).reshape(-1, 3)
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise DomainError("points must be finite and nonzero")
    return arr / norms[:, None]


def geodesic_distance(a, b) -> float:
    """Great-circle distance between two points, in ``[0, pi]``."""
    u = a.as_array() if isinstance(a, SpherePoint) else np.asarray(a, dtype=float)
    v = b.as_array() if isinstance(b, SpherePoint) else np.asarray(b, dtype=float)
    return float(pairwise_distances(u[None, :], v[None, :])[0, 0])


def pairwise_distances(X, Y) -> np.ndarray:
    """Geodesic distance matrix between the rows of X and Y.

    Uses ``atan2(|x cross y|, x.y)``, which equals the clamped arccos of the
    inner product but stays accurate for nearly coincident points.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    dot = X @ Y.T
    # |x cross y|^2 = |x|^2 |y|^2 - (x.y)^2 loses accuracy near 0; use components
    cx = X[:, None, 1] * Y[None, :, 2] - X[:, None, 2] * Y[None, :, 1]
    cy = X[:, None, 2] * Y[None, :, 0] - X[:, None, 0] * Y[None, :, 2]
    cz = X[:, None, 0] * Y[None, :, 1] - X[:, None, 1] * Y[None, :, 0]
    return np.arctan2(np.sqrt(cx * cx + cy * cy + cz * cz), dot)


def chord_to_geodesic(c):
    return 2.0 * np.arcsin(np.minimum(np.asarray(c) / 2.0, 1.0))


def geodesic_to_chord(d):
    return 2.0 * np.sin(np.minimum(np.asarray(d), math.pi) / 2.0)


def fibonacci_lattice(n: int) -> np.ndarray:
    """Spherical Fibonacci (golden-angle spiral) lattice with n points."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = _GOLDEN_ANGLE * np.arange(n)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def candidate_grid(m: int) -> np.ndarray:
    """First m points of an equal-area Kronecker sequence on the sphere.

    The sequence is nested (the grid for m is a prefix of the grid for
    m + 1), so sup-estimates over it are nondecreasing in m.
    """
    i = np.arange(m, dtype=float)
    u = np.mod(0.5 + i * _KRONECKER_STEP[0], 1.0)
    v = np.mod(0.5 + i * _KRONECKER_STEP[1], 1.0)
    z = 1.0 - 2.0 * u
    phi = 2.0 * math.pi * v
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


class MeshStats(NamedTuple):
    h: float
    q: float
    rho: float


def _separation(X: np.ndarray) -> tuple[float, tuple[int, int]]:
    tree = cKDTree(X)
    chord, idx = tree.query(X, k=2)
    d = chord_to_geodesic(chord[:, 1])
    i = int(np.argmin(d))
    j = int(idx[i, 1])
    dmin = float(pairwise_distances(X[i : i + 1], X[j : j + 1])[0, 0])
    if dmin < DUPLICATE_TOL:
        raise DegenerateSetError(f"points {i} and {j} coincide (distance {dmin:.3e})")
    return 0.5 * dmin, (i, j)


def _fill_distance(X: np.ndarray, candidates: np.ndarray, workers: int = 1) -> float:
    chord, _ = cKDTree(X).query(candidates, k=1, workers=workers)
    return float(chord_to_geodesic(chord.max()))


def mesh_stats(points, candidate_resolution: int | None = None, workers: int = 1) -> MeshStats:
    """Mesh norm, separation radius and mesh ratio of a point cloud.

    ``h`` is the largest distance from a candidate to its nearest point,
    over ``candidate_resolution`` points of :func:`candidate_grid` plus the
    midpoint of the closest pair (which guarantees ``h >= q``).
    """
    X = as_points(points)
    n = len(X)
    if n < 2:
        raise SizeError(f"mesh statistics need at least 2 points, got {n}")
    if candidate_resolution is None:
        candidate_resolution = max(MIN_CANDIDATE_RESOLUTION, DEFAULT_CANDIDATE_FACTOR * n)
    if candidate_resolution < MIN_CANDIDATE_RESOLUTION:
        raise DomainError(f"candidate_resolution must be >= {MIN_CANDIDATE_RESOLUTION}")
    q, (i, j) = _separation(X)
    mid = X[i] + X[j]
    norm = np.linalg.norm(mid)
    extra = [mid / norm] if norm > 1e-12 else []
    cands = np.vstack([candidate_grid(candidate_resolution)] + [np.array(extra).reshape(-1, 3)])
    h = max(_fill_distance(X, cands, workers), q)
    return MeshStats(h, q, h / q)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Immutable centers with cached mesh statistics.

    Singletons get the conventions ``h = pi`` and ``q = pi / 2``.
    """

    points: np.ndarray
    mesh_norm: float
    separation_radius: float
    mesh_ratio: float
    candidate_resolution: int
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_points(cls, points, candidate_resolution: int | None = None, **meta) -> "PointSet":
        X = as_points(points)
        if len(X) == 0:
            raise SizeError("empty point set")
        X = np.ascontiguousarray(X)
        X.setflags(write=False)
        if len(X) == 1:
            res = candidate_resolution or MIN_CANDIDATE_RESOLUTION
            return cls(X, math.pi, math.pi / 2.0, 2.0, res, dict(meta))
        if candidate_resolution is None:
            candidate_resolution = max(MIN_CANDIDATE_RESOLUTION, DEFAULT_CANDIDATE_FACTOR * len(X))
        h, q, rho = mesh_stats(X, candidate_resolution)
        return cls(X, h, q, rho, candidate_resolution, dict(meta))

    @property
    def h(self) -> float:
        return self.mesh_norm

    @property
    def q(self) -> float:
        return self.separation_radius

    @property
    def rho(self) -> float:
        return self.mesh_ratio

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i) -> SpherePoint:
        return SpherePoint(*self.points[i])

    @cached_property
    def distances(self) -> np.ndarray:
        """Geodesic distance matrix between the centers."""
        d = pairwise_distances(self.points, self.points)
        d.setflags(write=False)
        return d

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.points).tobytes()).hexdigest()

    def stats_dict(self) -> dict:
        return {
            "n": len(self),
            "h": self.mesh_norm,
            "q": self.separation_radius,
            "rho": self.mesh_ratio,
            "candidate_resolution": self.candidate_resolution,
        }

    def save_csv(self, path) -> None:
        """Write ``x,y,z`` rows plus a sidecar ``.json`` with the statistics."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z"])
            for p in self.points:
                writer.writerow([repr(float(c)) for c in p])
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(self.stats_dict(), fh, indent=2)

    @classmethod
    def load_csv(cls, path, candidate_resolution: int | None = None) -> "PointSet":
        """Read an ``x,y,z`` CSV; rows are renormalized and statistics recomputed."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "z"]:
                raise DomainError(f"{path}: expected header x,y,z")
            rows = [[float(r["x"]), float(r["y"]), float(r["z"])] for r in reader]
        return cls.from_points(rows, candidate_resolution, source=str(path))


def generate_fibonacci(n: int, candidate_resolution: int | None = None) -> PointSet:
    if n < 2:
        raise SizeError(f"Fibonacci lattice needs n >= 2, got {n}")
    return PointSet.from_points(fibonacci_lattice(n), candidate_resolution, generator="fibonacci")


def thin_to_separation(points, q_min: float, candidate_resolution: int | None = None) -> PointSet:
    """Greedy thinning: keep a point unless an earlier kept point is closer than 2*q_min."""
    if q_min <= 0:
        raise DomainError("q_min must be positive")
    X = as_points(points)
    if len(X) == 0:
        raise SizeError("cannot thin an empty cloud")
    sep = 2.0 * q_min
    tree = cKDTree(X)
    # slight chordal slack, then an exact geodesic test
    radius = float(geodesic_to_chord(sep)) * (1 + 1e-9) + 1e-15
    blocked = np.zeros(len(X), dtype=bool)
    keep = []
    for i in range(len(X)):
        if blocked[i]:
            continue
        keep.append(i)
        near = np.array(tree.query_ball_point(X[i], radius), dtype=np.intp)
        near = near[near > i]
        if near.size:
            d = pairwise_distances(X[i : i + 1], X[near])[0]
            blocked[near[d < sep]] = True
    return PointSet.from_points(X[keep], candidate_resolution, generator="thinned", q_min=q_min)


@dataclass(frozen=True)
class ManifoldConstants:
    alpha: float
    omega: float
    counting: float
    inradius: float
    dimension: int = 2


def ball_volume(r):
    """Area of a geodesic cap of radius r on the unit sphere."""
    return 4.0 * math.pi * np.sin(0.5 * np.asarray(r, dtype=float)) ** 2


def sphere_constants() -> ManifoldConstants:
    """Volume and packing constants of the unit 2-sphere.

    From ``2 r^2 / pi^2 <= 1 - cos r <= r^2 / 2`` on ``[0, pi]``:
    ``(4/pi) r^2 <= vol B(x, r) <= pi r^2``; the packing constant is
    ``omega 2^d / alpha = pi^2``.
    """
    alpha = 4.0 / math.pi
    omega = math.pi
    return ManifoldConstants(alpha, omega, omega * 2**2 / alpha, math.pi, 2)
