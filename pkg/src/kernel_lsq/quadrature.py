"""Product quadrature on the sphere and the discrete inner products built on it."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .geometry import candidate_grid

FOUR_PI = 4.0 * math.pi
MIN_N_THETA = 64
NODES_PER_H = 8.0
MIN_SUP_GRID = 10_000
SUP_GRID_FACTOR = 20


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    n_theta: int = 0
    n_phi: int = 0

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise DomainError("quadrature weights must be positive")
        for a in (self.nodes, self.weights):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def key(self) -> tuple:
        return ("product", self.n_theta, self.n_phi, len(self))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z", "w"])
            for (x, y, z), w in zip(self.nodes, self.weights):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(z)), repr(float(w))])


def product_rule(n_theta: int, n_phi: int) -> QuadratureRule:
    """Gauss-Legendre in ``cos(theta)`` times equispaced longitudes."""
    if n_theta < 1 or n_phi < 1:
        raise DomainError("n_theta and n_phi must be >= 1")
    z, wz = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    r = np.sqrt(1.0 - z * z)
    nodes = np.column_stack(
        [
            np.outer(r, np.cos(phi)).ravel(),
            np.outer(r, np.sin(phi)).ravel(),
            np.repeat(z, n_phi),
        ]
    )
    weights = np.repeat(wz * (2.0 * math.pi / n_phi), n_phi)
    return QuadratureRule(nodes, weights, min(2 * n_theta - 1, n_phi - 1), n_theta, n_phi)


def default_rule(h: float, min_n_theta: int = MIN_N_THETA, nodes_per_h: float = NODES_PER_H) -> QuadratureRule:
    """Rule resolving features on scale h: ``n_theta = n_phi / 2 = max(64, ceil(8 / h))``."""
    n_theta = max(min_n_theta, math.ceil(nodes_per_h / h))
    return product_rule(n_theta, 2 * n_theta)


def sup_grid(centers=None, resolution: int | None = None) -> np.ndarray:
    """Candidate grid for sup-norms, with the centers appended when given.

    Default size is ``max(10**4, 20 n)``.
    """
    n = 0 if centers is None else len(centers)
    m = resolution if resolution is not None else max(MIN_SUP_GRID, SUP_GRID_FACTOR * n)
    grid = candidate_grid(m)
    return grid if centers is None else np.vstack([grid, np.asarray(centers, dtype=float)])


def sample(f, points) -> np.ndarray:
    """Values of f at the points; f is a callable on ``(m, 3)`` arrays or precomputed samples."""
    values = f(points) if callable(f) else f
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(points):
        raise DomainError(f"expected {len(points)} samples, got {values.shape[0]}")
    if not np.all(np.isfinite(values)):
        raise NumericalError("non-finite function sample")
    return values


def integrate(f, rule: QuadratureRule) -> float:
    return float(rule.weights @ sample(f, rule.nodes))


def inner_product(f, g, rule: QuadratureRule) -> float:
    return float(rule.weights @ (sample(f, rule.nodes) * sample(g, rule.nodes)))


def lp_norm(f, p: float, rule: QuadratureRule, grid: np.ndarray | None = None):
    """Discrete L_p norm; ``p = inf`` takes the max over ``grid``.

    The default sup grid is the candidate grid with as many points as the
    rule has nodes. Works columnwise when f returns a 2-D array.
    """
    if not (p >= 1):
        raise DomainError(f"p must be in [1, inf], got {p}")
    if math.isinf(p):
        pts = candidate_grid(len(rule)) if grid is None else grid
        return weighted_lp(sample(f, pts), None, p)
    return weighted_lp(sample(f, rule.nodes), rule.weights, p)


def weighted_lp(values: np.ndarray, weights: np.ndarray, p: float):
    """L_p norms of sampled columns: ``(sum w |v|^p)^(1/p)``, or max for p = inf."""
    a = np.abs(values)
    if math.isinf(p):
        return a.max(axis=0)
    if p == 1:
        return weights @ a
    if p == 2:
        return np.sqrt(weights @ (a * a))
    return (weights @ a**p) ** (1.0 / p)
