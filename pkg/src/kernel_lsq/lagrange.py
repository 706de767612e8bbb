"""Lagrange (cardinal) bases for kernel spaces on the sphere.

A basis stores the coefficient matrix ``A`` with
``chi_xi = sum_zeta A[zeta, xi] kappa(., zeta)``; for surface splines an
extra block ``B`` multiplies spherical harmonics of low degree.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, IllConditionedError, NotUnisolventError, NumericalError
from .geometry import PointSet, as_points
from .kernels import LegendreSeriesKernel, SurfaceSplineKernel
from .quadrature import QuadratureRule, sample

MAX_CONDITION = 1e12
LAGRANGE_TOL = 1e-8
# entries per evaluation block
BLOCK_ENTRIES = 1 << 22
ROUNDOFF_SAFETY = 100.0


def _blocks(m: int, n: int):
    step = max(1, BLOCK_ENTRIES // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def harmonic_basis(X, degree: int) -> np.ndarray:
    """Monomials of degree ``degree`` and ``degree - 1`` restricted to the sphere.

    Together they span the spherical harmonics of degree <= ``degree`` and
    are linearly independent there, giving ``(degree + 1)**2`` columns.
    """
    X = np.atleast_2d(X)
    cols = []
    for total in (degree, degree - 1):
        if total < 0:
            continue
        for a, b in product(range(total + 1), repeat=2):
            c = total - a - b
            if c < 0:
                continue
            cols.append(X[:, 0] ** a * X[:, 1] ** b * X[:, 2] ** c)
    return np.column_stack(cols)


def collocation_matrix(kernel, point_set) -> np.ndarray:
    """Symmetric matrix ``K[xi, zeta] = kappa(xi . zeta)``."""
    X = as_points(point_set)
    K = kernel.matrix(X, X)
    return 0.5 * (K + K.T)


@dataclass(frozen=True, eq=False)
class LagrangeBasis:
    point_set: PointSet
    kernel: LegendreSeriesKernel | SurfaceSplineKernel
    coefficients: np.ndarray
    collocation_condition: float
    augmentation_degree: int | None = None
    poly_coefficients: np.ndarray | None = None
    residual: float = 0.0
    delta_error: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.point_set)

    def __len__(self) -> int:
        return self.n

    @property
    def centers(self) -> np.ndarray:
        return self.point_set.points

    @property
    def q(self) -> float:
        return self.point_set.q

    @property
    def scale(self) -> float:
        return 1.0

    def dictionary_coefficients(self, coeffs) -> tuple[np.ndarray, np.ndarray | None]:
        """Map Lagrange coefficients to kernel-translate (and harmonic) coefficients."""
        coeffs = np.asarray(coeffs, dtype=float)
        a = self.coefficients @ coeffs
        b = None if self.poly_coefficients is None else self.poly_coefficients @ coeffs
        return a, b

    def _apply(self, X, a, b):
        out = self.kernel.matrix(X, self.centers) @ a
        if b is not None:
            out += harmonic_basis(X, self.augmentation_degree) @ b
        return out

    def iter_blocks(self, X, columns=None):
        """Yield ``(rows, values)`` blocks of the basis evaluated at X."""
        X = as_points(X)
        A = self.coefficients if columns is None else self.coefficients[:, columns]
        B = None
        if self.poly_coefficients is not None:
            B = self.poly_coefficients if columns is None else self.poly_coefficients[:, columns]
        for rows in _blocks(len(X), self.n):
            yield rows, self._apply(X[rows], A, B)

    def evaluate(self, X, columns=None) -> np.ndarray:
        """Matrix ``[chi_xi(x)]`` with one row per point of X."""
        X = as_points(X)
        width = self.n if columns is None else len(np.atleast_1d(np.arange(self.n)[columns]))
        out = np.empty((len(X), width))
        for rows, vals in self.iter_blocks(X, columns):
            out[rows] = vals
        return out

    def combine(self, X, coeffs) -> np.ndarray:
        """Values of ``sum_xi coeffs[xi] chi_xi`` at X (coeffs may have several columns)."""
        X = as_points(X)
        a, b = self.dictionary_coefficients(coeffs)
        out = np.empty((len(X),) + a.shape[1:])
        for rows in _blocks(len(X), self.n):
            out[rows] = self._apply(X[rows], a, b)
        return out

    def values_at(self, rule: QuadratureRule) -> np.ndarray:
        """Basis values at the rule's nodes (memoized for the last rule)."""
        hit = self._cache.get("rule")
        if hit is not None and hit[0] is rule:
            return hit[1]
        self._cache.pop("rule", None)
        vals = self.evaluate(rule.nodes)
        vals.setflags(write=False)
        self._cache["rule"] = (rule, vals)
        return vals

    def clear_cache(self) -> None:
        self._cache.clear()

    @cached_property
    def roundoff_floor(self) -> np.ndarray:
        """Per-function magnitude below which values are rounding noise.

        ``|chi_xi(x)|`` is computed as a sum of ``kappa(x . zeta) A[zeta, xi]``
        terms, so its absolute error is on the order of
        ``eps * max|kappa| * ||A[:, xi]||_1``.
        """
        peak = _kernel_peak(self.kernel)
        col = np.abs(self.coefficients).sum(axis=0)
        return ROUNDOFF_SAFETY * np.finfo(float).eps * peak * col


def _kernel_peak(kernel) -> float:
    if isinstance(kernel, LegendreSeriesKernel):
        return kernel.peak()
    t = np.linspace(-1.0, 1.0, 4001)
    return float(np.abs(kernel(t)).max())


@dataclass(frozen=True, eq=False)
class RenormalizedBasis:
    """``v_{p,xi} = q^(-2/p) chi_xi`` on the 2-sphere."""

    base: LagrangeBasis
    p: float
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (self.p >= 1):
            raise DomainError("p must be in [1, inf]")

    @property
    def scale(self) -> float:
        return 1.0 if math.isinf(self.p) else self.base.q ** (-2.0 / self.p)

    @property
    def n(self) -> int:
        return self.base.n

    def __len__(self) -> int:
        return self.n

    @property
    def point_set(self) -> PointSet:
        return self.base.point_set

    @property
    def centers(self) -> np.ndarray:
        return self.base.centers

    @property
    def q(self) -> float:
        return self.base.q

    @property
    def roundoff_floor(self) -> np.ndarray:
        return self.scale * self.base.roundoff_floor

    def iter_blocks(self, X, columns=None):
        for rows, vals in self.base.iter_blocks(X, columns):
            yield rows, self.scale * vals

    def evaluate(self, X, columns=None) -> np.ndarray:
        return self.scale * self.base.evaluate(X, columns)

    def combine(self, X, coeffs) -> np.ndarray:
        return self.scale * self.base.combine(X, coeffs)

    def values_at(self, rule: QuadratureRule) -> np.ndarray:
        hit = self._cache.get("rule")
        if hit is not None and hit[0] is rule:
            return hit[1]
        self._cache.clear()
        vals = self.scale * self.base.evaluate(rule.nodes)
        vals.setflags(write=False)
        self._cache["rule"] = (rule, vals)
        return vals

    def clear_cache(self) -> None:
        self._cache.clear()
        self.base.clear_cache()


def renormalize(basis: LagrangeBasis, p: float) -> RenormalizedBasis:
    return RenormalizedBasis(basis, float(p))


def solve_lagrange(kernel, point_set: PointSet, max_condition: float = MAX_CONDITION,
                   tol: float = LAGRANGE_TOL) -> LagrangeBasis:
    """Cardinal functions for a positive definite kernel via Cholesky."""
    if getattr(kernel, "conditionally_positive_definite", False):
        return solve_augmented_lagrange(kernel, point_set, max_condition, tol)
    X = point_set.points
    n = len(X)
    K = collocation_matrix(kernel, point_set)
    ev = sla.eigvalsh(K)
    cond = math.inf if ev[0] <= 0 else float(ev[-1] / ev[0])
    if cond > max_condition:
        raise IllConditionedError("collocation matrix", cond)
    try:
        factor = sla.cho_factor(K, lower=True)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"Cholesky failed: {exc}", cond) from exc
    A = sla.cho_solve(factor, np.eye(n))
    A = 0.5 * (A + A.T)
    residual = float(np.abs(K @ A - np.eye(n)).max())
    basis = LagrangeBasis(point_set, kernel, A, cond, residual=residual)
    return _verified(basis, tol)


def _verified(basis: LagrangeBasis, tol: float) -> LagrangeBasis:
    delta = float(np.abs(basis.evaluate(basis.centers) - np.eye(basis.n)).max())
    object.__setattr__(basis, "delta_error", delta)
    if basis.residual > tol or delta > tol:
        raise NumericalError(
            f"Lagrange property violated: residual {basis.residual:.3e}, delta error {delta:.3e}"
        )
    return basis


def solve_augmented_lagrange(kernel: SurfaceSplineKernel, point_set: PointSet,
                             max_condition: float = MAX_CONDITION,
                             tol: float = LAGRANGE_TOL) -> LagrangeBasis:
    """Cardinal functions in ``S(phi_m, Xi) + Pi_D`` with moment side conditions.

    Solves the saddle system ``[[K, P], [P^T, 0]] [A; B] = [I; 0]`` with a
    pivoted symmetric-indefinite factorization.
    """
    X = point_set.points
    n = len(X)
    D = kernel.harmonic_degree
    P = harmonic_basis(X, D)
    M = P.shape[1]
    if n < M or np.linalg.matrix_rank(P) < M:
        raise NotUnisolventError(
            f"{n} centers do not determine the {M} harmonics of degree <= {D}"
        )
    K = collocation_matrix(kernel, point_set)
    system = np.block([[K, P], [P.T, np.zeros((M, M))]])
    cond = float(np.linalg.cond(system))
    if not math.isfinite(cond) or cond > max_condition:
        raise IllConditionedError("augmented collocation system", cond)
    rhs = np.vstack([np.eye(n), np.zeros((M, n))])
    sol = sla.solve(system, rhs, assume_a="sym")
    A, B = sol[:n], sol[n:]
    residual = float(np.abs(K @ A + P @ B - np.eye(n)).max())
    side = float(np.abs(P.T @ A).max())
    if side > tol:
        raise NumericalError(f"side conditions violated by {side:.3e}")
    basis = LagrangeBasis(point_set, kernel, A, cond, augmentation_degree=D,
                          poly_coefficients=B, residual=residual)
    return _verified(basis, tol)


def eval_lagrange(basis, index: int, x) -> float | np.ndarray:
    """Value(s) of ``chi_index`` at x (a SpherePoint or array of points)."""
    if not 0 <= index < basis.n:
        raise IndexError(f"center index {index} out of range for {basis.n} centers")
    X = as_points(x)
    vals = basis.evaluate(X, columns=[index])[:, 0]
    return float(vals[0]) if vals.size == 1 else vals


def eval_combination(basis, coeffs, x) -> float | np.ndarray:
    """Synthesis map: value(s) of ``sum_xi coeffs[xi] v_xi`` at x."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != basis.n:
        raise DomainError(f"need {basis.n} coefficients, got {coeffs.shape[0]}")
    vals = basis.combine(as_points(x), coeffs)
    return float(vals[0]) if vals.size == 1 else vals


def analysis_map(basis, f, rule: QuadratureRule) -> np.ndarray:
    """Adjoint of the synthesis map: ``(<f, v_xi>)_xi`` by quadrature."""
    fv = sample(f, rule.nodes)
    return basis.values_at(rule).T @ (rule.weights * fv)


def save_basis(basis: LagrangeBasis, path) -> None:
    """Write ``<path>.npz`` (coefficients) and ``<path>.json`` (header)."""
    path = Path(path)
    arrays = {"coefficients": basis.coefficients}
    if basis.poly_coefficients is not None:
        arrays["poly_coefficients"] = basis.poly_coefficients
    np.savez(path.with_suffix(".npz"), **arrays)
    header = {
        "kernel": basis.kernel.to_json(),
        "point_set_sha256": basis.point_set.digest(),
        "n": basis.n,
        "residual": basis.residual,
        "delta_error": basis.delta_error,
        "collocation_condition": basis.collocation_condition,
        "augmentation_degree": basis.augmentation_degree,
    }
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(header, fh, indent=2)


def load_basis(path, point_set: PointSet, kernel=None) -> LagrangeBasis:
    """Inverse of :func:`save_basis`; the point set must match the stored hash."""
    from .kernels import kernel_from_json

    path = Path(path)
    with open(path.with_suffix(".json")) as fh:
        header = json.load(fh)
    if header["point_set_sha256"] != point_set.digest():
        raise DomainError("point set does not match the stored basis")
    data = np.load(path.with_suffix(".npz"))
    kernel = kernel if kernel is not None else kernel_from_json(header["kernel"])
    return LagrangeBasis(
        point_set,
        kernel,
        data["coefficients"],
        header["collocation_condition"],
        augmentation_degree=header["augmentation_degree"],
        poly_coefficients=data["poly_coefficients"] if "poly_coefficients" in data else None,
        residual=header["residual"],
        delta_error=header["delta_error"],
    )


class FunctionFamily:
    """Ad hoc family of functions indexed by centers, sharing the basis interface.

    ``fn(X, C)`` returns the ``(len(X), len(C))`` matrix whose column j is
    the function attached to center ``C[j]`` evaluated at X. Used for
    synthetic checks (orthonormal systems, constants, prescribed decay).
    """

    scale = 1.0

    def __init__(self, centers, fn, q: float | None = None):
        self.centers = as_points(centers)
        self._fn = fn
        if q is None:
            if len(self.centers) < 2:
                raise DomainError("q is required for a single-center family")
            q = PointSet.from_points(self.centers).q
        self.q = float(q)
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return len(self.centers)

    def __len__(self) -> int:
        return self.n

    @property
    def roundoff_floor(self) -> np.ndarray:
        return np.zeros(self.n)

    def iter_blocks(self, X, columns=None):
        X = as_points(X)
        C = self.centers if columns is None else self.centers[columns]
        for rows in _blocks(len(X), len(C)):
            yield rows, np.asarray(self._fn(X[rows], C), dtype=float).reshape(rows.stop - rows.start, len(C))

    def evaluate(self, X, columns=None) -> np.ndarray:
        X = as_points(X)
        return np.vstack([vals for _, vals in self.iter_blocks(X, columns)])

    def combine(self, X, coeffs) -> np.ndarray:
        return self.evaluate(X) @ np.asarray(coeffs, dtype=float)

    def values_at(self, rule: QuadratureRule) -> np.ndarray:
        hit = self._cache.get("rule")
        if hit is not None and hit[0] is rule:
            return hit[1]
        vals = self.evaluate(rule.nodes)
        self._cache["rule"] = (rule, vals)
        return vals

    def clear_cache(self) -> None:
        self._cache.clear()
