"""The L2 projector onto a kernel space, its L_inf norm and convergence rates.

``T f = sum_xi c_xi v_xi`` with ``G c = V* f``; all inner products are
taken with one quadrature rule, so T is the exact orthogonal projector for
that discrete inner product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla

from . import _backend
from .errors import DomainError, NumericalError
from .geometry import as_points, generate_fibonacci
from .gram import GramMatrix, assemble_gram, inverse_inf_norm
from .lagrange import renormalize, solve_lagrange
from .quadrature import QuadratureRule, default_rule, sample, sup_grid, weighted_lp

ORTHOGONALITY_TOL = 1e-8
SATURATION = 1e-9
PROBE_FACTOR = 2
P_VALUES = (1.0, 2.0, math.inf)


class L2Projector:
    """Least-squares projector for a p=2 basis (or any family) under one rule."""

    def __init__(self, basis, rule: QuadratureRule | None = None, gram: GramMatrix | None = None):
        self.basis = basis
        self.rule = rule if rule is not None else default_rule(basis.point_set.h)
        self.gram = gram if gram is not None else assemble_gram(basis, self.rule)
        try:
            self._factor = sla.cho_factor(self.gram.entries, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"Gram matrix is singular: {exc}") from exc

    @property
    def values(self) -> np.ndarray:
        return self.basis.values_at(self.rule)

    def coefficients(self, f) -> np.ndarray:
        """Solve ``G c = V* f`` and check ``<f - T f, v_xi> = 0``."""
        fv = sample(f, self.rule.nodes)
        V, w = self.values, self.rule.weights
        wf = w[:, None] * fv if fv.ndim == 2 else w * fv
        c = sla.cho_solve(self._factor, V.T @ wf)
        resid = fv - V @ c
        ortho = np.abs(V.T @ (w[:, None] * resid if resid.ndim == 2 else w * resid)).max(axis=0)
        fnorm = weighted_lp(fv, w, 2.0)
        if np.any(ortho > ORTHOGONALITY_TOL * np.maximum(fnorm, 1e-300) + 1e-300):
            raise NumericalError(f"projection residual is not orthogonal ({np.max(ortho):.3e})")
        return c

    def __call__(self, f, X=None) -> np.ndarray:
        """Values of ``T f`` at X (quadrature nodes by default)."""
        c = self.coefficients(f)
        return self.values @ c if X is None else self.basis.combine(as_points(X), c)

    def error(self, f, p: float, grid=None) -> float:
        """``||f - T f||_p``; the sup norm is taken over ``grid``."""
        if not p >= 1:
            raise DomainError("p must be in [1, inf]")
        c = self.coefficients(f)
        if math.isinf(p):
            grid = sup_grid(self.basis.centers) if grid is None else grid
            return float(np.abs(sample(f, grid) - self.basis.combine(grid, c)).max())
        fv = sample(f, self.rule.nodes)
        return float(weighted_lp(fv - self.values @ c, self.rule.weights, p))


def project(f, basis, rule: QuadratureRule | None = None, projector: L2Projector | None = None) -> np.ndarray:
    """Coefficients of ``T f`` in the basis."""
    projector = projector if projector is not None else L2Projector(basis, rule)
    return projector.coefficients(f)


def best_error(f, basis, rule: QuadratureRule | None = None, p: float = 2.0, grid=None,
               projector: L2Projector | None = None) -> float:
    projector = projector if projector is not None else L2Projector(basis, rule)
    return projector.error(f, p, grid)


def interpolation_error(f, basis, rule: QuadratureRule, p: float = 2.0, grid=None) -> float:
    """``||f - I f||_p`` for the kernel interpolant on the basis centers."""
    lagrange = getattr(basis, "base", basis)
    data = sample(f, lagrange.centers)
    if math.isinf(p):
        grid = sup_grid(lagrange.centers) if grid is None else grid
        return float(np.abs(sample(f, grid) - lagrange.combine(grid, data)).max())
    fv = sample(f, rule.nodes)
    return float(weighted_lp(fv - lagrange.combine(rule.nodes, data), rule.weights, p))


class OperatorNorms(NamedTuple):
    V_inf: float
    Vstar_inf: float
    Ginv_inf: float
    product: float
    synthesis_analysis: float


def operator_norm_components(basis, rule: QuadratureRule, grid=None, gram: GramMatrix | None = None,
                             ginv_inf: float | None = None) -> OperatorNorms:
    """``max_x sum |v(x)|``, ``max_xi int |v_xi|``, ``||G^-1||_inf`` and their product.

    ``synthesis_analysis`` is ``V_inf * Vstar_inf``, which the Riesz bounds
    control by ``c2^2`` for the p=2 basis.
    """
    grid = sup_grid(basis.centers) if grid is None else grid
    v_inf = 0.0
    for _, vals in basis.iter_blocks(grid):
        v_inf = max(v_inf, float(np.abs(vals).sum(axis=1).max()))
    vstar = float((rule.weights @ np.abs(basis.values_at(rule))).max())
    if ginv_inf is None:
        gram = gram if gram is not None else assemble_gram(basis, rule)
        ginv_inf = inverse_inf_norm(gram)
    return OperatorNorms(v_inf, vstar, ginv_inf, v_inf * vstar * ginv_inf, v_inf * vstar)


def probe_points(basis, factor: int = PROBE_FACTOR) -> np.ndarray:
    """Prefix of the nested candidate grid (``factor * n`` points) plus the centers."""
    return sup_grid(basis.centers, resolution=factor * basis.n)


def projector_inf_norm_direct(basis, rule: QuadratureRule | None = None, grid=None,
                              projector: L2Projector | None = None) -> float:
    """``max_x int |K_T(x, y)| dy`` with ``K_T(x, y) = v(x)^T G^-1 v(y)``.

    The outer max runs over ``grid`` (default :func:`probe_points`), the
    inner integral over the rule.
    """
    projector = projector if projector is not None else L2Projector(basis, rule)
    grid = probe_points(basis) if grid is None else as_points(grid)
    V, w = projector.values, projector.rule.weights
    best = 0.0
    step = max(1, (1 << 24) // max(len(w), 1))
    for start in range(0, len(grid), step):
        vx = basis.evaluate(grid[start:start + step])
        kt = V @ sla.cho_solve(projector._factor, vx.T)
        best = max(best, float((w @ np.abs(kt)).max()))
    return best


def dictionary_projection(f, kernel, centers, rule: QuadratureRule, X) -> np.ndarray:
    """``T f`` at X computed from normal equations on the translates ``kappa(., xi)``."""
    centers = as_points(centers)
    Phi = kernel.matrix(rule.nodes, centers)
    fv = sample(f, rule.nodes)
    N = Phi.T @ (rule.weights[:, None] * Phi)
    b = Phi.T @ (rule.weights * fv)
    c = sla.cho_solve(sla.cho_factor(0.5 * (N + N.T), lower=True), b)
    return kernel.matrix(as_points(X), centers) @ c


@dataclass
class TestFunction:
    """A target function on the sphere with a declared smoothness tag."""

    __test__ = False

    name: str
    fn: Callable
    kind: str
    smoothness: float
    params: dict = field(default_factory=dict)

    def __call__(self, X):
        return self.fn(as_points(X))


DEFAULT_AXIS = np.array([0.3, -0.5, 0.8]) / math.sqrt(0.98)
LACUNARY_LEVELS = 8


def lacunary_coefficients(s: float, levels: int = LACUNARY_LEVELS) -> np.ndarray:
    """Legendre coefficients ``(l + 1/2)^(1/2 - s)`` at ``l = 1, 2, 4, ..., 2^(levels-1)``."""
    top = 2 ** (levels - 1)
    c = np.zeros(top + 1)
    for k in range(levels):
        ell = 2**k
        c[ell] = (ell + 0.5) ** (0.5 - s)
    return c


def make_test_function(kind: str, s: float | None = None, axis=None, basis=None,
                       seed: int = 0) -> TestFunction:
    """Catalogue of targets.

    ``smooth``: ``exp(x . a)``. ``rough``: zonal lacunary Legendre series
    with L2 smoothness s in (0, 4). ``in_span``: random member of the span
    of ``basis``.
    """
    a = DEFAULT_AXIS if axis is None else np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    if kind == "smooth":
        return TestFunction("smooth", lambda X: np.exp(X @ a), kind, math.inf, {"axis": a.tolist()})
    if kind == "rough":
        if s is None or not 0 < s < 4:
            raise DomainError(f"rough targets need smoothness s in (0, 4), got {s}")
        c = lacunary_coefficients(s)
        return TestFunction(f"rough_s{s:g}", lambda X: _backend.legendre_clenshaw(c, np.clip(X @ a, -1.0, 1.0)),
                            kind, float(s), {"axis": a.tolist(), "s": float(s)})
    if kind == "in_span":
        if basis is None:
            raise DomainError("in_span targets need a basis")
        coeffs = np.random.default_rng(seed).standard_normal(basis.n)
        return TestFunction("in_span", lambda X: basis.combine(X, coeffs), kind, math.inf,
                            {"seed": seed, "n": basis.n, "coefficients": coeffs})
    raise DomainError(f"unknown test function kind {kind!r}")


def fit_order(hs, errors) -> float:
    """Least-squares slope of ``log error`` against ``log h``."""
    hs, errors = np.asarray(hs, dtype=float), np.asarray(errors, dtype=float)
    if len(hs) < 2 or np.any(errors <= 0):
        return math.nan
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def consecutive_orders(hs, errors) -> list[float]:
    hs, errors = np.asarray(hs, dtype=float), np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (np.log(errors[1:] / errors[:-1]) / np.log(hs[1:] / hs[:-1])).tolist()


@dataclass
class ConvergenceResult:
    function: str
    levels: list
    h: list
    errors: dict
    orders: dict
    consecutive: dict
    saturated: dict


def summarize_convergence(name: str, levels, hs, errors: dict, scale: dict | None = None) -> ConvergenceResult:
    """Fitted and consecutive orders per p; saturated when the finest error is at the floor."""
    scale = scale or {}
    orders, consec, sat = {}, {}, {}
    for p, errs in errors.items():
        floor = SATURATION * max(1.0, scale.get(p, 1.0))
        sat[p] = bool(errs[-1] <= floor)
        orders[p] = math.nan if sat[p] else fit_order(hs, errs)
        consec[p] = consecutive_orders(hs, errs)
    return ConvergenceResult(name, list(levels), list(hs), errors, orders, consec, sat)


def convergence_study(kernel, f: TestFunction, levels, p_values=P_VALUES,
                      rule: QuadratureRule | None = None, grid=None) -> ConvergenceResult:
    """Projection errors on Fibonacci sets of the given sizes and the fitted orders in h.

    One quadrature rule, sized for the finest level, is shared by all
    levels so that differences between levels are not quadrature noise.
    """
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise DomainError("levels must be strictly increasing")
    sets = [generate_fibonacci(n) for n in levels]
    rule = rule if rule is not None else default_rule(sets[-1].h)
    errors = {p: [] for p in p_values}
    norms = {p: float(weighted_lp(sample(f, rule.nodes), rule.weights, p)) if not math.isinf(p)
             else float(np.abs(sample(f, sup_grid(None))).max()) for p in p_values}
    for ps in sets:
        proj = L2Projector(renormalize(solve_lagrange(kernel, ps), 2.0), rule)
        for p in p_values:
            errors[p].append(proj.error(f, p, grid))
        proj.basis.clear_cache()
    return summarize_convergence(f.name, levels, [ps.h for ps in sets], errors, norms)


@dataclass
class ProjectorReport:
    n: int
    h: float
    q: float
    rho: float
    V_inf_norm: float
    Vstar_inf_norm: float
    Ginv_inf_norm: float
    product_bound: float
    direct_Tinf_estimate: float
    errors: dict = field(default_factory=dict)
    interpolation_errors: dict = field(default_factory=dict)
    empirical_orders: dict = field(default_factory=dict)

    def opnorm_row(self) -> dict:
        return {"n": self.n, "Vinf": self.V_inf_norm, "Vstarinf": self.Vstar_inf_norm,
                "Ginv": self.Ginv_inf_norm, "product": self.product_bound,
                "direct": self.direct_Tinf_estimate}
