"""Zonal kernels on the 2-sphere.

Two families:

* :class:`LegendreSeriesKernel` -- ``kappa(t) = sum_l c_l P_l(t)`` with
  nonnegative folded weights ``c_l``; :func:`sobolev_kernel` builds the
  Green's-function series with multipliers ``(l + 1/2)^(-beta)``.
* :class:`SurfaceSplineKernel` -- restricted surface splines
  ``(1 - t)^(m - d/2) [log(1 - t)]``, conditionally positive definite.

``kernel(t)`` evaluates directly (Clenshaw or closed form).
``kernel.matrix(X, Y)`` is the fast path used for matrix assembly: series
kernels go through a cubic table in ``w = ((1 - t)/2)^(1/4)``, a variable
in which the ``theta^2 log theta``-type singularity at ``t = 1`` is smooth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .errors import DivergentSeriesError, DomainError, NotPositiveDefiniteError

LAMBDA_2 = 0.5  # (d - 1) / 2 on the 2-sphere
DEFAULT_TAIL_TOLERANCE = 1e-10
MAX_DEGREE = 2_000_000
TABLE_INTERVALS = 8192


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(np.abs(t) > 1.0 + 1e-12):
        raise DomainError("argument t must lie in [-1, 1]")
    return np.clip(t, -1.0, 1.0)


def legendre_eval(ell: int, t):
    """Legendre polynomial ``P_ell(t)`` by the three-term recurrence."""
    if ell < 0:
        raise DomainError("degree must be nonnegative")
    t = _check_t(t)
    p_prev, p = np.ones_like(t), t.copy()
    if ell == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for k in range(1, ell):
        p_prev, p = p, ((2 * k + 1) * t * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


@dataclass(frozen=True, eq=False)
class LegendreSeriesKernel:
    """Truncated zonal series ``sum_{l<=L} c_l P_l(t)`` with all ``c_l >= 0``."""

    coefficients: np.ndarray
    beta: float | None = None
    tail_bound: float = 0.0
    tail_tolerance: float = math.inf
    lambda_d: float = LAMBDA_2
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DomainError("coefficients must be a nonempty vector")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise NotPositiveDefiniteError("series coefficients must be finite and >= 0")
        if self.tail_bound > self.tail_tolerance:
            raise DomainError("tail bound exceeds the declared tolerance")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def truncation_degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def conditionally_positive_definite(self) -> bool:
        return False

    def peak(self) -> float:
        """kappa(1) = sum of the coefficients."""
        return float(self.coefficients.sum())

    def __call__(self, t):
        t = _check_t(t)
        out = _backend.legendre_clenshaw(self.coefficients, t)
        return out if np.ndim(out) else float(out)

    @cached_property
    def table(self) -> np.ndarray:
        """Per-interval cubic coefficients (highest power first) on a uniform w-grid."""
        w = np.linspace(0.0, 1.0, TABLE_INTERVALS + 1)
        t = 1.0 - 2.0 * w**4
        values = _backend.legendre_clenshaw(self.coefficients, t)
        spline = CubicSpline(w, values)
        coef = np.ascontiguousarray(spline.c.T)
        coef.setflags(write=False)
        return coef

    def matrix(self, X, Y) -> np.ndarray:
        """``[kappa(x . y)]`` for rows x of X and y of Y."""
        return _backend.zonal_table_matrix(X, Y, self.table)

    def to_json(self) -> dict:
        return dict(self.descriptor) if self.descriptor else {
            "type": "series",
            "coefficients": self.coefficients.tolist(),
        }


def sobolev_tail_bound(beta: float, degree: int) -> float:
    """Integral-comparison bound on ``sum_{l > degree} (l+1/2)^(1-beta) / (2 pi)``."""
    return (degree + 0.5) ** (2.0 - beta) / (2.0 * math.pi * (beta - 2.0))


def _sobolev_degree(beta: float, tail_tolerance: float) -> int:
    # smallest L with (L + 1/2)^(2-beta) / (2 pi (beta-2)) <= tol
    x = (2.0 * math.pi * (beta - 2.0) * tail_tolerance) ** (1.0 / (2.0 - beta)) - 0.5
    L = max(0, math.ceil(x) - 1)
    while sobolev_tail_bound(beta, L) > tail_tolerance:
        L += 1
    return L


@lru_cache(maxsize=16)
def sobolev_kernel(beta: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> LegendreSeriesKernel:
    """Green's-function series with ``c_l = (l + 1/2)^(-beta) (2l + 1) / (4 pi)``.

    The truncation degree is the smallest L whose analytic tail bound is
    at most ``tail_tolerance``.
    """
    if beta <= 2.0:
        raise DivergentSeriesError(f"beta must exceed 2 for summable coefficients, got {beta}")
    if tail_tolerance <= 0:
        raise DomainError("tail_tolerance must be positive")
    x = (2.0 * math.pi * (beta - 2.0) * tail_tolerance) ** (1.0 / (2.0 - beta))
    if x > MAX_DEGREE:
        raise DomainError(f"tail tolerance {tail_tolerance} needs degree ~{x:.3g} > {MAX_DEGREE}")
    L = _sobolev_degree(beta, tail_tolerance)
    ell = np.arange(L + 1, dtype=float)
    c = (ell + 0.5) ** (-beta) * (2.0 * ell + 1.0) / (4.0 * math.pi)
    return LegendreSeriesKernel(
        c,
        beta=float(beta),
        tail_bound=sobolev_tail_bound(beta, L),
        tail_tolerance=float(tail_tolerance),
        descriptor={"type": "sobolev", "beta": float(beta), "tail_tolerance": float(tail_tolerance)},
    )


def perturbed_kernel(base: LegendreSeriesKernel, psi_coeffs) -> LegendreSeriesKernel:
    """Zonal convolution ``G + G * psi`` as the multiplier update ``c_l (1 + psi_l)``.

    ``psi_coeffs`` may be shorter than the series (missing entries are 0)
    or a scalar applied to every degree.
    """
    c = base.coefficients
    psi = np.asarray(psi_coeffs, dtype=float)
    scalar = psi.ndim == 0
    if scalar:
        psi = np.full(c.shape, float(psi))
    if psi.size > c.size:
        raise DomainError("more multipliers than series coefficients")
    if not np.all(np.isfinite(psi)):
        raise DomainError("psi multipliers must be finite")
    full = np.zeros_like(c)
    full[: psi.size] = psi
    new = c * (1.0 + full)
    bad = np.flatnonzero(new < 0)
    if bad.size:
        raise NotPositiveDefiniteError(f"negative coefficient at degree {int(bad[0])}")
    if not np.any(full):
        return base
    # the unknown multipliers beyond the table are bounded by the largest given one
    tail_scale = 1.0 + float(np.max(np.abs(full)))
    desc = dict(base.descriptor)
    if desc:
        desc["psi"] = float(psi[0]) if scalar else psi.tolist()
    return LegendreSeriesKernel(
        new,
        beta=base.beta,
        tail_bound=base.tail_bound * tail_scale,
        tail_tolerance=base.tail_tolerance * tail_scale,
        lambda_d=base.lambda_d,
        descriptor=desc,
    )


def kernel_eval(kernel, t):
    """Evaluate a zonal kernel at ``t = x . y`` (direct path)."""
    return kernel(t)


@dataclass(frozen=True)
class SurfaceSplineKernel:
    """Restricted surface spline of order m in dimension d."""

    m: int
    d: int = 2

    def __post_init__(self):
        if self.m - self.d / 2.0 <= 0:
            raise DomainError(f"need m - d/2 > 0, got m={self.m}, d={self.d}")

    @property
    def even(self) -> bool:
        return self.d % 2 == 0

    @property
    def power(self) -> float:
        return self.m - self.d / 2.0

    @property
    def harmonic_degree(self) -> int:
        """Degree of the spherical-harmonic side conditions, ceil(m - d/2)."""
        return math.ceil(self.power)

    @property
    def conditionally_positive_definite(self) -> bool:
        return True

    def __call__(self, t):
        return surface_spline_eval(self, t)

    def matrix(self, X, Y) -> np.ndarray:
        return _backend.surface_spline_matrix(X, Y, self.power, self.even)

    def to_json(self) -> dict:
        return {"type": "surface_spline", "m": self.m, "d": self.d}


def surface_spline_eval(kernel: SurfaceSplineKernel, t):
    """``(1 - t)^(m - d/2) log(1 - t)`` for even d, ``(1 - t)^(m - d/2)`` for odd d.

    At ``t = 1`` the log branch takes its limit value 0.
    """
    t = _check_t(t)
    u = 1.0 - t
    pos = u > 0
    safe = np.where(pos, u, 1.0)
    v = safe**kernel.power
    if kernel.even:
        v = v * np.log(safe)
    out = np.where(pos, v, 0.0)
    return out if out.ndim else float(out)


def kernel_from_json(desc) -> LegendreSeriesKernel | SurfaceSplineKernel:
    """Build a kernel from its JSON descriptor (dict or JSON text)."""
    if isinstance(desc, str):
        desc = json.loads(desc)
    kind = desc.get("type")
    if kind == "sobolev":
        k = sobolev_kernel(float(desc["beta"]), float(desc.get("tail_tolerance", DEFAULT_TAIL_TOLERANCE)))
        if "psi" in desc:
            k = perturbed_kernel(k, desc["psi"])
        return k
    if kind == "surface_spline":
        return SurfaceSplineKernel(int(desc["m"]), int(desc.get("d", 2)))
    if kind == "series":
        return LegendreSeriesKernel(np.asarray(desc["coefficients"], dtype=float), descriptor=dict(desc))
    raise DomainError(f"unknown kernel type {kind!r}")
