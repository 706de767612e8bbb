"""Gram matrices of the p=2 renormalized basis and the band/residual certificate.

The certificate follows the banded-inverse argument: split ``G = B + R``
at geodesic radius ``Gamma q``, require the residual to be small compared
with ``c1^2`` and with ``1/(C Gamma^d)``, and compare the resulting bound
``2 C Gamma^d`` with the directly measured ``||G^-1||_inf``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, NoCertificateError, NumericalError
from .geometry import ManifoldConstants, pairwise_distances, sphere_constants
from .quadrature import QuadratureRule, default_rule
from .stability import R_MANIFOLD, exponential_envelope

GAMMA_GRID = tuple(np.arange(1.5, 40.0 + 1e-9, 0.5))
C_G_CAP_FACTOR = 4.0
CHEBYSHEV_GRID = 10_000
SINGULAR_CONDITION = 1e15
INVERSE_FLOOR = 1e-13


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    point_set: object = None
    rule: QuadratureRule | None = None

    def __post_init__(self):
        G = np.asarray(self.entries, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise DomainError("Gram matrix must be square")
        if not np.all(np.isfinite(G)):
            raise NumericalError("non-finite Gram entry")
        G.setflags(write=False)
        object.__setattr__(self, "entries", G)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def distances(self) -> np.ndarray:
        if self.point_set is None:
            raise DomainError("Gram matrix has no point set attached")
        return self.point_set.distances


def assemble_gram(basis, rule: QuadratureRule | None = None) -> GramMatrix:
    """``G[xi, zeta] = <v_xi, v_zeta>`` by quadrature, symmetrized."""
    p = getattr(basis, "p", 2.0)
    if p != 2.0:
        raise DomainError(f"the Gram matrix is defined for the p=2 basis, got p={p}")
    point_set = getattr(basis, "point_set", None)
    if rule is None:
        rule = default_rule(point_set.h)
    V = basis.values_at(rule)
    G = V.T @ (rule.weights[:, None] * V)
    return GramMatrix(0.5 * (G + G.T), point_set, rule)


def _matrix(G) -> np.ndarray:
    return np.asarray(getattr(G, "entries", G), dtype=float)


def _scaled_distances(G, q, points):
    if points is None:
        ps = getattr(G, "point_set", None)
        if ps is None:
            raise DomainError("need the centers to measure distances")
        D, q = ps.distances, ps.q if q is None else q
    else:
        D = pairwise_distances(points, points)
    if q is None:
        raise DomainError("need q")
    return np.minimum(D, R_MANIFOLD) / q


class DecayCheck(NamedTuple):
    C_G: float
    mu: float
    coverage: float
    cap: float


def offdiag_decay_check(G, nu: float, q: float | None = None, points=None,
                        cap: float | None = None) -> DecayCheck:
    """Envelope ``|G| <= C_G exp(-mu min(d, pi)/q)`` with ``mu = nu/2``.

    ``C_G`` is the smallest covering amplitude; ``coverage`` is the fraction
    of entries under the envelope with amplitude ``cap`` (default four times
    the largest diagonal entry).
    """
    M = np.abs(_matrix(G))
    r = _scaled_distances(G, q, points)
    mu = nu / 2.0
    weighted = M * np.exp(mu * r)
    C_G = float(weighted.max())
    cap = C_G_CAP_FACTOR * float(np.diag(M).max()) if cap is None else float(cap)
    coverage = float(np.mean(weighted <= cap * (1 + 1e-12)))
    return DecayCheck(C_G, mu, coverage, cap)


class BandSplit(NamedTuple):
    band: np.ndarray
    residual: np.ndarray
    gamma: float


def band_split(G, gamma: float, q: float | None = None, points=None) -> BandSplit:
    """``B`` keeps entries with ``d < Gamma q``, ``R`` the rest; ``B + R = G`` bitwise."""
    if not gamma > 1:
        raise DomainError(f"Gamma must exceed 1, got {gamma}")
    M = _matrix(G)
    near = _scaled_distances(G, q, points) < gamma
    return BandSplit(np.where(near, M, 0.0), np.where(near, 0.0, M), float(gamma))


class DMSConstants(NamedTuple):
    Q: float
    C0: float
    tau: float
    c0_claim_holds: bool


def dms_constants(c1: float, c2: float) -> DMSConstants:
    """``Q = (2c2 - c1)/(2c2 + c1)``, ``C0 = (c1 + c2)^2 / (2 c1^2 c2^2)``, ``tau = -log Q``.

    ``c0_claim_holds`` records whether ``C0 <= 1.5 / c1^2``; this fails,
    for instance, when ``c1 = c2``.
    """
    if not c1 > 0:
        raise DomainError(f"c1 must be positive, got {c1}")
    if c2 < c1:
        raise DomainError(f"need c1 <= c2, got c1={c1}, c2={c2}")
    Q = (2 * c2 - c1) / (2 * c2 + c1)
    C0 = (c1 + c2) ** 2 / (2 * c1**2 * c2**2)
    return DMSConstants(Q, C0, -math.log(Q), C0 <= 1.5 / c1**2)


def chebyshev_inverse_coefficients(a: float, b: float, degree: int) -> np.ndarray:
    """Chebyshev coefficients of ``1/x`` on ``[a, b]`` truncated at ``degree``.

    With ``x = alpha + s y``: ``1/x = (1/w) (1 + 2 sum_k (-r)^k T_k(y))``,
    ``w = sqrt(alpha^2 - s^2)``, ``r = (alpha - w)/s``.
    """
    alpha, s = 0.5 * (a + b), 0.5 * (b - a)
    c = np.zeros(degree + 1)
    if s == 0:
        c[0] = 1.0 / alpha
        return c
    w = math.sqrt(a * b)
    r = (alpha - w) / s
    k = np.arange(degree + 1)
    c[:] = 2.0 * (-r) ** k / w
    c[0] = 1.0 / w
    return c


def minimax_inverse_coefficients(a: float, b: float, degree: int, grid_points: int = 2000) -> np.ndarray:
    """Discrete minimax (linear program) Chebyshev coefficients of ``1/x`` on ``[a, b]``."""
    y = np.cos(np.linspace(0.0, math.pi, grid_points))
    x = 0.5 * (a + b) + 0.5 * (b - a) * y
    T = np.polynomial.chebyshev.chebvander(y, degree)
    m = degree + 1
    # variables: coefficients (free) and the error level e
    A = np.block([[T, -np.ones((len(y), 1))], [-T, -np.ones((len(y), 1))]])
    ub = np.concatenate([1.0 / x, -1.0 / x])
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A, b_ub=ub, bounds=[(None, None)] * m + [(0, None)], method="highs")
    if not res.success:
        raise NumericalError(f"minimax linear program failed: {res.message}")
    return res.x[:m]


class ChebyshevResult(NamedTuple):
    error: float
    bound: float
    within_bound: bool
    degree: int
    method: str


def chebyshev_inverse_test(a: float, b: float, degree: int, method: str = "chebyshev",
                           grid_points: int = CHEBYSHEV_GRID) -> ChebyshevResult:
    """Max error of a degree-n polynomial approximant of ``1/x`` on ``[a, b]``.

    The bound ``C0 Q^(n+1)`` uses ``(c1, c2) = (sqrt(2a), sqrt(b/2))``, so
    that ``[a, b] = [c1^2/2, 2 c2^2]``. ``method`` is ``"chebyshev"``
    (truncated series) or ``"minimax"``.
    """
    if not a > 0:
        raise DomainError(f"interval must lie in (0, inf), got a={a}")
    if b < a:
        raise DomainError("need a <= b")
    if degree < 0:
        raise DomainError("degree must be nonnegative")
    if method == "chebyshev":
        c = chebyshev_inverse_coefficients(a, b, degree)
    elif method == "minimax":
        c = minimax_inverse_coefficients(a, b, degree)
    else:
        raise DomainError(f"unknown method {method!r}")
    x = np.linspace(a, b, grid_points)
    y = np.zeros_like(x) if b == a else (2.0 * x - (a + b)) / (b - a)
    err = float(np.abs(np.polynomial.chebyshev.chebval(y, c) - 1.0 / x).max())
    Q, C0, _, _ = dms_constants(math.sqrt(2 * a), max(math.sqrt(b / 2), math.sqrt(2 * a)))
    bound = C0 * Q ** (degree + 1)
    return ChebyshevResult(err, bound, err <= bound, degree, method)


def inverse_inf_norm(M) -> float:
    """``||M^-1||_inf``: max absolute row sum of the dense inverse."""
    M = _matrix(M)
    if np.linalg.cond(M) > SINGULAR_CONDITION:
        raise NumericalError("matrix is numerically singular")
    return float(np.abs(np.linalg.inv(M)).sum(axis=1).max())


def gram_constant(c1: float, tau: float, constants: ManifoldConstants) -> float:
    """``3 c1^-2 K tau^-d d!``."""
    d = constants.dimension
    return 3.0 / c1**2 * constants.counting * tau ** (-d) * math.factorial(d)


def theoretical_residual_bound(C_G: float, mu: float, gamma: float, q: float,
                               constants: ManifoldConstants) -> float:
    """Annulus-counting bound on ``max(||R||_1, ||R||_inf)`` from the decay envelope."""
    d, K = constants.dimension, constants.counting
    k = np.arange(1, 10_000)
    series = float(((k + 1.0) ** d * np.exp(-mu * k * gamma)).sum())
    tail = (math.pi / q) ** d * math.exp(-mu * constants.inradius / q)
    return C_G * K * (gamma**d * series + tail)


@dataclass
class GramCertificate:
    gamma: float
    Q: float
    C0: float
    tau: float
    C_const: float
    dms_bound: float
    residual_inf_norm: float
    residual_one_norm: float
    margin: float
    band_inverse_inf_norm: float
    measured_inverse_inf_norm: float
    band_spectrum: tuple
    band_spectrum_contained: bool
    inverse_decay_amplitude: float
    inverse_decay_rate: float
    theoretical_residual_bound: float
    c0_claim_holds: bool
    verdict: bool

    def to_json(self) -> dict:
        out = asdict(self)
        out["band_spectrum"] = list(self.band_spectrum)
        return out

    def csv_row(self, n: int) -> dict:
        return {
            "n": n, "Gamma": self.gamma, "Q": self.Q, "C0": self.C0, "tau": self.tau,
            "Cconst": self.C_const, "bound": self.dms_bound, "RinfNorm": self.residual_inf_norm,
            "GinvInfNorm": self.measured_inverse_inf_norm, "verdict": self.verdict,
        }


def inverse_decay(G, q: float | None = None, points=None):
    """Exponential envelope of ``|G^-1(xi, zeta)|`` in ``d/q``."""
    return _inverse_envelope(_matrix(G), _scaled_distances(G, q, points))


def select_gamma(G, stability, constants: ManifoldConstants | None = None, gammas=GAMMA_GRID,
                 q: float | None = None, points=None) -> GramCertificate:
    """Smallest ``Gamma`` on the grid with ``max(||R||_1, ||R||_inf) <= min(c1^2, 1/(C Gamma^d))/2``.

    ``stability`` supplies ``riesz_lower``, ``riesz_upper`` and
    ``decay_rate``. Raises :class:`NoCertificateError` with the best margin
    when no grid value qualifies.
    """
    constants = sphere_constants() if constants is None else constants
    c1, c2 = stability.riesz_lower, stability.riesz_upper
    Q, C0, tau, claim = dms_constants(c1, c2)
    C = gram_constant(c1, tau, constants)
    d = constants.dimension
    M = _matrix(G)
    r = _scaled_distances(G, q, points)
    absM = np.abs(M)
    best = -math.inf
    chosen = None
    for gamma in gammas:
        far = r >= gamma
        R = np.where(far, absM, 0.0)
        rinf, rone = float(R.sum(axis=1).max()), float(R.sum(axis=0).max())
        margin = 0.5 * min(c1**2, 1.0 / (C * gamma**d)) - max(rinf, rone)
        best = max(best, margin)
        if margin >= 0:
            chosen = (float(gamma), rinf, rone, float(margin))
            break
    if chosen is None:
        raise NoCertificateError("no Gamma on the grid meets the residual condition", best)
    gamma, rinf, rone, margin = chosen
    near = r < gamma
    B = np.where(near, M, 0.0)
    ev = np.linalg.eigvalsh(B)
    lo, hi = 0.5 * c1**2, 2.0 * c2**2
    tol = 1e-12 * max(1.0, hi)
    measured = inverse_inf_norm(M)
    env = _inverse_envelope(M, r)
    dms_bound = 2.0 * C * gamma**d
    qv = q if q is not None else getattr(getattr(G, "point_set", None), "q", None)
    C_G = float((absM * np.exp(0.5 * stability.decay_rate * r)).max())
    theory = (theoretical_residual_bound(C_G, 0.5 * stability.decay_rate, gamma, qv, constants)
              if qv is not None else math.nan)
    return GramCertificate(
        gamma=gamma, Q=Q, C0=C0, tau=tau, C_const=C, dms_bound=dms_bound,
        residual_inf_norm=rinf, residual_one_norm=rone, margin=margin,
        band_inverse_inf_norm=inverse_inf_norm(B),
        measured_inverse_inf_norm=measured,
        band_spectrum=(float(ev[0]), float(ev[-1])),
        band_spectrum_contained=bool(ev[0] >= lo - tol and ev[-1] <= hi + tol),
        inverse_decay_amplitude=env.amplitude,
        inverse_decay_rate=env.rate,
        theoretical_residual_bound=theory,
        c0_claim_holds=claim,
        verdict=bool(measured <= dms_bound),
    )


def _inverse_envelope(M, r):
    inv = np.linalg.inv(M)
    return exponential_envelope(r, inv, INVERSE_FLOOR * np.abs(inv).max())
