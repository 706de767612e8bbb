"""Empirical stability constants of a Lagrange basis.

Localization ``|chi_xi(x)| <= C1 exp(-nu d(x, xi)/q)``, Hoelder continuity
``|chi_xi(x) - chi_xi(y)| <= C2 (d(x, y)/q)^eps``, the Lebesgue constant
and the two-sided L_p condition numbers. Envelope constants are sup-based:
the reported bound holds on every retained sample.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InsufficientSignalError, NumericalError
from .geometry import pairwise_distances
from .quadrature import QuadratureRule, default_rule, sup_grid, weighted_lp

DECAY_FLOOR = 1e-13
R_MANIFOLD = math.pi
MIN_TRIALS = 32
NIKOLSKII_SLACK = 1.05
DEFAULT_SEED = 20240613


class Envelope(NamedTuple):
    amplitude: float
    rate: float
    violation: bool
    samples: int


def exponential_envelope(r, values, floor=DECAY_FLOOR, bin_width: float = 1.0) -> Envelope:
    """Smallest ``C`` with ``|values| <= C exp(-rate r)``, rate fitted to bin maxima.

    The rate is the least-squares slope of log per-bin maxima of ``|values|``
    (samples above ``floor``, which may be per-sample). ``C`` is then
    inflated so that no retained sample violates the envelope. A nonpositive
    slope is reported as rate 0 with ``violation`` set.
    """
    values = np.asarray(values, dtype=float)
    floor = np.broadcast_to(floor, values.shape).ravel()
    r = np.broadcast_to(np.asarray(r, dtype=float), values.shape).ravel()
    a = np.abs(values).ravel()
    keep = a > floor
    if not keep.any():
        raise InsufficientSignalError("every sample fell below the noise floor")
    r, a = r[keep], a[keep]
    la = np.log(a)
    b = np.floor(r / bin_width).astype(np.int64)
    order = np.lexsort((-la, b))
    first = np.ones(order.size, dtype=bool)
    first[1:] = b[order][1:] != b[order][:-1]
    top = order[first]
    rate = 0.0
    if top.size >= 2 and np.ptp(r[top]) > 0:
        slope = np.polyfit(r[top], la[top], 1)[0]
        rate = max(0.0, -float(slope))
    violation = rate <= 0.0
    amplitude = float(np.exp((la + rate * r).max()))
    return Envelope(amplitude, rate, violation, int(keep.sum()))


def _noise_floor(basis, columns, floor):
    scale = getattr(basis, "scale", 1.0)
    return np.maximum(floor * scale, basis.roundoff_floor[columns])


def _pick_centers(n: int, count: int | None, rng) -> np.ndarray:
    if count is None or count >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=count, replace=False))


def sample_centers(n: int, count: int | None = 32, seed: int = DEFAULT_SEED) -> np.ndarray:
    """The seeded subset of center indices used by :func:`fit_decay`."""
    return _pick_centers(n, count, np.random.default_rng(seed))


def fit_decay(basis, grid=None, n_centers: int | None = 32, seed: int = DEFAULT_SEED,
              floor: float = DECAY_FLOOR, columns=None) -> Envelope:
    """Localization envelope ``(C1, nu)`` in units of ``d(x, xi)/q``.

    Samples are the basis functions of a seeded subset of centers (or the
    given ``columns``) on the grid; values below ``max(floor, roundoff)``
    are treated as noise.
    """
    grid = sup_grid(basis.centers) if grid is None else np.asarray(grid, dtype=float)
    cols = sample_centers(basis.n, n_centers, seed) if columns is None else np.asarray(columns)
    vals = basis.evaluate(grid, columns=cols)
    r = np.minimum(pairwise_distances(grid, basis.centers[cols]), R_MANIFOLD) / basis.q
    return exponential_envelope(r, vals, _noise_floor(basis, cols, floor))


def envelope_violations(basis, envelope: Envelope, grid, columns, floor: float = DECAY_FLOOR) -> int:
    """Count retained samples exceeding ``C1 exp(-nu r)``."""
    vals = np.abs(basis.evaluate(grid, columns=columns))
    r = np.minimum(pairwise_distances(grid, basis.centers[columns]), R_MANIFOLD) / basis.q
    keep = vals > _noise_floor(basis, columns, floor)
    bound = envelope.amplitude * np.exp(-envelope.rate * r) * (1 + 1e-12)
    return int(np.count_nonzero(keep & (vals > bound)))


def default_holder_exponent(kernel) -> float:
    """``min(1, m - d/2 - 0.01)`` with ``m = beta/2``; 0.5 for the beta=4 kernel."""
    m = None
    if getattr(kernel, "beta", None) is not None:
        m = kernel.beta / 2.0
    elif hasattr(kernel, "m"):
        m = float(kernel.m)
    if m is None or m == 2.0:
        return 0.5
    return min(1.0, m - 1.0 - 0.01)


def _step(x, d, rng):
    """Move each row of x a geodesic distance d in a random direction."""
    u = rng.standard_normal(x.shape)
    u -= (u * x).sum(axis=1, keepdims=True) * x
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    d = np.asarray(d)[:, None]
    y = np.cos(d) * x + np.sin(d) * u
    return y / np.linalg.norm(y, axis=1, keepdims=True)


def holder_constant(basis, eps: float = 0.5, pairs: int = 4096, n_centers: int | None = 16,
                    seed: int = DEFAULT_SEED) -> float:
    """Sampled ``C2 = max |chi(x) - chi(y)| / (d(x, y)/q)^eps`` over pairs with ``d <= q``.

    For each sampled center, a quarter of the pairs start at the center,
    half start within ``3q`` of it and the rest anywhere on the sphere;
    partner distances are log-uniform in ``[1e-3 q, q]``.
    """
    if not 0 < eps <= 1:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    rng = np.random.default_rng(seed)
    cols = _pick_centers(basis.n, n_centers, rng)
    q = basis.q
    per = max(4, pairs // len(cols))
    best = 0.0
    for c in cols:
        xi = basis.centers[c]
        n0, n1 = per // 4, per // 2
        n2 = per - n0 - n1
        start = np.vstack([
            np.repeat(xi[None, :], n0, axis=0),
            _step(np.repeat(xi[None, :], n1, axis=0), 3.0 * q * np.sqrt(rng.random(n1)), rng),
            _unit_normal(n2, rng),
        ])
        d = q * 10.0 ** rng.uniform(-3.0, 0.0, per)
        end = _step(start, d, rng)
        both = basis.evaluate(np.vstack([start, end]), columns=[c])[:, 0]
        diff = np.abs(both[:per] - both[per:])
        dist = np.maximum(_rowwise_distance(start, end), 1e-300)
        best = max(best, float((diff / (dist / q) ** eps).max()))
    return best


fit_holder = holder_constant


def _unit_normal(m, rng):
    x = rng.standard_normal((m, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _rowwise_distance(a, b):
    cross = np.linalg.norm(np.cross(a, b), axis=1)
    return np.arctan2(cross, (a * b).sum(axis=1))


def lebesgue_constant(basis, grid=None) -> float:
    """``max_x sum_xi |chi_xi(x)|`` over the grid (centers included by default)."""
    grid = sup_grid(basis.centers) if grid is None else grid
    best = 0.0
    for _, vals in basis.iter_blocks(grid):
        best = max(best, float(np.abs(vals).sum(axis=1).max()))
    return best


def riesz_bounds(gram, q: float | None = None) -> tuple[float, float]:
    """``(sqrt(lambda_min), sqrt(lambda_max))`` of the p=2 renormalized Gram matrix.

    When ``q`` is given, ``gram`` is taken to be the Gram matrix of the
    unscaled Lagrange functions and is rescaled by ``q^-2`` first.
    """
    G = np.asarray(getattr(gram, "entries", gram), dtype=float)
    if q is not None:
        G = G / q**2
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    if not np.all(np.isfinite(ev)) or ev[0] <= 0:
        raise NumericalError(f"Gram matrix is not positive definite (min eigenvalue {ev[0]:.3e})")
    return float(math.sqrt(ev[0])), float(math.sqrt(ev[-1]))


def _combination_norms(basis, coeffs, p, rule, grid):
    if math.isinf(p):
        grid = sup_grid(basis.centers) if grid is None else grid
        return weighted_lp(basis.combine(grid, coeffs), None, p)
    return weighted_lp(basis.combine(rule.nodes, coeffs), rule.weights, p)


def _trial_coefficients(n, trials, seed):
    if trials < MIN_TRIALS:
        raise DomainError(f"need at least {MIN_TRIALS} trials, got {trials}")
    return np.random.default_rng(seed).standard_normal((n, trials))


def _rule_for(basis, rule):
    return rule if rule is not None else default_rule(basis.point_set.h)


def check_lp_condition(basis, p: float, trials: int = 64, seed: int = DEFAULT_SEED,
                       rule: QuadratureRule | None = None, grid=None, coefficients=None
                       ) -> tuple[float, float]:
    """Range of ``||sum A_xi chi_xi||_p / (q^(2/p) ||A||_p)`` over random A.

    ``coefficients`` (n x k) replaces the standard normal trials when given.
    """
    if not p >= 1:
        raise DomainError("p must be in [1, inf]")
    A = _trial_coefficients(basis.n, trials, seed) if coefficients is None else \
        np.asarray(coefficients, dtype=float).reshape(basis.n, -1)
    rule = None if math.isinf(p) else _rule_for(basis, rule)
    num = _combination_norms(basis, A, p, rule, grid)
    den = np.abs(A).max(axis=0) if math.isinf(p) else (np.abs(A) ** p).sum(axis=0) ** (1.0 / p)
    r = num / (basis.q ** (0.0 if math.isinf(p) else 2.0 / p) * den)
    return float(r.min()), float(r.max())


class NikolskiiResult(NamedTuple):
    worst_ratio: float
    flagged: bool


def nikolskii_check(basis, p: float, r: float, trials: int = 64, seed: int = DEFAULT_SEED,
                    rule: QuadratureRule | None = None, grid=None,
                    condition_ratio: float | None = None, coefficients=None) -> NikolskiiResult:
    """Worst ``||s||_r q^(2(1/p - 1/r)) / ||s||_p`` over random combinations.

    Flags a ratio above ``1.05 * c2/c1`` when ``condition_ratio`` is given.
    """
    if not 1 <= p <= r:
        raise DomainError("need 1 <= p <= r")
    if p == r:
        return NikolskiiResult(1.0, False)
    A = _trial_coefficients(basis.n, trials, seed) if coefficients is None else \
        np.asarray(coefficients, dtype=float).reshape(basis.n, -1)
    rule = _rule_for(basis, rule)
    inv = lambda s: 0.0 if math.isinf(s) else 1.0 / s  # noqa: E731
    ratio = (_combination_norms(basis, A, r, rule, grid) * basis.q ** (2.0 * (inv(p) - inv(r)))
             / _combination_norms(basis, A, p, rule, grid))
    worst = float(ratio.max())
    flagged = condition_ratio is not None and worst > NIKOLSKII_SLACK * condition_ratio
    return NikolskiiResult(worst, bool(flagged))


def _p_key(p) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


@dataclass
class StabilityReport:
    decay_amplitude: float
    decay_rate: float
    holder_constant: float
    holder_exponent: float
    lebesgue_constant: float
    riesz_lower: float
    riesz_upper: float
    per_p_ratios: dict = field(default_factory=dict)
    decay_violation: bool = False
    seed: int = DEFAULT_SEED
    sample_provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.riesz_lower > self.riesz_upper:
            raise DomainError("riesz_lower exceeds riesz_upper")

    @property
    def condition_ratio(self) -> float:
        return self.riesz_upper / self.riesz_lower

    def to_json(self) -> dict:
        out = asdict(self)
        out["per_p_ratios"] = {k: list(v) for k, v in self.per_p_ratios.items()}
        return out

    def csv_rows(self, point_set) -> list[dict]:
        base = {
            "n": len(point_set), "h": point_set.h, "q": point_set.q, "rho": point_set.rho,
            "C1": self.decay_amplitude, "nu": self.decay_rate, "C2": self.holder_constant,
            "eps": self.holder_exponent, "lebesgue": self.lebesgue_constant,
            "c1": self.riesz_lower, "c2": self.riesz_upper,
        }
        return [dict(base, p=p, lower=lo, upper=hi, seed=self.seed)
                for p, (lo, hi) in self.per_p_ratios.items()]


def measure_stability(basis, gram, rule: QuadratureRule | None = None, grid=None,
                      p_values=(1.0, 2.0, math.inf), trials: int = 64, eps: float | None = None,
                      seed: int = DEFAULT_SEED, decay_centers: int = 32,
                      holder_pairs: int = 4096) -> StabilityReport:
    """All stability constants of one basis; ``gram`` is the p=2 renormalized Gram."""
    rule = _rule_for(basis, rule)
    grid = sup_grid(basis.centers) if grid is None else grid
    eps = default_holder_exponent(basis.kernel) if eps is None else eps
    env = fit_decay(basis, grid, n_centers=decay_centers, seed=seed)
    c1, c2 = riesz_bounds(gram)
    ratios = {_p_key(p): check_lp_condition(basis, p, trials, seed, rule, grid) for p in p_values}
    return StabilityReport(
        decay_amplitude=env.amplitude,
        decay_rate=env.rate,
        holder_constant=holder_constant(basis, eps, holder_pairs, seed=seed),
        holder_exponent=eps,
        lebesgue_constant=lebesgue_constant(basis, grid),
        riesz_lower=c1,
        riesz_upper=c2,
        per_p_ratios=ratios,
        decay_violation=env.violation,
        seed=seed,
        sample_provenance={
            "grid_points": int(len(grid)),
            "decay_centers": int(min(decay_centers, basis.n)),
            "decay_samples": env.samples,
            "holder_pairs": int(holder_pairs),
            "trials": int(trials),
            "quadrature_nodes": int(len(rule)),
        },
    )
