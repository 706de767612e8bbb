"""Shared fixtures: the beta=4 kernel and a cached three-level sweep."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pytest

from kernel_lsq.geometry import PointSet, generate_fibonacci
from kernel_lsq.gram import GramCertificate, select_gamma
from kernel_lsq.kernels import sobolev_kernel
from kernel_lsq.lagrange import LagrangeBasis, RenormalizedBasis, renormalize, solve_lagrange
from kernel_lsq.projector import L2Projector, OperatorNorms, operator_norm_components, projector_inf_norm_direct
from kernel_lsq.quadrature import QuadratureRule, default_rule, sup_grid
from kernel_lsq.stability import StabilityReport, measure_stability

LEVELS = (100, 400, 1600)

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@dataclass
class Level:
    n: int
    point_set: PointSet
    basis: LagrangeBasis
    v2: RenormalizedBasis
    rule: QuadratureRule
    grid: np.ndarray
    projector: L2Projector
    _stability: StabilityReport | None = None
    _certificate: GramCertificate | None = None
    _norms: OperatorNorms | None = None
    _direct: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def gram(self):
        return self.projector.gram

    @property
    def stability(self) -> StabilityReport:
        if self._stability is None:
            self._stability = measure_stability(self.basis, self.gram, self.rule, self.grid)
        return self._stability

    @property
    def certificate(self) -> GramCertificate:
        if self._certificate is None:
            self._certificate = select_gamma(self.gram, self.stability)
        return self._certificate

    @property
    def norms(self) -> OperatorNorms:
        if self._norms is None:
            self._norms = operator_norm_components(self.v2, self.rule, self.grid, self.gram)
        return self._norms

    @property
    def direct(self) -> float:
        if self._direct is None:
            self._direct = projector_inf_norm_direct(self.v2, projector=self.projector)
        return self._direct


class Sweep:
    """Lazily built levels sharing one quadrature rule sized for the finest level."""

    def __init__(self, kernel, levels=LEVELS):
        self.kernel = kernel
        self.levels = levels
        self._sets = {n: generate_fibonacci(n) for n in levels}
        self.rule = default_rule(self._sets[levels[-1]].h)
        self._built: dict[int, Level] = {}

    def __getitem__(self, n: int) -> Level:
        if n not in self._built:
            ps = self._sets[n]
            basis = solve_lagrange(self.kernel, ps)
            v2 = renormalize(basis, 2.0)
            self._built[n] = Level(n, ps, basis, v2, self.rule, sup_grid(ps.points),
                                   L2Projector(v2, self.rule))
        return self._built[n]

    def __iter__(self):
        return (self[n] for n in self.levels)


@pytest.fixture(scope="session")
def kernel4():
    return sobolev_kernel(4.0)


@pytest.fixture(scope="session")
def sweep(kernel4):
    return Sweep(kernel4)


@pytest.fixture(scope="session")
def level100(sweep):
    return sweep[100]


@pytest.fixture(scope="session")
def level400(sweep):
    return sweep[400]


@pytest.fixture(scope="session")
def fib50():
    return generate_fibonacci(50)


@pytest.fixture(scope="session")
def basis50(kernel4, fib50):
    return solve_lagrange(kernel4, fib50)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ratio(values) -> float:
    values = [float(v) for v in values]
    return max(values) / min(values) if min(values) > 0 else math.inf


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {k:2d}: {detail}")
