import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernel_lsq.errors import DomainError, InsufficientSignalError, NumericalError
from kernel_lsq.geometry import generate_fibonacci, pairwise_distances
from kernel_lsq.kernels import SurfaceSplineKernel, sobolev_kernel
from kernel_lsq.lagrange import FunctionFamily, renormalize
from kernel_lsq.quadrature import default_rule, sup_grid
from kernel_lsq.stability import (
    check_lp_condition,
    default_holder_exponent,
    envelope_violations,
    exponential_envelope,
    fit_decay,
    fit_holder,
    lebesgue_constant,
    nikolskii_check,
    riesz_bounds,
    sample_centers,
)

STABILITY_COLUMNS = ["n", "h", "q", "rho", "C1", "nu", "C2", "eps", "lebesgue", "c1", "c2", "p",
                     "lower", "upper", "seed"]


@pytest.fixture(scope="module")
def centers():
    return generate_fibonacci(50)


def radial_family(ps, profile):
    q = ps.q
    return FunctionFamily(ps.points, lambda X, C: profile(pairwise_distances(X, C) / q), q=q)


def test_fit_decay_exact_exponential(centers):
    fam = radial_family(centers, lambda r: 3.0 * np.exp(-2.0 * r))
    env = fit_decay(fam, sup_grid(centers.points))
    assert env.amplitude == pytest.approx(3.0, abs=1e-6)
    assert env.rate == pytest.approx(2.0, abs=1e-6)
    assert not env.violation


def test_fit_decay_no_decay(centers):
    env = fit_decay(radial_family(centers, np.ones_like), sup_grid(centers.points))
    assert env.rate == 0.0 and env.violation
    assert env.amplitude == pytest.approx(1.0)


def test_fit_decay_all_noise(centers):
    with pytest.raises(InsufficientSignalError):
        fit_decay(radial_family(centers, lambda r: 1e-20 * np.ones_like(r)), sup_grid(centers.points))


def test_fit_decay_n400_covers_all_samples(sweep):
    lv = sweep[400]
    cols = sample_centers(lv.n, 32)
    env = fit_decay(lv.basis, lv.grid, columns=cols)
    assert env.rate > 0
    assert envelope_violations(lv.basis, env, lv.grid, cols) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 5.0), st.floats(0.5, 100.0))
def test_envelope_sound(seed, rate, amp):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0, 12, 2000)
    v = amp * np.exp(-rate * r) * rng.uniform(0.01, 1.0, r.size) * rng.choice([-1, 1], r.size)
    env = exponential_envelope(r, v)
    keep = np.abs(v) > 1e-13
    bound = env.amplitude * np.exp(-env.rate * r)
    assert np.all(np.abs(v[keep]) <= bound[keep] * (1 + 1e-12))


def test_decay_scale_covariance(basis50):
    grid = sup_grid(basis50.centers)
    base = fit_decay(basis50, grid)
    for p in (1.0, 2.0):
        v = renormalize(basis50, p)
        env = fit_decay(v, grid)
        assert env.rate == pytest.approx(base.rate, rel=1e-9)
        assert env.amplitude == pytest.approx(base.amplitude * basis50.q ** (-2 / p), rel=1e-9)


def test_holder_examples(centers):
    assert fit_holder(radial_family(centers, np.ones_like), 0.5) == 0.0
    c2 = fit_holder(radial_family(centers, np.sqrt), 0.5, pairs=2048)
    assert c2 == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        fit_holder(radial_family(centers, np.sqrt), 0.0)


def test_default_holder_exponent():
    assert default_holder_exponent(sobolev_kernel(4.0)) == 0.5
    assert default_holder_exponent(sobolev_kernel(6.0)) == 1.0
    assert default_holder_exponent(SurfaceSplineKernel(2)) == 0.5
    assert default_holder_exponent(sobolev_kernel(3.0, 1e-3)) == pytest.approx(0.49)


def test_lebesgue_examples(kernel4, basis50):
    from kernel_lsq.geometry import PointSet
    from kernel_lsq.lagrange import solve_lagrange

    one = solve_lagrange(kernel4, PointSet.from_points(np.array([[0.0, 0.0, 1.0]])))
    assert lebesgue_constant(one) == pytest.approx(1.0, abs=1e-12)
    grid = sup_grid(basis50.centers)
    leb = lebesgue_constant(basis50, grid)
    assert leb >= 1.0
    assert lebesgue_constant(basis50, basis50.centers) == pytest.approx(1.0, abs=1e-8)
    assert leb <= basis50.n * np.abs(basis50.evaluate(grid)).max()


def test_riesz_examples():
    assert riesz_bounds(np.eye(5)) == (1.0, 1.0)
    assert riesz_bounds(np.diag([4.0, 9.0])) == (2.0, 3.0)
    assert riesz_bounds(np.diag([4.0, 9.0]) * 0.25, q=0.5) == (2.0, 3.0)
    with pytest.raises(NumericalError):
        riesz_bounds(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_lp_condition_examples(basis50):
    grid = sup_grid(basis50.centers)
    lower, _ = check_lp_condition(basis50, math.inf, grid=grid)
    assert lower >= 1 - 1e-9
    e = np.zeros((50, 1))
    e[3] = 1.0
    lo, hi = check_lp_condition(basis50, math.inf, grid=grid, coefficients=e)
    assert lo == hi == pytest.approx(np.abs(basis50.evaluate(grid, columns=[3])).max())
    assert lo >= 1.0 - 1e-9
    with pytest.raises(DomainError):
        check_lp_condition(basis50, 2.0, trials=8)


def test_lp_condition_single_center_homogeneous(kernel4):
    from kernel_lsq.geometry import PointSet
    from kernel_lsq.lagrange import solve_lagrange

    one = solve_lagrange(kernel4, PointSet.from_points(np.array([[0.0, 0.0, 1.0]])))
    for p in (1.0, 2.0, math.inf):
        lo, hi = check_lp_condition(one, p, rule=default_rule(0.5), trials=32)
        assert lo == pytest.approx(hi, rel=1e-12)


def test_lp_condition_within_riesz(level400):
    st_ = level400.stability
    lo_band, hi_band = 0.5 * st_.riesz_lower, 2 * st_.riesz_upper
    for lo, hi in st_.per_p_ratios.values():
        assert lo_band <= lo <= hi <= hi_band


def test_nikolskii_examples(basis50):
    assert nikolskii_check(basis50, 2.0, 2.0) == (1.0, False)
    rule = default_rule(basis50.point_set.h)
    for p, r in ((1.0, 2.0), (2.0, 4.0)):
        q = 0.3
        fam = FunctionFamily(np.array([[0, 0, 1.0]]), lambda X, C: np.ones((len(X), 1)), q=q)
        res = nikolskii_check(fam, p, r, rule=rule, coefficients=np.ones((1, 1)))
        expected = (4 * math.pi) ** (1 / r - 1 / p) * q ** (2 * (1 / p - 1 / r))
        assert res.worst_ratio == pytest.approx(expected, rel=1e-12)
    # a single Lagrange function against direct quadrature
    e = np.zeros((50, 1))
    e[0] = 1.0
    res = nikolskii_check(basis50, 1.0, 2.0, rule=rule, coefficients=e)
    v = basis50.evaluate(rule.nodes, columns=[0])[:, 0]
    direct = math.sqrt(rule.weights @ v**2) * basis50.q / (rule.weights @ np.abs(v))
    assert res.worst_ratio == pytest.approx(direct, rel=1e-12)
    assert nikolskii_check(basis50, 1.0, 2.0, rule=rule, coefficients=e, condition_ratio=1e-3).flagged
    with pytest.raises(DomainError):
        nikolskii_check(basis50, 3.0, 2.0)


def test_stability_report_shape(level100):
    st_ = level100.stability
    assert st_.decay_rate > 0 and st_.decay_amplitude > 0
    assert st_.riesz_lower <= st_.riesz_upper
    assert st_.lebesgue_constant >= 1
    assert all(lo <= hi for lo, hi in st_.per_p_ratios.values())
    rows = st_.csv_rows(level100.point_set)
    assert [list(r) for r in rows] == [STABILITY_COLUMNS] * len(rows)
    json.dumps(st_.to_json())
