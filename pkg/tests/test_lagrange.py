import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernel_lsq.errors import DomainError, IllConditionedError, NotUnisolventError
from kernel_lsq.geometry import NORTH, SOUTH, PointSet, generate_fibonacci
from kernel_lsq.kernels import SurfaceSplineKernel, sobolev_kernel
from kernel_lsq.lagrange import (
    FunctionFamily,
    analysis_map,
    collocation_matrix,
    eval_combination,
    eval_lagrange,
    harmonic_basis,
    load_basis,
    renormalize,
    save_basis,
    solve_augmented_lagrange,
    solve_lagrange,
)
from kernel_lsq.quadrature import default_rule, integrate, product_rule

POLES = PointSet.from_points(np.array([NORTH.as_array(), SOUTH.as_array()]))


def test_collocation_examples(kernel4):
    one = PointSet.from_points(np.array([[0.0, 0.0, 1.0]]))
    K = collocation_matrix(kernel4, one)
    assert K.shape == (1, 1) and K[0, 0] == pytest.approx(kernel4.peak(), rel=1e-12)
    K = collocation_matrix(kernel4, POLES)
    assert K[0, 1] == K[1, 0] and K[0, 0] == K[1, 1]
    X = np.random.default_rng(0).standard_normal((10, 3))
    K = collocation_matrix(kernel4, PointSet.from_points(X / np.linalg.norm(X, axis=1, keepdims=True)))
    assert np.linalg.eigvalsh(K).min() > 0


def test_single_center(kernel4):
    one = PointSet.from_points(np.array([[0.0, 0.0, 1.0]]))
    b = solve_lagrange(kernel4, one)
    assert eval_lagrange(b, 0, NORTH) == pytest.approx(1.0, abs=1e-12)
    X = generate_fibonacci(40).points
    np.testing.assert_allclose(b.evaluate(X)[:, 0], kernel4(np.clip(X[:, 2], -1, 1)) / kernel4.peak(),
                               atol=1e-12)


def test_poles(kernel4):
    b = solve_lagrange(kernel4, POLES)
    assert eval_lagrange(b, 0, NORTH) == pytest.approx(1.0, abs=1e-12)
    assert abs(eval_lagrange(b, 0, SOUTH)) < 1e-12


def test_fibonacci_residual(sweep):
    b = sweep[100].basis
    assert b.residual <= 1e-8 and b.delta_error <= 1e-8
    assert 1 < b.collocation_condition < 1e12


def test_eval_examples(basis50, fib50, rng):
    np.testing.assert_allclose(basis50.evaluate(fib50.points), np.eye(50), atol=1e-8)
    f = lambda X: np.exp(X[:, 0]) * X[:, 2]  # noqa: E731
    interp = eval_combination(basis50, f(fib50.points), fib50.points)
    np.testing.assert_allclose(interp, f(fib50.points), atol=1e-8)
    X = rng.standard_normal((30, 3))
    assert np.all(eval_combination(basis50, np.zeros(50), X) == 0)
    with pytest.raises(IndexError):
        eval_lagrange(basis50, 50, NORTH)
    with pytest.raises(DomainError):
        eval_combination(basis50, np.zeros(49), X)


def test_analysis_map_examples(basis50, kernel4):
    rule = product_rule(40, 80)
    assert np.all(analysis_map(basis50, lambda X: np.zeros(len(X)), rule) == 0)
    G = basis50.values_at(rule).T @ (rule.weights[:, None] * basis50.values_at(rule))
    col = analysis_map(basis50, lambda X: basis50.evaluate(X, columns=[7])[:, 0], rule)
    np.testing.assert_allclose(col, G[:, 7], atol=1e-14)
    one = solve_lagrange(kernel4, PointSet.from_points(np.array([[0.0, 0.0, 1.0]])))
    direct = integrate(lambda X: one.evaluate(X)[:, 0], rule)
    assert analysis_map(one, lambda X: np.ones(len(X)), rule)[0] == pytest.approx(direct, rel=1e-13)


def test_renormalized_scale(basis50):
    for p in (1.0, 2.0, 4.0):
        v = renormalize(basis50, p)
        assert v.scale == basis50.q ** (-2 / p)
        X = generate_fibonacci(33).points
        np.testing.assert_array_equal(v.evaluate(X), v.scale * basis50.evaluate(X))
    assert renormalize(basis50, math.inf).scale == 1.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_reproduction(seed):
    kernel = sobolev_kernel(4.0)
    ps = generate_fibonacci(50)
    basis = solve_lagrange(kernel, ps)
    a = np.random.default_rng(seed).standard_normal(50)
    s = lambda X: kernel.matrix(X, ps.points) @ a  # noqa: E731
    coeffs = s(ps.points)  # Lagrange coefficients are the samples
    recovered = basis.coefficients @ coeffs
    np.testing.assert_allclose(recovered, a, atol=1e-7 * max(1.0, np.abs(a).max()))


def test_antipodal_symmetry(kernel4):
    half = generate_fibonacci(60).points
    half = half[half[:, 2] > 0.05]
    ps = PointSet.from_points(np.vstack([half, -half]))
    b = solve_lagrange(kernel4, ps)
    m = len(half)
    perm = np.r_[np.arange(m, 2 * m), np.arange(m)]
    A = b.coefficients
    np.testing.assert_allclose(A[np.ix_(perm, perm)], A, atol=1e-8)


def test_lebesgue_function_finite(basis50):
    from kernel_lsq.quadrature import sup_grid

    leb = np.abs(basis50.evaluate(sup_grid(basis50.centers))).sum(axis=1).max()
    assert math.isfinite(leb) and leb >= 1.0


def test_ill_conditioned(kernel4):
    base = generate_fibonacci(20).points
    near = base[0] + 1e-7 * np.array([1.0, -1.0, 0.0])
    ps = PointSet.from_points(np.vstack([base, near / np.linalg.norm(near)]))
    with pytest.raises(IllConditionedError) as info:
        solve_lagrange(kernel4, ps)
    assert info.value.condition > 1e12


def test_augmented_not_unisolvent():
    # four points on the great circle y = 0 (through north): the harmonic y vanishes on all of them
    circle = np.array([[1, 0, 0], [0, 0, 1], [-1, 0, 0], [math.sqrt(0.5), 0, math.sqrt(0.5)]], float)
    with pytest.raises(NotUnisolventError):
        solve_augmented_lagrange(SurfaceSplineKernel(2), PointSet.from_points(circle))


def test_augmented_side_conditions(fib50):
    b = solve_lagrange(SurfaceSplineKernel(2), fib50)
    assert b.augmentation_degree == 1
    A = b.coefficients
    assert np.abs(A.sum(axis=0)).max() <= 1e-8
    for k in range(3):
        assert np.abs(fib50.points[:, k] @ A).max() <= 1e-8
    np.testing.assert_allclose(b.evaluate(fib50.points), np.eye(50), atol=1e-8)


def test_augmented_reproduces_harmonics(fib50):
    b = solve_lagrange(SurfaceSplineKernel(3), fib50)
    assert b.augmentation_degree == 2
    X = generate_fibonacci(200).points
    for f in (lambda P: P[:, 0] * P[:, 1], lambda P: 3 * P[:, 2] ** 2 - 1, lambda P: P[:, 1] + 2.0):
        np.testing.assert_allclose(b.combine(X, f(fib50.points)), f(X), atol=1e-7)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4])
def test_harmonic_basis_rank(degree):
    P = harmonic_basis(generate_fibonacci(200).points, degree)
    assert P.shape[1] == (degree + 1) ** 2
    assert np.linalg.matrix_rank(P) == (degree + 1) ** 2


def test_save_load_roundtrip(basis50, fib50, tmp_path):
    save_basis(basis50, tmp_path / "b")
    back = load_basis(tmp_path / "b", fib50)
    np.testing.assert_array_equal(back.coefficients, basis50.coefficients)
    assert back.kernel.to_json() == basis50.kernel.to_json()
    with pytest.raises(DomainError):
        load_basis(tmp_path / "b", generate_fibonacci(51))


def test_values_at_memoized(basis50):
    r1, r2 = product_rule(10, 20), product_rule(10, 20)
    v = basis50.values_at(r1)
    assert basis50.values_at(r1) is v
    assert basis50.values_at(r2) is not v
    with pytest.raises(ValueError):
        v[0, 0] = 1.0
    basis50.clear_cache()


def test_function_family_interface():
    C = np.array([[0, 0, 1.0], [0, 0, -1.0]])
    fam = FunctionFamily(C, lambda X, Cs: (X @ Cs.T > 0).astype(float))
    assert fam.q == pytest.approx(math.pi / 2)
    X = np.array([[0, 0.6, 0.8], [0.6, 0, -0.8]])
    np.testing.assert_array_equal(fam.evaluate(X), [[1, 0], [0, 1]])
    np.testing.assert_array_equal(fam.combine(X, [2.0, 3.0]), [2.0, 3.0])
    with pytest.raises(DomainError):
        FunctionFamily(C[:1], lambda X, Cs: X[:, :1])
    rule = default_rule(1.0)
    np.testing.assert_allclose(analysis_map(fam, lambda X: np.ones(len(X)), rule), [2 * math.pi] * 2,
                               rtol=1e-12)
