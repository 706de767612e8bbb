import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernel_lsq.errors import DegenerateSetError, DomainError, SizeError
from kernel_lsq.geometry import (
    NORTH,
    SOUTH,
    PointSet,
    SpherePoint,
    ball_volume,
    candidate_grid,
    generate_fibonacci,
    geodesic_distance,
    mesh_stats,
    pairwise_distances,
    sphere_constants,
    thin_to_separation,
)

coord = st.floats(-1.0, 1.0, allow_nan=False)
vector = st.tuples(coord, coord, coord).filter(lambda v: np.linalg.norm(v) > 1e-3)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


OCTAHEDRON = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)


@given(vector)
def test_sphere_point_is_normalized(v):
    p = SpherePoint(*v)
    assert abs(p.x**2 + p.y**2 + p.z**2 - 1) <= 1e-12


def test_sphere_point_rejects_zero():
    with pytest.raises(DomainError):
        SpherePoint(0.0, 0.0, 0.0)


def test_geodesic_distance_examples():
    assert geodesic_distance(NORTH, NORTH) == 0.0
    assert geodesic_distance(NORTH, SOUTH) == pytest.approx(math.pi, abs=1e-15)
    a = SpherePoint.from_lonlat(0.0, 0.0)
    b = SpherePoint.from_lonlat(math.pi / 2, 0.0)
    assert geodesic_distance(a, b) == pytest.approx(math.pi / 2, abs=1e-15)


@given(vector, vector)
def test_geodesic_distance_matches_clamped_arccos(u, v):
    u, v = unit(u), unit(v)
    ref = math.acos(min(1.0, max(-1.0, float(u @ v))))
    d = geodesic_distance(u, v)
    assert 0.0 <= d <= math.pi
    assert d == pytest.approx(ref, abs=1e-7)
    assert d == geodesic_distance(v, u)


@given(vector, vector, vector)
def test_triangle_inequality(a, b, c):
    a, b, c = unit(a), unit(b), unit(c)
    assert geodesic_distance(a, c) <= geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-10


def test_mesh_stats_poles():
    h, q, rho = mesh_stats([NORTH, SOUTH], 10_000)
    assert q == pytest.approx(math.pi / 2, abs=1e-12)
    assert h == pytest.approx(math.pi / 2, abs=1e-12)
    assert rho == pytest.approx(1.0, abs=1e-12)


def _brute_force_fill(points, n_lat=1000, n_lon=2000):
    # independent oracle: dense latitude-longitude grid (2e6 points)
    lat = np.linspace(-math.pi / 2, math.pi / 2, n_lat)
    lon = np.linspace(0, 2 * math.pi, n_lon, endpoint=False)
    la, lo = np.meshgrid(lat, lon, indexing="ij")
    G = np.column_stack([(np.cos(la) * np.cos(lo)).ravel(), (np.cos(la) * np.sin(lo)).ravel(),
                         np.sin(la).ravel()])
    best = (G @ np.asarray(points).T).max(axis=1)
    return float(np.arccos(np.clip(best, -1, 1)).max())


def test_mesh_stats_octahedron():
    h, q, _ = mesh_stats(OCTAHEDRON, 1_000_000)
    assert q == pytest.approx(math.pi / 4, abs=1e-12)
    oracle = _brute_force_fill(OCTAHEDRON)
    assert oracle == pytest.approx(math.acos(1 / math.sqrt(3)), abs=2e-3)
    assert h == pytest.approx(oracle, abs=2e-3)
    assert h <= math.acos(1 / math.sqrt(3)) + 1e-12


def test_mesh_stats_errors():
    with pytest.raises(DegenerateSetError):
        mesh_stats([NORTH, NORTH])
    with pytest.raises(SizeError):
        mesh_stats([NORTH])
    with pytest.raises(DomainError):
        mesh_stats([NORTH, SOUTH], 8)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 60), st.integers(16, 3000), st.integers(1, 3000))
def test_mesh_norm_monotone_in_resolution(n, m, extra):
    X = candidate_grid(4 * n)[::4]  # any fixed cloud
    h1 = mesh_stats(X, m).h
    h2 = mesh_stats(X, m + extra).h
    assert h2 >= h1


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 300))
def test_mesh_ratio_at_least_one(n):
    ps = generate_fibonacci(n)
    assert ps.rho >= 1 - 1e-9
    assert ps.q > 0


def test_generate_fibonacci_examples():
    with pytest.raises(SizeError):
        generate_fibonacci(1)
    p100, p400 = generate_fibonacci(100), generate_fibonacci(400)
    assert p100.rho < 4
    assert 0.4 <= p400.h / p100.h <= 0.6


def test_fibonacci_mesh_ratio_bounded():
    rhos = [generate_fibonacci(n).rho for n in (50, 100, 200, 400, 800, 1600)]
    assert max(rhos) / min(rhos) < 2


def test_thin_to_separation_examples():
    assert len(thin_to_separation([NORTH, SOUTH], math.pi / 8)) == 2
    near = unit([1e-6, 0.0, 1.0])
    assert len(thin_to_separation([NORTH.as_array(), near], math.pi / 8)) == 1
    with pytest.raises(SizeError):
        thin_to_separation(np.empty((0, 3)), 0.1)
    with pytest.raises(DomainError):
        thin_to_separation([NORTH], 0.0)


def test_thin_random_cloud():
    X = np.random.default_rng(3).standard_normal((10_000, 3))
    ps = thin_to_separation(X, 0.05)
    assert ps.q >= 0.05
    assert ps.rho <= 2 * 4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(20, 400), st.floats(0.05, 0.5))
def test_thin_postconditions_exhaustive(seed, m, q_min):
    X = unit_rows(np.random.default_rng(seed).standard_normal((m, 3)))
    ps = thin_to_separation(X, q_min)
    D = pairwise_distances(ps.points, ps.points)
    np.fill_diagonal(D, np.inf)
    assert D.min() >= 2 * q_min
    # maximality: every rejected point is too close to some kept point
    kept = {tuple(p) for p in ps.points}
    rejected = np.array([x for x in X if tuple(x) not in kept]).reshape(-1, 3)
    if len(rejected):
        assert (pairwise_distances(rejected, ps.points).min(axis=1) < 2 * q_min).all()


def unit_rows(X):
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def test_sphere_constants():
    c = sphere_constants()
    assert (c.alpha, c.omega, c.inradius, c.dimension) == (4 / math.pi, math.pi, math.pi, 2)
    assert c.counting == pytest.approx(math.pi**2)
    r = math.pi / 2
    assert ball_volume(r) == pytest.approx(2 * math.pi)
    assert c.alpha * r**2 == pytest.approx(math.pi)
    assert c.alpha * r**2 <= ball_volume(r) <= c.omega * r**2
    assert c.omega * r**2 == pytest.approx(math.pi**3 / 4)
    assert ball_volume(1e-4) / 1e-8 == pytest.approx(c.omega, rel=1e-6)
    assert ball_volume(math.pi) == pytest.approx(c.alpha * math.pi**2)


@given(st.floats(1e-6, math.pi))
def test_volume_bounds_hold(r):
    c = sphere_constants()
    v = ball_volume(r)
    assert c.alpha * r**2 <= v * (1 + 1e-12)
    assert v <= c.omega * r**2 * (1 + 1e-12)


def test_point_set_csv_roundtrip(tmp_path):
    ps = generate_fibonacci(37)
    path = tmp_path / "pts.csv"
    ps.save_csv(path)
    side = json.loads(path.with_suffix(".json").read_text())
    assert side["n"] == 37 and side["h"] == ps.h and side["candidate_resolution"] == ps.candidate_resolution
    back = PointSet.load_csv(path)
    np.testing.assert_allclose(back.points, ps.points, atol=1e-15)
    assert back.digest() == ps.digest() or np.allclose(back.points, ps.points)


def test_load_csv_normalizes(tmp_path):
    path = tmp_path / "raw.csv"
    path.write_text("x,y,z\n2,0,0\n0,0,-3\n")
    ps = PointSet.load_csv(path)
    np.testing.assert_allclose(ps.points, [[1, 0, 0], [0, 0, -1]])


def test_point_set_is_read_only():
    ps = generate_fibonacci(10)
    with pytest.raises(ValueError):
        ps.points[0, 0] = 2.0
    assert isinstance(ps[0], SpherePoint)
    assert ps.distances.shape == (10, 10)
