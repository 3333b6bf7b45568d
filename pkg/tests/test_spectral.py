import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import sph_harm_y

from probekit.errors import DomainError, TailToleranceError
from probekit.spectral import (
    HarmonicField,
    SobolevIndex,
    SphereGrid,
    gauss_legendre,
    multiply,
    point_source_trace,
    project,
    required_degree,
    sobolev_norm,
    synthesize,
    ylm,
)


def random_field(N, K=None, seed=0, real=False):
    rng = np.random.default_rng(seed)
    K = N if K is None else K
    c = rng.normal(size=(N + 1, 2 * K + 1)) + 1j * rng.normal(size=(N + 1, 2 * K + 1))
    f = HarmonicField(N, c)
    if real:
        ks = np.arange(-K, K + 1)
        mirrored = ((-1.0) ** np.abs(ks)) * np.conj(f.coeffs[:, ::-1])
        f = HarmonicField(N, 0.5 * (f.coeffs + mirrored))
    return f


def sphere_points(count, seed=1):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_ylm_matches_scipy():
    pts = sphere_points(25)
    theta = np.arccos(pts[:, 2])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    for n in range(0, 9):
        for k in range(-n, n + 1):
            ref = sph_harm_y(n, k, theta, phi)
            assert np.allclose(ylm(n, k, pts), ref, atol=1e-13)


def test_ylm_high_degree_matches_scipy():
    pts = sphere_points(10, seed=3)
    theta = np.arccos(pts[:, 2])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    for n, k in [(60, 0), (60, 17), (60, -59), (120, 120)]:
        assert np.allclose(ylm(n, k, pts), sph_harm_y(n, k, theta, phi), atol=1e-11)


@given(st.integers(min_value=1, max_value=24), st.integers(min_value=0, max_value=10**6))
def test_grid_round_trip(N, seed):
    f = random_field(N, seed=seed)
    grid = SphereGrid.for_degree(N)
    back = grid.analyze(grid.synthesize(f), N)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-11


@given(st.integers(min_value=1, max_value=20), st.integers(min_value=0, max_value=10**6))
def test_parseval(N, seed):
    f = random_field(N, seed=seed)
    grid = SphereGrid.for_degree(N)
    vals = grid.synthesize(f)
    w = np.outer(grid.w, np.full(grid.n_phi, 2 * math.pi / grid.n_phi))
    assert np.sum(w * np.abs(vals) ** 2) == pytest.approx(f.energy(), rel=1e-11)


def test_zonal_round_trip_large_degree():
    N = 1500
    rng = np.random.default_rng(5)
    f = HarmonicField.zonal(rng.normal(size=N + 1) / (1 + np.arange(N + 1)))
    grid = SphereGrid.for_degree(N, 0)
    back = grid.analyze(grid.synthesize(f), N, 0)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-12


def test_gauss_legendre_high_order():
    x, w = gauss_legendre(3000)
    assert np.sum(w) == pytest.approx(2.0, abs=1e-13)
    # x^(2k) moments
    for k in (1, 5, 40):
        assert np.sum(w * x ** (2 * k)) == pytest.approx(2.0 / (2 * k + 1), rel=1e-12)


@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=10**6))
def test_real_fields_stay_real(N, seed):
    f = random_field(N, seed=seed, real=True)
    assert f.conjugate_symmetric()
    vals = SphereGrid.for_degree(N).synthesize(f)
    assert np.max(np.abs(vals.imag)) < 1e-11 * max(1.0, np.max(np.abs(vals)))


def test_json_round_trip_surface_and_volume():
    f = random_field(6, 3)
    assert np.array_equal(HarmonicField.from_json(f.to_json()).coeffs, f.coeffs)
    r = np.linspace(0.1, 1.0, 4)
    v = HarmonicField(6, np.stack([f.coeffs * x for x in r]), r)
    back = HarmonicField.from_json(v.to_json())
    assert np.array_equal(back.coeffs, v.coeffs) and np.array_equal(back.radial_grid, r)


def test_triangle_is_enforced():
    c = np.ones((3, 5), dtype=complex)
    f = HarmonicField(2, c)
    assert f.get(0, 1) == 0 and f.coeffs[0, 3] == 0 and f.coeffs[1, 0] == 0
    with pytest.raises(DomainError):
        f.set(1, 2, 1.0)


def test_shape_validation():
    with pytest.raises(DomainError):
        HarmonicField(3, np.zeros((3, 1)))
    with pytest.raises(DomainError):
        HarmonicField(3, np.zeros((4, 2)))
    with pytest.raises(DomainError):
        HarmonicField(3, np.zeros((4, 1)), np.linspace(0, 1, 5))


def test_arithmetic_aligns_shapes():
    a = HarmonicField.zonal(np.ones(3))
    b = random_field(5, 2)
    c = a + b
    assert c.max_degree == 5 and c.order_cap == 2
    assert np.allclose((c - b).with_shape(2, 0).coeffs, a.coeffs)
    assert np.allclose((2 * a).coeffs, 2 * a.coeffs)
    assert np.allclose((-a).coeffs, -a.coeffs)


def test_sobolev_norm_weights():
    f = HarmonicField.zonal(np.array([0, 0, 1.0]))
    assert sobolev_norm(f, 1.5) == pytest.approx(7.0 ** 0.75)
    assert sobolev_norm(f, SobolevIndex(0)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        SobolevIndex(float("inf"))


@given(st.floats(min_value=-2, max_value=2), st.floats(min_value=0, max_value=2))
def test_sobolev_monotone_in_s(s, ds):
    f = random_field(8, seed=2)
    assert sobolev_norm(f, s + ds) >= sobolev_norm(f, s) * (1 - 1e-14)


def test_project_recovers_polynomial():
    # x*y*z is a degree-3 polynomial; projection must be exact
    f = project(lambda p: p[:, 0] * p[:, 1] * p[:, 2], 6)
    pts = sphere_points(20)
    assert np.allclose(synthesize(f, pts), pts[:, 0] * pts[:, 1] * pts[:, 2], atol=1e-13)
    assert np.max(np.abs(f.coeffs[4:])) < 1e-13


def test_multiply_exact_and_tail():
    f = project(lambda p: p[:, 2], 2)
    g = project(lambda p: p[:, 0] ** 2, 2)
    prod, tail = multiply(f, g, 4)
    pts = sphere_points(15)
    assert np.allclose(synthesize(prod, pts), pts[:, 2] * pts[:, 0] ** 2, atol=1e-13)
    assert tail < 1e-25
    trunc, tail2 = multiply(f, g, 1)
    assert tail2 > 1e-3


def _point_source(z, pts):
    return 1.0 / (4 * math.pi * np.linalg.norm(pts - z, axis=1))


def test_point_source_on_axis_reconstruction():
    z = np.array([0.0, 0.0, 1.0 + 0.5 / 64])
    f = point_source_trace(z)
    assert f.order_cap == 0 and f.max_degree == required_degree(np.linalg.norm(z), 1e-10)
    pts = sphere_points(30, seed=7)
    exact = _point_source(z, pts)
    assert np.max(np.abs(synthesize(f, pts) - exact) / exact) < 1e-9


def test_point_source_off_axis():
    z = np.array([0.9, -0.8, 0.7])
    f = point_source_trace(z)
    pts = sphere_points(30, seed=8)
    assert np.allclose(synthesize(f, pts), _point_source(z, pts), rtol=1e-9, atol=0)


def test_point_source_tail_error_reports_degree():
    z = np.array([0.0, 0.0, 1.1])
    need = required_degree(1.1, 1e-10)
    with pytest.raises(TailToleranceError) as info:
        point_source_trace(z, N=need - 5)
    assert info.value.required_degree == need
    with pytest.raises(DomainError):
        point_source_trace(np.array([0.0, 0.0, 0.5]))
    with pytest.raises(DomainError):
        point_source_trace(np.array([1.2, 0.0, 0.0]), order_cap=0)


def test_sobolev_worked_values():
    assert sobolev_norm(HarmonicField.zonal(np.array([1.0])), 2.5) == pytest.approx(1.0)
    assert sobolev_norm(HarmonicField.zonal(np.array([0.0, 1.0])), 1.0) == pytest.approx(math.sqrt(3))
    f = random_field(6, seed=9)
    assert sobolev_norm(f, 0.0) == pytest.approx(np.linalg.norm(f.coeffs))


def test_point_source_mean_value():
    # the sphere average of 1/|x - z| is 1/|z|, so Y_0^0 carries sqrt(4 pi) / (4 pi |z|)
    f = point_source_trace(np.array([1.2, 0.0, 1.6]))
    assert f.coeffs[0, f.order_cap] * math.sqrt(4 * math.pi) == pytest.approx(0.5, rel=1e-14)


@given(st.floats(min_value=1.001, max_value=4.0), st.sampled_from([1e-6, 1e-10, 1e-14]))
def test_required_degree_is_minimal(R, tol):
    N = required_degree(R, tol)
    assert R ** -(N + 1) <= tol * (1 + 1e-12)
    assert N == 0 or R ** -N > tol


def test_constant_and_pole_values():
    one = HarmonicField.zonal(np.array([math.sqrt(4 * math.pi)]))
    assert np.allclose(synthesize(one, sphere_points(12)), 1.0, atol=1e-15)
    north = np.array([[0.0, 0.0, 1.0]])
    for n in (0, 3, 17, 80):
        assert ylm(n, 0, north)[0] == pytest.approx(math.sqrt((2 * n + 1) / (4 * math.pi)), rel=1e-13)
        assert abs(ylm(n, min(n, 2), north)[0]) < 1e-15 or n == 0


@given(st.integers(min_value=0, max_value=10**6))
def test_synthesis_is_linear(seed):
    f, g = random_field(7, seed=seed), random_field(7, seed=seed + 1)
    pts = sphere_points(10, seed=seed % 97)
    assert np.allclose(synthesize(f + g, pts), synthesize(f, pts) + synthesize(g, pts), atol=1e-12)
