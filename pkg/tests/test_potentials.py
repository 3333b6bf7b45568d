import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from probekit.errors import DomainError, ValidationError
from probekit.potentials import (
    PotentialConfig,
    double_layer_volume,
    dl_transpose,
    hypersingular,
    multipliers,
    single_layer,
    single_layer_volume,
    smoothing_check,
    volume_potential,
    volume_sobolev_norm,
)
from probekit.radial import RadialProfile, default_radial_grid
from probekit.spectral import HarmonicField, SphereGrid, ylm


def q_poly(r):
    return 1.0 - r * r


def band_source(grid, N, func):
    """Volume field whose band ``n`` is ``func(r, n)``."""
    r = grid.nodes
    n = np.arange(N + 1)
    return HarmonicField.zonal(func(r[:, None], n[None, :]), r)


def quad_green(n, q, F, r):
    """Reference band potential by adaptive quadrature of the split kernel."""
    inner = quad(lambda s: (s / r) ** (n + 1) * s * q(s) * F(s), 0, r, epsabs=1e-15, epsrel=1e-13)[0]
    outer = quad(lambda s: (r / s) ** n * s * q(s) * F(s), r, 1, epsabs=1e-15, epsrel=1e-13)[0]
    return (inner + outer) / (2 * n + 1)


def test_multiplier_values():
    N = 5
    n = np.arange(N + 1)
    assert np.allclose(multipliers("S", N), 1 / (2 * n + 1))
    assert np.allclose(multipliers("K", N), multipliers("K'", N))
    with pytest.raises(DomainError):
        multipliers("D", N)


def test_calderon_identity():
    N = 200
    S, K, T = (multipliers(o, N) for o in ("S", "K", "T"))
    assert np.allclose(S * T, K * K - 0.25, atol=1e-15)


@given(st.integers(min_value=0, max_value=40))
def test_green_representation_of_harmonic_bands(n):
    # u = r^n Y: Neumann datum n, Dirichlet datum 1; u = S[du/dnu] - D[u]
    N = n
    f = HarmonicField.zonal(np.eye(N + 1)[n])
    g = f * float(n)
    r = np.array([0.2, 0.6, 1.0])
    u = single_layer_volume(g, r) - double_layer_volume(f, r)
    assert np.allclose(u.coeffs[:, n, 0], r**n, atol=1e-13)


def test_jump_relations_on_traces():
    f = HarmonicField.zonal(np.arange(1.0, 8.0))
    n = np.arange(7)
    # (S phi)' from inside is (K' + 1/2) phi
    inner_normal = single_layer(f).scale_degrees(n.astype(float))
    assert np.allclose(inner_normal.coeffs, (dl_transpose(f) + f * 0.5).coeffs)
    assert np.allclose(hypersingular(f).coeffs[:, 0], -n * (n + 1) / (2 * n + 1) * np.arange(1.0, 8.0))


def test_boundary_operators_reject_volume_fields():
    v = HarmonicField.zeros(3, 0, np.array([0.5, 1.0]))
    for op in (single_layer, dl_transpose, hypersingular):
        with pytest.raises(DomainError):
            op(v)


def test_constant_source_closed_form():
    cfg = PotentialConfig(RadialProfile.constant(1.0), default_radial_grid(16))
    r = cfg.grid.nodes
    src = band_source(cfg.grid, 4, lambda rr, n: (n == 0) * np.ones_like(rr) * math.sqrt(4 * math.pi))
    vp = volume_potential(src, cfg)
    c = math.sqrt(4 * math.pi)
    assert np.allclose(vp.volume.coeffs[:, 0, 0], c * (0.5 - r**2 / 6), atol=1e-14)
    assert vp.trace.coeffs[0, 0] == pytest.approx(c / 3, abs=1e-14)
    assert vp.normal_derivative.coeffs[0, 0] == pytest.approx(-c / 3, abs=1e-14)


@pytest.mark.parametrize("n", [0, 2, 7, 30])
def test_band_potential_against_quadrature(n):
    N = max(n, 8)
    cfg = PotentialConfig(RadialProfile.polynomial([1, 0, -1]), default_radial_grid(N))
    F = lambda s: np.cos(2 * s) * s**n
    src = band_source(cfg.grid, N, lambda rr, nn: np.where(nn == n, np.cos(2 * rr) * rr**nn, 0.0))
    vp = volume_potential(src, cfg)
    r = cfg.grid.nodes
    for i in (0, r.size // 3, 2 * r.size // 3, r.size - 1):
        ref = quad_green(n, q_poly, F, r[i])
        assert vp.volume.coeffs[i, n, 0] == pytest.approx(ref, rel=1e-10, abs=1e-15)
    A1 = quad(lambda s: s ** (n + 2) * q_poly(s) * F(s), 0, 1, epsabs=1e-16, epsrel=1e-13)[0]
    assert vp.trace.coeffs[n, 0] == pytest.approx(A1 / (2 * n + 1), rel=1e-11)
    assert vp.normal_derivative.coeffs[n, 0] == pytest.approx(-(n + 1) * A1 / (2 * n + 1), rel=1e-11)


def test_potential_solves_band_equation():
    N = 6
    cfg = PotentialConfig(RadialProfile.polynomial([1, 0, -1]), default_radial_grid(32))
    r = cfg.grid.nodes
    src = band_source(cfg.grid, N, lambda rr, n: np.exp(rr) * rr**n)
    V = volume_potential(src, cfg).volume.coeffs[:, :, 0]
    d1 = cfg.grid.derivative(V)
    d2 = cfg.grid.derivative(d1)
    n = np.arange(N + 1)
    lap = d2 + 2 / r[:, None] * d1 - n * (n + 1) / r[:, None] ** 2 * V
    rhs = -q_poly(r)[:, None] * np.exp(r)[:, None] * r[:, None] ** n
    inner = (r > 0.05) & (r < 0.98)
    assert np.max(np.abs(lap[inner] - rhs[inner])) < 1e-7


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
def test_volume_potential_is_linear(a, b):
    cfg = PotentialConfig(RadialProfile.constant(2.0), default_radial_grid(8))
    f = band_source(cfg.grid, 5, lambda rr, n: rr**n)
    g = band_source(cfg.grid, 5, lambda rr, n: np.sin(rr + n))
    lhs = volume_potential(f * a + g * b, cfg).trace
    rhs = volume_potential(f, cfg).trace * a + volume_potential(g, cfg).trace * b
    assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-13)


def test_constant_modulation_scales_result():
    cfg = PotentialConfig(RadialProfile.constant(1.0), default_radial_grid(8))
    two = HarmonicField.zonal(np.array([2.0 * math.sqrt(4 * math.pi)]))
    mod = PotentialConfig(cfg.q, cfg.grid, two)
    src = band_source(cfg.grid, 4, lambda rr, n: rr**n)
    a = volume_potential(src, cfg)
    b = volume_potential(src, mod)
    assert np.allclose(b.trace.coeffs, 2 * a.trace.coeffs, atol=1e-13)
    assert b.aliasing_tail < 1e-25


def test_angular_modulation_against_pointwise_product():
    N = 4
    grid = default_radial_grid(8)
    zmod = SphereGrid.for_degree(1)
    # m(x) = 1 + x3 has coefficients on degrees 0 and 1 only
    m = zmod.analyze(1 + zmod.points()[:, 2].reshape(zmod.n_theta, zmod.n_phi), 1)
    cfg = PotentialConfig(RadialProfile.constant(1.0), grid, m)
    src = band_source(grid, N, lambda rr, n: (n == 0) * np.ones_like(rr))
    vp = volume_potential(src, cfg)
    # q*f = Y00 (1 + cos theta): degree 0 keeps 1, degree 1 picks up Y00 * x3
    base = volume_potential(src, PotentialConfig(cfg.q, grid))
    assert vp.trace.band0[0] == pytest.approx(base.trace.coeffs[0, 0], abs=1e-14)
    expected_1 = math.sqrt(1 / 3) * quad(lambda s: s**3, 0, 1)[0] / 3
    assert vp.trace.band0[1] == pytest.approx(expected_1, abs=1e-13)


def test_config_validation():
    with pytest.raises(ValidationError):
        PotentialConfig(RadialProfile.constant(1.0), default_radial_grid(8),
                        HarmonicField.zeros(2, 0, np.array([0.5])))
    cfg = PotentialConfig(1.0, default_radial_grid(8))
    with pytest.raises(DomainError):
        volume_potential(HarmonicField.zeros(2, 0), cfg)
    with pytest.raises(DomainError):
        volume_potential(HarmonicField.zeros(2, 0, np.array([0.5, 1.0])), cfg)


@pytest.mark.parametrize("op,s", [("S", -0.5), ("K", 0.5), ("K'", -0.5), ("T", 0.5), ("G_q", 1.0)])
def test_mapping_properties(op, s):
    rep = smoothing_check(op, s, N=64)
    assert rep.bounded and math.isfinite(rep.random_ratio)


def test_smoothing_detects_wrong_gain():
    rep = smoothing_check("S", 0.0, N=64)
    # one order more than S provides must show linear growth
    n = rep.degrees.astype(float)
    ratios = rep.ratios * np.sqrt(1 + n * (n + 1))
    slope = np.polyfit(np.log(n[n > 32]), np.log(ratios[n > 32]), 1)[0]
    assert slope > 0.9
    with pytest.raises(DomainError):
        smoothing_check("X", 0.0)


def test_volume_norm_of_simple_band():
    grid = default_radial_grid(8)
    f = band_source(grid, 2, lambda rr, n: (n == 1) * rr)
    # int (r^2 + 1) r^2 dr = 1/5 + 1/3, weight (1 + 2)^(order - 1)
    assert volume_sobolev_norm(f, grid, 2) == pytest.approx(math.sqrt(3 * (1 / 5 + 1 / 3)), rel=1e-13)


def test_constant_density_values():
    one = HarmonicField.zonal(np.array([1.0]))
    assert single_layer(one).coeffs[0, 0] == pytest.approx(1.0)
    assert dl_transpose(one).coeffs[0, 0] == pytest.approx(-0.5)
    assert hypersingular(one).coeffs[0, 0] == 0
    zero = HarmonicField.zonal(np.zeros(4))
    assert not np.any(single_layer(zero).coeffs) and not np.any(dl_transpose(zero).coeffs)


def test_single_layer_against_surface_quadrature():
    # S[Y_5^0] at interior points, by direct quadrature of the smooth kernel
    grid = SphereGrid.for_degree(80)
    f = HarmonicField.zonal(np.eye(6)[5])
    y = grid.points()
    w = np.outer(grid.w, np.full(grid.n_phi, 2 * math.pi / grid.n_phi)).ravel()
    vals = grid.synthesize(f).ravel().real
    for x in (np.array([0.0, 0.0, 0.5]), np.array([0.3, -0.2, 0.1])):
        direct = np.sum(w * vals / (4 * math.pi * np.linalg.norm(y - x, axis=1)))
        r = np.linalg.norm(x)
        band = single_layer_volume(f, np.array([r])).coeffs[0, 5, 0]
        assert band == pytest.approx(r**5 / 11, rel=1e-14)
        assert direct == pytest.approx((band * ylm(5, 0, (x / r)[None])[0]).real, rel=1e-12)


def test_hypersingular_grows_linearly():
    n = np.arange(32, 65)
    ratios = np.array([hypersingular(HarmonicField.zonal(np.eye(k + 1)[k])).coeffs[k, 0] for k in n])
    slope = np.polyfit(n, np.abs(ratios), 1)[0]
    assert slope == pytest.approx(0.5, rel=0.1)


def test_volume_potential_special_sources():
    grid = default_radial_grid(16)
    src = band_source(grid, 3, lambda rr, n: (n == 0) * rr**2)
    zero = volume_potential(src, PotentialConfig(RadialProfile.constant(0.0), grid))
    assert not np.any(zero.volume.coeffs) and not np.any(zero.trace.coeffs)
    one = volume_potential(src, PotentialConfig(RadialProfile.constant(1.0), grid))
    r = grid.nodes
    for i in (0, r.size // 2, r.size - 1):
        ref = (quad(lambda s: (s / r[i]) * s * s**2, 0, r[i])[0] + quad(lambda s: s * s**2, r[i], 1)[0])
        assert one.volume.coeffs[i, 0, 0] == pytest.approx(ref, abs=1e-8)
