import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavestrip.grid import (
    Field,
    InvalidGridError,
    MultiplierDomainError,
    bessel_potential,
    dealiased_product,
    fft,
    field_from_function,
    fourier_multiplier,
    inner_l2,
    make_grid,
    norm_l2,
    shift_field,
    spectral_gradient,
)


def random_field(grid, seed=0, kmax=None, complex_=False):
    rng = np.random.default_rng(seed)
    spec = np.zeros(grid.shape, dtype=complex)
    kabs = grid.abs_wavenumber()
    band = kabs <= (kmax if kmax is not None else grid.resolved_kmax() / 3)
    spec[band] = rng.normal(size=band.sum()) + 1j * rng.normal(size=band.sum())
    vals = np.fft.ifftn(spec)
    return Field(grid, vals if complex_ else vals.real)


def test_make_grid_integer_lattice():
    g = make_grid([2 * np.pi], [16])
    assert sorted(np.rint(g.wavenumbers[0]).astype(int)) == list(range(-8, 8))


def test_make_grid_step_pi():
    g = make_grid([2.0], [8])
    ks = sorted(g.wavenumbers[0])
    assert np.allclose(ks, np.pi * np.arange(-4, 4))


def test_make_grid_rejects_odd_count():
    with pytest.raises(InvalidGridError):
        make_grid([2 * np.pi, 2 * np.pi], [16, 7])


def test_make_grid_rejects_small_count():
    with pytest.raises(InvalidGridError):
        make_grid([1.0], [6])


def test_multiplier_single_mode_bracket():
    g = make_grid([2 * np.pi], [32])
    u = field_from_function(g, np.cos)
    out = fourier_multiplier(u, lambda k: np.sqrt(1.0 + k ** 2))
    assert np.allclose(out.values, np.sqrt(2.0) * u.values, atol=1e-12)


def test_multiplier_identity_roundtrip():
    g = make_grid([2 * np.pi], [64])
    u = random_field(g, seed=3)
    out = fourier_multiplier(u, lambda k: np.ones_like(k))
    assert np.max(np.abs(out.values - u.values)) < 1e-12


def test_multiplier_exponential_decay_mode():
    g = make_grid([2 * np.pi], [64])
    u = field_from_function(g, lambda x: np.sin(3 * x))
    out = fourier_multiplier(u, lambda k: np.exp(-0.1 * np.sqrt(1.0 + k ** 2)))
    assert np.allclose(out.values, np.exp(-0.1 * np.sqrt(10.0)) * u.values, atol=1e-12)


def test_multiplier_nonfinite_rejected():
    g = make_grid([2 * np.pi], [16])
    u = random_field(g, seed=1)
    with pytest.raises(MultiplierDomainError):
        fourier_multiplier(u, lambda k: 1.0 / k)


def test_gradient_single_mode():
    g = make_grid([2 * np.pi], [32])
    u = field_from_function(g, lambda x: np.sin(2 * x))
    (du,) = spectral_gradient(u)
    x = g.axes()[0]
    assert np.allclose(du.values, 2 * np.cos(2 * x), atol=1e-12)


def test_gradient_constant_is_zero():
    g = make_grid([2 * np.pi], [16])
    u = Field(g, np.full(g.shape, 4.2))
    (du,) = spectral_gradient(u)
    assert np.max(np.abs(du.values)) < 1e-13


def test_gradient_2d_product_mode():
    g = make_grid([2 * np.pi, 2 * np.pi], [24, 24])
    u = field_from_function(g, lambda x, y: np.cos(x) * np.sin(y))
    dx, dy = spectral_gradient(u)
    xm, ym = g.meshes()
    assert np.allclose(dx.values, -np.sin(xm) * np.sin(ym), atol=1e-12)
    assert np.allclose(dy.values, np.cos(xm) * np.cos(ym), atol=1e-12)


def test_roundtrip_tolerance():
    g = make_grid([2 * np.pi, 3.0], [16, 16])
    u = random_field(g, seed=7)
    v = fourier_multiplier(u, lambda kx, ky: np.ones_like(kx))
    rel = np.max(np.abs(v.values - u.values)) / np.max(np.abs(u.values))
    assert rel < 1e-12


@given(st.integers(min_value=0, max_value=10), st.integers(min_value=0, max_value=10))
@settings(max_examples=20, deadline=None)
def test_multipliers_commute(p, q):
    g = make_grid([2 * np.pi], [32])
    u = random_field(g, seed=11)
    m1 = lambda k: np.exp(-0.01 * p * np.abs(k))
    m2 = lambda k: (1.0 + k ** 2) ** (-q / 20.0)
    a = fourier_multiplier(fourier_multiplier(u, m1), m2)
    b = fourier_multiplier(u, lambda k: m1(k) * m2(k))
    assert np.max(np.abs(a.values - b.values)) <= 1e-12 * max(1.0, np.max(np.abs(b.values)))


def test_parseval():
    g = make_grid([2 * np.pi], [64])
    u = random_field(g, seed=5)
    uh = fft(u)
    spectral = np.sqrt(np.sum(np.abs(uh) ** 2) * g.cell_volume / g.size)
    assert abs(norm_l2(u) - spectral) < 1e-12 * spectral


def test_real_field_spectrum_symmetry():
    g = make_grid([2 * np.pi], [32])
    u = random_field(g, seed=9)
    assert u.spectrum_is_conjugate_symmetric()


def test_inner_product_symmetry():
    g = make_grid([2 * np.pi], [32])
    u, v = random_field(g, 1), random_field(g, 2)
    assert abs(inner_l2(u, v) - inner_l2(v, u)) < 1e-12


def test_dealiased_product_of_low_modes_exact():
    g = make_grid([2 * np.pi], [48])
    a = field_from_function(g, lambda x: np.cos(2 * x))
    b = field_from_function(g, lambda x: np.sin(3 * x))
    p = dealiased_product(a, b)
    x = g.axes()[0]
    assert np.allclose(p.values, np.cos(2 * x) * np.sin(3 * x), atol=1e-12)


def test_shift_is_exact():
    g = make_grid([2 * np.pi], [32])
    u = random_field(g, seed=13)
    assert np.array_equal(shift_field(u, (5,)).values, np.roll(u.values, 5))


def test_bessel_potential_monotone_on_modes():
    g = make_grid([2 * np.pi], [32])
    u = field_from_function(g, lambda x: np.cos(4 * x))
    low = norm_l2(bessel_potential(u, 0.5))
    high = norm_l2(bessel_potential(u, 1.5))
    assert high > low
