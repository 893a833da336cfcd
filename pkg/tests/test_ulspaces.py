import numpy as np
import pytest
from scipy.integrate import quad

from wavestrip.grid import Field, field_from_function, make_grid, norm_l2
from wavestrip.ulspaces import (
    DyadicDecomposition,
    PartitionOfUnity,
    bump_profile,
    dyadic_block,
    ul_sobolev_norm,
    zygmund_norm,
)

GRID = make_grid([2 * np.pi], [256])
POU = PartitionOfUnity(GRID)
DD = DyadicDecomposition(GRID)


def corpus(grid):
    rng = np.random.default_rng(42)
    x = grid.axes()[0]
    fields = [
        Field(grid, np.ones(grid.shape)),
        Field(grid, np.cos(x)),
        Field(grid, np.sin(5 * x) + 0.3 * np.cos(11 * x)),
        Field(grid, np.exp(-8.0 * np.minimum(x, 2 * np.pi - x) ** 2)),
    ]
    spec = np.zeros(grid.shape, dtype=complex)
    band = grid.abs_wavenumber() <= 20
    spec[band] = rng.normal(size=band.sum()) + 1j * rng.normal(size=band.sum())
    fields.append(Field(grid, np.fft.ifftn(spec).real))
    return fields


def test_window_sum_is_one():
    assert POU.partition_defect() < 1e-12


def test_window_sum_is_one_2d():
    g2 = make_grid([2 * np.pi, 4.0], [32, 16])
    pou2 = PartitionOfUnity(g2)
    assert pou2.partition_defect() < 1e-12


def test_constant_field_norm_matches_window_l2():
    u = Field(GRID, np.ones(GRID.shape))
    norms = [norm_l2(POU.window_field(q)) for q in range(POU.n_windows)]
    assert ul_sobolev_norm(u, 0.0, POU) == pytest.approx(max(norms), rel=1e-12)
    # translation invariance up to sub-cell sampling offsets of the centers
    assert max(norms) - min(norms) < 1e-6 * max(norms)


def test_windowed_norm_of_cosine_against_quadrature():
    # independent oracle: direct quadrature of the periodized window profile
    u = field_from_function(GRID, np.cos)
    L = GRID.lengths[0]
    n_q = POU.n_windows
    spacing = L / n_q

    def raw(xx, c):
        d = (xx - c + L / 2.0) % L - L / 2.0
        return bump_profile(d / spacing)

    def normalized(xx, q):
        total = sum(raw(xx, L * p / n_q) for p in range(n_q))
        return raw(xx, L * q / n_q) / total

    oracle = 0.0
    for q in range(n_q):
        val, _ = quad(lambda xx: (normalized(xx, q) * np.cos(xx)) ** 2, 0.0, L,
                      limit=400)
        oracle = max(oracle, np.sqrt(val))
    assert ul_sobolev_norm(u, 0.0, POU) == pytest.approx(oracle, rel=5e-4)


def test_localized_bump_attained_at_nearest_window():
    x0 = POU.centers[2][0]
    u = field_from_function(GRID, lambda x: np.exp(-20.0 * ((x - x0 + np.pi) % (2 * np.pi) - np.pi) ** 2))
    from wavestrip.grid import bessel_potential

    vals = [
        norm_l2(bessel_potential(Field(GRID, POU.windows[q] * u.values), 0.0))
        for q in range(POU.n_windows)
    ]
    assert int(np.argmax(vals)) == 2


def test_monotonicity_in_s():
    for u in corpus(GRID):
        assert ul_sobolev_norm(u, 0.5, POU) <= ul_sobolev_norm(u, 1.5, POU) + 1e-12


def test_window_choice_changes_norm_by_bounded_ratio():
    alt = PartitionOfUnity(GRID, flat=0.25, zero=0.9)
    for u in corpus(GRID):
        a = ul_sobolev_norm(u, 1.0, POU)
        b = ul_sobolev_norm(u, 1.0, alt)
        if a == 0 and b == 0:
            continue
        assert 0.1 <= a / b <= 10.0


def test_dyadic_partition_of_unity_on_lattice():
    kabs = GRID.abs_wavenumber()
    total = DD.block_multipliers.sum(axis=0)
    resolved = kabs <= 2.0 ** DD.jmax
    assert np.max(np.abs(total[resolved] - 1.0)) < 1e-10


def test_block_disjointness():
    for j in DD.block_index_range():
        for k in DD.block_index_range():
            if abs(j - k) >= 2:
                overlap = DD.block_multiplier(j) * DD.block_multiplier(k)
                assert np.max(np.abs(overlap)) == 0.0


def test_single_mode_block_value():
    k0 = 5
    u = field_from_function(GRID, lambda x: np.cos(k0 * x))
    j = 2  # 2 < 5 < 8
    out = dyadic_block(u, j, DD)
    expected = DD.block_multiplier(j)[k0] * u.values
    assert np.allclose(out.values, expected, atol=1e-12)


def test_constant_lives_in_low_block():
    u = Field(GRID, np.full(GRID.shape, 2.0))
    assert norm_l2(dyadic_block(u, 2, DD)) < 1e-13
    assert norm_l2(dyadic_block(u, -1, DD)) == pytest.approx(norm_l2(u), rel=1e-12)


def test_block_reconstruction_band_limited():
    u = field_from_function(GRID, lambda x: np.cos(7 * x) + np.sin(23 * x))
    total = np.zeros(GRID.shape)
    for j in DD.block_index_range():
        total += dyadic_block(u, j, DD).values
    assert np.max(np.abs(total - u.values)) < 1e-10


def test_block_index_out_of_range():
    u = field_from_function(GRID, np.cos)
    with pytest.raises(IndexError):
        dyadic_block(u, DD.jmax + 1, DD)


def test_zygmund_single_mode_matches_cutoff_evaluation():
    k0 = 12
    u = field_from_function(GRID, lambda x: np.cos(k0 * x))
    # oracle: the block multipliers evaluated at k0 weight a unit-amplitude mode
    expected = max(
        float(DD.block_multiplier(j)[k0]) for j in DD.block_index_range()
    )
    assert zygmund_norm(u, 0.0, DD) == pytest.approx(expected, rel=1e-10)
    assert zygmund_norm(u, 0.0, DD) <= 1.0 + 1e-10


def test_zygmund_zero_field():
    assert zygmund_norm(Field(GRID, np.zeros(GRID.shape)), 1.0, DD) == 0.0


def test_zygmund_growth_across_scales():
    sigma = 0.75
    vals = []
    for j in (3, 4, 5):
        u = field_from_function(GRID, lambda x: np.cos(2.0 ** j * x))
        vals.append(zygmund_norm(u, sigma, DD))
    for j, (a, b) in enumerate(zip(vals, vals[1:])):
        ratio = b / a
        assert 2.0 ** sigma / 2.0 <= ratio <= 2.0 ** sigma * 2.0


def test_embedding_zygmund_by_ul_norm():
    s = 2.0
    ratios = []
    for u in corpus(GRID):
        zn = zygmund_norm(u, s - 0.5, DD)
        un = ul_sobolev_norm(u, s, POU)
        if un > 0:
            ratios.append(zn / un)
    assert max(ratios) < 30.0
