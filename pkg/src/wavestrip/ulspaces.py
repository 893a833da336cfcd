"""Uniformly local Sobolev norms, Littlewood-Paley blocks, Zygmund norms.

The uniformly local H^s norm of u is the max over window translates q of
||<D>^s (chi_q u)||_{L^2}, where the chi_q form a smooth partition of unity.
On the torus the translate set is finite (one window per unit of period).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from wavestrip.grid import Field, PeriodicGrid, bessel_potential, fft, ifft, norm_l2


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        g = np.where(1.0 - t > 0.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return f / (f + g)


def bump_profile(r: np.ndarray, flat: float = 0.5, zero: float = 1.0) -> np.ndarray:
    """Even C-infinity bump of |r|: 1 for |r| <= flat, 0 for |r| >= zero."""
    r = np.abs(np.asarray(r, dtype=float))
    return smooth_step((zero - r) / (zero - flat))


@dataclass
class PartitionOfUnity:
    """Window family chi_q on the torus with sum_q chi_q = 1 at every node.

    The raw window is a tensor product of 1-D bumps (standard exp(-1/t)
    mollifier construction) placed on near-unit-spaced centers; renormalizing
    by the periodic window sum makes the partition identity exact.
    """

    grid: PeriodicGrid
    flat: float = 0.5
    zero: float = 1.0
    centers: list[tuple[float, ...]] = field(init=False, repr=False)
    windows: np.ndarray = field(init=False, repr=False)  # (n_windows, *grid.shape)
    normalizer: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (0.0 < self.flat < self.zero <= 1.0):
            raise ValueError("window profile requires 0 < flat < zero <= 1")
        grid = self.grid
        axes = grid.axes()
        per_axis_centers = []
        per_axis_spacing = []
        for L in grid.lengths:
            n_q = max(1, int(round(L)))
            per_axis_spacing.append(L / n_q)
            per_axis_centers.append([L * q / n_q for q in range(n_q)])
        # 1-D window factors, periodized over the torus images
        factors = []
        for ax, (L, cs, h) in enumerate(
            zip(grid.lengths, per_axis_centers, per_axis_spacing)
        ):
            x = axes[ax]
            fax = np.empty((len(cs), len(x)))
            for i, c in enumerate(cs):
                d = x - c
                d = (d + L / 2.0) % L - L / 2.0  # wrap to [-L/2, L/2)
                fax[i] = bump_profile(d / h, self.flat, self.zero)
            factors.append(fax)
        if grid.dim == 1:
            raw = factors[0]
            centers = [(c,) for c in per_axis_centers[0]]
        else:
            raw = np.einsum("ax,by->abxy", factors[0], factors[1])
            raw = raw.reshape(-1, *grid.shape)
            centers = [
                (c0, c1) for c0 in per_axis_centers[0] for c1 in per_axis_centers[1]
            ]
        total = raw.sum(axis=0)
        if np.min(total) <= 0:
            raise ValueError("window family does not cover the torus")
        self.windows = raw / total
        self.normalizer = total
        self.centers = centers

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    def window_field(self, q: int) -> Field:
        return Field(self.grid, self.windows[q])

    def partition_defect(self) -> float:
        return float(np.max(np.abs(self.windows.sum(axis=0) - 1.0)))


def ul_sobolev_norm(u: Field, s: float, pou: PartitionOfUnity) -> float:
    """sup over windows q of ||<D>^s (chi_q u)||_{L^2} on the torus."""
    best = 0.0
    for q in range(pou.n_windows):
        w = Field(u.grid, pou.windows[q] * u.values)
        best = max(best, norm_l2(bessel_potential(w, s)))
    return best


@dataclass
class DyadicDecomposition:
    """Littlewood-Paley blocks Delta_j, j = -1 .. jmax, on the grid lattice.

    Block -1 is the low ball |xi| <= 1; block j >= 0 lives on the annulus
    2^(j-1) <= |xi| <= 2^(j+1).  The multipliers telescope exactly, so the
    reconstruction sum is exact (to round-off) for band-limited input.
    """

    grid: PeriodicGrid
    jmax: int = field(init=False)
    block_multipliers: np.ndarray = field(init=False, repr=False)
    lowpass_multipliers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kabs = self.grid.abs_wavenumber()
        self.jmax = int(np.floor(np.log2(self.grid.resolved_kmax())))
        theta = [self._theta(kabs / 2.0 ** j) for j in range(-1, self.jmax + 2)]
        blocks = [theta[0]]  # j = -1: Theta(2|xi|)
        for j in range(0, self.jmax + 1):
            blocks.append(theta[j + 1] - theta[j])
        self.block_multipliers = np.stack(blocks)
        self.lowpass_multipliers = np.stack(theta[: self.jmax + 2])

    @staticmethod
    def _theta(r: np.ndarray) -> np.ndarray:
        # radial lowpass: 1 for r <= 1, 0 for r >= 2
        return bump_profile(r, flat=1.0, zero=2.0)

    def block_index_range(self) -> range:
        return range(-1, self.jmax + 1)

    def block_multiplier(self, j: int) -> np.ndarray:
        if not (-1 <= j <= self.jmax):
            raise IndexError(f"block index {j} outside [-1, {self.jmax}]")
        return self.block_multipliers[j + 1]

    def lowpass_multiplier(self, m: int) -> np.ndarray:
        """Multiplier of S_m = sum of blocks <= m (1 on |xi| <= 2^m)."""
        if m < -1:
            return self._theta(self.grid.abs_wavenumber() / 2.0 ** m)
        m = min(m, self.jmax)
        return self.lowpass_multipliers[m + 1]


def dyadic_block(u: Field, j: int, dd: DyadicDecomposition) -> Field:
    """Frequency block Delta_j u."""
    mult = dd.block_multiplier(j)
    return ifft(u.grid, mult * fft(u), real=u.is_real)


def lowpass(u: Field, m: int, dd: DyadicDecomposition) -> Field:
    """S_m u: modes up to the 2^m scale."""
    return ifft(u.grid, dd.lowpass_multiplier(m) * fft(u), real=u.is_real)


def zygmund_norm(u: Field, sigma: float, dd: DyadicDecomposition) -> float:
    """max over blocks of 2^(j*sigma) * ||Delta_j u||_{L^inf}, truncated at jmax."""
    uh = fft(u)
    best = 0.0
    for j in dd.block_index_range():
        piece = ifft(u.grid, dd.block_multiplier(j) * uh, real=u.is_real)
        best = max(best, 2.0 ** (j * sigma) * float(np.max(np.abs(piece.values))))
    return best


def holder_norm(u: Field, rho: float, dd: DyadicDecomposition) -> float:
    """W^{rho,inf} realization used by symbol seminorms.

    Integer rho uses sup norms of spectral derivatives; fractional rho uses
    the Zygmund norm (the two scales coincide for non-integer exponents).
    """
    from wavestrip.grid import spectral_gradient

    sup = float(np.max(np.abs(u.values)))
    if rho <= 0:
        return sup
    if float(rho).is_integer():
        total = sup
        layer = [u]
        for _ in range(int(rho)):
            nxt = []
            for f in layer:
                nxt.extend(spectral_gradient(f))
            total += max(float(np.max(np.abs(f.values))) for f in nxt)
            layer = nxt
        return total
    return max(sup, zygmund_norm(u, rho, dd))
