"""Periodic tensor grids, FFT plumbing, and Fourier multipliers.

Everything else in the package is built on the two types defined here:
``PeriodicGrid`` (a d-dimensional periodic sample lattice, d = 1 or 2) and
``Field`` (scalar samples on such a grid).  All derivatives are spectral and
quadratic nonlinearities are expected to go through ``dealiased_product``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


class InvalidGridError(ValueError):
    """Raised when grid axes violate the even / minimum-size constraints."""


class MultiplierDomainError(ValueError):
    """Raised when a Fourier multiplier is not finite on the lattice."""


def _fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("WAVESTRIP_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on a d-dimensional torus of per-axis period L_i.

    Nodes along axis i sit at x = L_i * n / N_i, n = 0..N_i-1, and the
    wavenumber lattice is k = 2*pi*n/L_i in FFT ordering.
    """

    lengths: tuple[float, ...]
    points: tuple[int, ...]
    wavenumbers: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.lengths) != len(self.points):
            raise InvalidGridError("lengths and points must have equal length")
        if len(self.points) not in (1, 2):
            raise InvalidGridError("only 1- and 2-dimensional grids are supported")
        for L, n in zip(self.lengths, self.points):
            if L <= 0:
                raise InvalidGridError(f"period must be positive, got {L}")
            if n < 8 or n % 2 != 0:
                raise InvalidGridError(f"point count must be even and >= 8, got {n}")
        ks = tuple(
            2.0 * np.pi * sfft.fftfreq(n, d=1.0 / n) / L
            for L, n in zip(self.lengths, self.points)
        )
        object.__setattr__(self, "wavenumbers", ks)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([L / n for L, n in zip(self.lengths, self.points)]))

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            L * np.arange(n) / n for L, n in zip(self.lengths, self.points)
        )

    def meshes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def wavenumber_meshes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.wavenumbers, indexing="ij"))

    def abs_wavenumber(self) -> np.ndarray:
        km = self.wavenumber_meshes()
        return np.sqrt(sum(k ** 2 for k in km))

    def resolved_kmax(self) -> float:
        """Largest |k| on the lattice (corner of the Nyquist box)."""
        return float(np.sqrt(sum((np.pi * n / L) ** 2 for L, n in zip(self.lengths, self.points))))

    def nyquist_mask(self) -> np.ndarray:
        """Boolean mask of modes whose index hits a Nyquist frequency."""
        mask = np.zeros(self.shape, dtype=bool)
        for ax, n in enumerate(self.points):
            sel = [slice(None)] * self.dim
            sel[ax] = n // 2
            mask[tuple(sel)] = True
        return mask


def make_grid(lengths, points) -> PeriodicGrid:
    """Build a PeriodicGrid from per-axis periods and sample counts."""
    return PeriodicGrid(tuple(float(L) for L in lengths), tuple(int(n) for n in points))


@dataclass
class Field:
    """Scalar samples on a PeriodicGrid.  Thin wrapper with arithmetic."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise InvalidGridError(
                f"sample shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    # arithmetic keeps call sites in the time steppers readable
    def __add__(self, other):
        return Field(self.grid, self.values + _vals(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - _vals(other))

    def __rsub__(self, other):
        return Field(self.grid, _vals(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / _vals(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    @property
    def real(self) -> "Field":
        return Field(self.grid, np.real(self.values))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def spectrum_is_conjugate_symmetric(self, tol: float = 1e-10) -> bool:
        """Debug check: real fields must have Hermitian spectra."""
        uh = fft(self)
        return bool(np.max(np.abs(uh - _hermitian_mirror(uh))) <= tol * (1 + np.max(np.abs(uh))))


def _vals(x):
    return x.values if isinstance(x, Field) else x


def constant_field(grid: PeriodicGrid, value: float = 0.0) -> Field:
    return Field(grid, np.full(grid.shape, value, dtype=float))


def field_from_function(grid: PeriodicGrid, fn) -> Field:
    """Sample fn(*coordinate meshes) on the grid."""
    return Field(grid, np.asarray(fn(*grid.meshes()), dtype=float))


def fft(u: Field) -> np.ndarray:
    return sfft.fftn(u.values, workers=_fft_workers())


def ifft(grid: PeriodicGrid, spectrum: np.ndarray, real: bool = False) -> Field:
    vals = sfft.ifftn(spectrum, workers=_fft_workers())
    if real:
        vals = vals.real
    return Field(grid, vals)


def _hermitian_mirror(spec: np.ndarray) -> np.ndarray:
    idx = np.ix_(*[(-np.arange(n)) % n for n in spec.shape])
    return np.conj(spec[idx])


def _multiplier_array(grid: PeriodicGrid, m) -> np.ndarray:
    with np.errstate(all="ignore"):  # finiteness is checked below
        arr = np.asarray(m(*grid.wavenumber_meshes()))
    arr = np.broadcast_to(arr, grid.shape)
    if not np.all(np.isfinite(arr)):
        raise MultiplierDomainError(
            "multiplier is not finite on the lattice; supply its value at xi = 0 "
            "explicitly for homogeneous symbols"
        )
    return arr


def fourier_multiplier(u: Field, m) -> Field:
    """Apply the Fourier multiplier m(xi) mode by mode.

    ``m`` is called with one wavenumber mesh per axis (so ``m(k)`` in 1-D,
    ``m(kx, ky)`` in 2-D) and must return finite values on the whole lattice.
    Real input with a Hermitian multiplier returns a real field.
    """
    arr = _multiplier_array(u.grid, m)
    out = arr * fft(u)
    keep_real = u.is_real and np.allclose(arr, _hermitian_mirror(arr), atol=1e-13, rtol=1e-13)
    return ifft(u.grid, out, real=keep_real)


def bessel_potential(u: Field, s: float) -> Field:
    """<D>^s u with <xi> = sqrt(1 + |xi|^2)."""
    k2 = u.grid.abs_wavenumber() ** 2
    return fourier_multiplier(u, lambda *km: (1.0 + k2) ** (s / 2.0))


def heat_propagator(u: Field, t: float) -> Field:
    """exp(t * Laplacian) as a multiplier; t >= 0."""
    k2 = u.grid.abs_wavenumber() ** 2
    return fourier_multiplier(u, lambda *km: np.exp(-t * k2))


def spectral_gradient(u: Field) -> tuple[Field, ...]:
    """Exact spectral gradient; the Nyquist mode of each derivative is zeroed."""
    uh = fft(u)
    grid = u.grid
    out = []
    for ax, n in enumerate(grid.points):
        k = grid.wavenumbers[ax].copy()
        k[n // 2] = 0.0  # odd-symmetry convention at Nyquist
        shape = [1] * grid.dim
        shape[ax] = n
        dh = (1j * k.reshape(shape)) * uh
        out.append(ifft(grid, dh, real=u.is_real))
    return tuple(out)


def divergence(vec: tuple[Field, ...]) -> Field:
    parts = [spectral_gradient(v)[ax] for ax, v in enumerate(vec)]
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def laplacian(u: Field) -> Field:
    k2 = u.grid.abs_wavenumber() ** 2
    return fourier_multiplier(u, lambda *km: -k2)


def dealias_mask(grid: PeriodicGrid) -> np.ndarray:
    """2/3-rule mask: True on modes kept after dealiasing."""
    mask = np.ones(grid.shape, dtype=bool)
    for ax, n in enumerate(grid.points):
        idx = np.abs(sfft.fftfreq(n, d=1.0 / n))
        sel_shape = [1] * grid.dim
        sel_shape[ax] = n
        mask &= (idx <= n / 3.0).reshape(sel_shape)
    return mask


def dealias(u: Field) -> Field:
    spec = fft(u)
    spec[~dealias_mask(u.grid)] = 0.0
    return ifft(u.grid, spec, real=u.is_real)


def dealiased_product(a: Field, b: Field) -> Field:
    """Pointwise product followed by the 2/3-rule truncation."""
    return dealias(Field(a.grid, a.values * _vals(b)))


def inner_l2(u: Field, v: Field) -> float | complex:
    """Discrete L^2 pairing with the cell volume weight."""
    val = np.sum(np.conj(u.values) * _vals(v)) * u.grid.cell_volume
    if u.is_real and (not isinstance(v, Field) or v.is_real):
        return float(np.real(val))
    return complex(val)


def norm_l2(u: Field) -> float:
    return float(np.sqrt(np.sum(np.abs(u.values) ** 2) * u.grid.cell_volume))


def sobolev_norm(u: Field, s: float) -> float:
    """Plain periodic H^s norm via the <xi>^s weight (global, not windowed)."""
    uh = fft(u)
    w = (1.0 + u.grid.abs_wavenumber() ** 2) ** (s / 2.0)
    scale = u.grid.cell_volume / u.grid.size
    return float(np.sqrt(np.sum((w * np.abs(uh)) ** 2) * scale))


def shift_field(u: Field, cells: tuple[int, ...]) -> Field:
    """Translate by an integer number of grid cells (exact)."""
    return Field(u.grid, np.roll(u.values, cells, axis=tuple(range(u.grid.dim))))
