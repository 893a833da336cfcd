"""Boundary straightening, the strip elliptic solver, and the DNO G(eta).

The fluid strip below the surface is flattened by the smoothed diffeomorphism

    rho(x, z) = (1+z) E(delta z) eta - z (E(-delta (1+z)) eta - h),

with E(t) the smoothing semigroup exp(t(<D>-1)); constants are exact fixed
points of E, so a flat or constant surface straightens to rho = eta + z h.
The Laplace problem becomes the variable-coefficient strip problem

    (d_zz + alpha Lap_x + beta . grad_x d_z - gamma d_z) Phi = F,
    Phi(z=0) = psi,  (g1 d_z - g2 . grad_x) Phi(z=-1) = bottom flux (0),

discretized by Fourier collocation in x and Chebyshev-Lobatto collocation in
z in [-1, 0], solved by GMRES preconditioned with the per-x-mode flat
operator (which is exact when the surface is flat, so that case converges in
one iteration).  The bottom row is the conormal (physical no-flux) operator
rather than the bare d_z: the straightened bottom z = -1 is the curved
physical line y = eta - h, and only the conormal condition keeps the
resulting Dirichlet-Neumann operator self-adjoint and positive.  The surface
trace G(eta) psi = (g1 d_z - g2 . grad_x) Phi at z = 0 uses the spectral
one-sided Chebyshev derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from wavestrip.grid import (
    Field,
    PeriodicGrid,
    dealiased_product,
    fft,
    ifft,
    spectral_gradient,
)
from wavestrip.paradiff import CutoffPair, ParaSymbol, paradiff_apply


class StraighteningError(RuntimeError):
    """d_z rho dropped below h/2; carries the offending minimum."""

    def __init__(self, min_dz_rho: float, threshold: float):
        self.min_dz_rho = min_dz_rho
        self.threshold = threshold
        super().__init__(
            f"straightening failed: min d_z rho = {min_dz_rho:.6g} < {threshold:.6g}"
        )


class EllipticSolveError(RuntimeError):
    """Krylov iteration did not reach the requested residual."""

    def __init__(self, residual: float, history: list[float]):
        self.residual = residual
        self.history = history
        super().__init__(f"elliptic solve stalled at relative residual {residual:.3e}")


@dataclass(frozen=True)
class DNOParams:
    """Knobs of the Dirichlet-Neumann evaluation."""

    h: float = 1.0
    delta: float = 0.1
    zpoints: int = 48
    tol: float = 1e-12
    maxiter: int = 400
    max_delta_halvings: int = 6


def chebyshev_lobatto(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (on [-1, 0], first node 0) and differentiation matrix d/dz."""
    m = n - 1
    t = np.cos(np.pi * np.arange(n) / m)  # 1 .. -1
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    T = np.tile(t, (n, 1)).T
    dT = T - T.T + np.eye(n)
    D = np.outer(c, 1.0 / c) / dT
    D -= np.diag(D.sum(axis=1))
    z = (t - 1.0) / 2.0  # 0 .. -1
    return z, 2.0 * D  # chain rule dz = dt/2


def _semigroup_table(grid: PeriodicGrid, z: np.ndarray, delta: float, power: int,
                     forward: bool) -> np.ndarray:
    """Multiplier table m(z_i, k) = (<k>-1)^power * exp(s(z_i)(<k>-1)).

    forward=True gives s = delta*z; forward=False gives s = -delta*(1+z).
    """
    kb = np.sqrt(1.0 + grid.abs_wavenumber() ** 2) - 1.0
    s = delta * z if forward else -delta * (1.0 + z)
    return kb[None] ** power * np.exp(s.reshape((-1,) + (1,) * grid.dim) * kb[None])


@dataclass
class StraightenedDomain:
    """rho(x, z), its derivatives, and the elliptic coefficients on the strip."""

    grid: PeriodicGrid
    h: float
    delta: float
    z: np.ndarray                      # Chebyshev nodes, z[0] = 0, z[-1] = -1
    Dz: np.ndarray                     # differentiation matrix in z
    rho: np.ndarray                    # (Nz, *grid.shape)
    drho_z: np.ndarray
    drho_x: tuple[np.ndarray, ...]
    d2rho_z: np.ndarray
    alpha: np.ndarray
    beta: tuple[np.ndarray, ...]
    gamma: np.ndarray
    _solver: "StripSolver | None" = field(default=None, repr=False)

    @property
    def nz(self) -> int:
        return len(self.z)

    def solver(self, tol: float = 1e-12, maxiter: int = 400) -> "StripSolver":
        if self._solver is None or self._solver.tol != tol:
            self._solver = StripSolver(self, tol=tol, maxiter=maxiter)
        return self._solver

    def dz_apply(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.Dz, values, axes=(1, 0))

    def grad_x(self, values: np.ndarray) -> list[np.ndarray]:
        vh = sfft.fftn(values, axes=self._x_axes)
        out = []
        for ax in range(self.grid.dim):
            k = self.grid.wavenumbers[ax].copy()
            k[self.grid.points[ax] // 2] = 0.0
            shape = [1] * (self.grid.dim + 1)
            shape[ax + 1] = self.grid.points[ax]
            der = sfft.ifftn(1j * k.reshape(shape) * vh, axes=self._x_axes)
            out.append(der.real if not np.iscomplexobj(values) else der)
        return out

    def lap_x(self, values: np.ndarray) -> np.ndarray:
        vh = sfft.fftn(values, axes=self._x_axes)
        k2 = self.grid.abs_wavenumber() ** 2
        out = sfft.ifftn(-k2[None] * vh, axes=self._x_axes)
        return out.real if not np.iscomplexobj(values) else out

    @property
    def _x_axes(self) -> tuple[int, ...]:
        return tuple(range(1, self.grid.dim + 1))

    def lambda1(self, values: np.ndarray) -> np.ndarray:
        """Chain-rule vertical derivative (1/d_z rho) d_z."""
        return self.dz_apply(values) / self.drho_z

    def lambda2(self, values: np.ndarray) -> list[np.ndarray]:
        """Chain-rule horizontal gradient grad_x - (grad_x rho / d_z rho) d_z."""
        vz = self.dz_apply(values) / self.drho_z
        return [g - rx * vz for g, rx in zip(self.grad_x(values), self.drho_x)]

    def flux_coefficients(self, row: int) -> tuple[np.ndarray, list[np.ndarray]]:
        """(g1, g2) of the conormal operator g1 d_z - g2 . grad_x at a z row."""
        grad_rho = [g[row] for g in self.drho_x]
        g1 = (1.0 + sum(g ** 2 for g in grad_rho)) / self.drho_z[row]
        return g1, grad_rho

    def conormal_flux(self, values: np.ndarray, row: int) -> np.ndarray:
        """(Lambda_1 - grad rho . Lambda_2) values at a z row (no dealiasing)."""
        g1, g2 = self.flux_coefficients(row)
        uz_row = self.dz_apply(values)[row]
        grads = self.grad_x(values[row][None])
        out = g1 * uz_row
        for g2c, gc in zip(g2, grads):
            out = out - g2c * gc[0]
        return out


def straighten(eta: Field, h: float, delta: float = 0.1,
               zpoints: int = 48) -> StraightenedDomain:
    """Build the straightening diffeomorphism and elliptic coefficients.

    Raises StraighteningError when min d_z rho < h/2 anywhere; the caller is
    expected to halve delta and retry (see straighten_adaptive).
    """
    if h <= 0:
        raise ValueError("strip depth h must be positive")
    grid = eta.grid
    z, Dz = chebyshev_lobatto(zpoints)
    eta_hat = fft(eta)

    def smooth(power: int, forward: bool) -> np.ndarray:
        table = _semigroup_table(grid, z, delta, power, forward)
        out = sfft.ifftn(table * eta_hat[None], axes=tuple(range(1, grid.dim + 1)))
        return out.real

    A0, A1, A2 = smooth(0, True), smooth(1, True), smooth(2, True)
    B0, B1, B2 = smooth(0, False), smooth(1, False), smooth(2, False)
    zc = z.reshape((-1,) + (1,) * grid.dim)
    rho = (1.0 + zc) * A0 - zc * (B0 - h)
    drho_z = A0 + (1.0 + zc) * delta * A1 - B0 + h + zc * delta * B1
    d2rho_z = 2.0 * delta * A1 + (1.0 + zc) * delta ** 2 * A2 \
        + 2.0 * delta * B1 - zc * delta ** 2 * B2

    min_dz = float(np.min(drho_z))
    if min_dz < h / 2.0:
        raise StraighteningError(min_dz, h / 2.0)

    dom = StraightenedDomain(
        grid=grid, h=h, delta=delta, z=z, Dz=Dz, rho=rho, drho_z=drho_z,
        drho_x=(), d2rho_z=d2rho_z, alpha=np.empty(0), beta=(), gamma=np.empty(0),
    )
    dom.drho_x = tuple(dom.grad_x(rho))
    grad2 = sum(g ** 2 for g in dom.drho_x)
    dom.alpha = drho_z ** 2 / (1.0 + grad2)
    dom.beta = tuple(-2.0 * drho_z * g / (1.0 + grad2) for g in dom.drho_x)
    lap_rho = dom.lap_x(rho)
    grad_drho_z = dom.grad_x(drho_z)
    dom.gamma = (d2rho_z + dom.alpha * lap_rho
                 + sum(b * g for b, g in zip(dom.beta, grad_drho_z))) / drho_z
    return dom


def straighten_adaptive(eta: Field, params: DNOParams) -> StraightenedDomain:
    """straighten with the delta-halving retry policy."""
    delta = params.delta
    last: StraighteningError | None = None
    for _ in range(params.max_delta_halvings + 1):
        try:
            return straighten(eta, params.h, delta, params.zpoints)
        except StraighteningError as exc:
            last = exc
            delta *= 0.5
    raise last


@dataclass
class StraightenedField:
    """Samples on the (x, z) tensor grid of a straightened domain."""

    dom: StraightenedDomain
    values: np.ndarray  # (Nz, *grid.shape); row 0 is the surface z = 0

    def surface(self) -> Field:
        return Field(self.dom.grid, self.values[0])

    def bottom(self) -> Field:
        return Field(self.dom.grid, self.values[-1])


class StripSolver:
    """Preconditioned Krylov solver for the straightened strip operator.

    The preconditioner solves, per x-Fourier mode, the z-line problem with
    x-averaged coefficients; the variable-coefficient remainder is absorbed
    by the outer GMRES iteration.
    """

    def __init__(self, dom: StraightenedDomain, tol: float = 1e-12,
                 maxiter: int = 400):
        self.dom = dom
        self.tol = tol
        self.maxiter = maxiter
        grid = dom.grid
        nz = dom.nz
        self.Dz2 = dom.Dz @ dom.Dz
        x_axes = tuple(range(grid.dim))
        self.alpha_bar = dom.alpha.mean(axis=tuple(a + 1 for a in x_axes))
        self.gamma_bar = dom.gamma.mean(axis=tuple(a + 1 for a in x_axes))
        self.g1_bottom, self.g2_bottom = dom.flux_coefficients(-1)
        k2 = grid.abs_wavenumber() ** 2
        vals, inverse = np.unique(np.round(k2.ravel(), 9), return_inverse=True)
        eye = np.eye(nz)
        mats = np.zeros((len(vals), nz, nz))
        mats[:, 0] = eye[0]
        mats[:, 1:-1] = (self.Dz2[None, 1:-1]
                         - vals[:, None, None] * self.alpha_bar[None, 1:-1, None] * eye[None, 1:-1]
                         - self.gamma_bar[None, 1:-1, None] * dom.Dz[None, 1:-1])
        mats[:, -1] = float(np.mean(self.g1_bottom)) * dom.Dz[-1]
        # one inverse per distinct |k|^2, gathered per mode for a batched apply
        self._mode_inverses = np.ascontiguousarray(np.linalg.inv(mats)[inverse])
        self.last_iterations = 0

    # -- discrete operator pieces ------------------------------------------
    def apply_interior_operator(self, u_full: np.ndarray) -> np.ndarray:
        dom = self.dom
        uz = dom.dz_apply(u_full)
        uzz = np.tensordot(self.Dz2, u_full, axes=(1, 0))
        lap = dom.lap_x(u_full)
        graduz = dom.grad_x(uz)
        out = uzz + dom.alpha * lap - dom.gamma * uz
        for b, g in zip(dom.beta, graduz):
            out = out + b * g

        return out

    def _bottom_row(self, u_full: np.ndarray, uz: np.ndarray) -> np.ndarray:
        grads = self.dom.grad_x(u_full[-1][None])
        out = self.g1_bottom * uz[-1]
        for g2c, gc in zip(self.g2_bottom, grads):
            out = out - g2c * gc[0]
        return out

    def _matvec(self, vec: np.ndarray) -> np.ndarray:
        dom = self.dom
        nz, shape = dom.nz, dom.grid.shape
        u_full = np.zeros((nz,) + shape)
        u_full[1:] = vec.reshape((nz - 1,) + shape)
        res = self.apply_interior_operator(u_full)
        out = np.empty((nz - 1,) + shape)
        out[:-1] = res[1:-1]
        out[-1] = self._bottom_row(u_full, dom.dz_apply(u_full))
        return out.ravel()

    def _precond(self, vec: np.ndarray) -> np.ndarray:
        dom = self.dom
        nz, shape = dom.nz, dom.grid.shape
        x_axes = tuple(range(1, dom.grid.dim + 1))
        r = vec.reshape((nz - 1,) + shape)
        rh = sfft.fftn(r, axes=x_axes).reshape(nz - 1, -1)
        rhs = np.zeros((nz, rh.shape[1]), dtype=complex)
        rhs[1:] = rh
        sol = np.matmul(self._mode_inverses, rhs.T[:, :, None])[:, :, 0].T
        out = sfft.ifftn(sol[1:].reshape((nz - 1,) + shape), axes=x_axes).real
        return out.ravel()

    def solve(self, surface: np.ndarray, source: np.ndarray | None = None,
              bottom_flux: np.ndarray | None = None) -> np.ndarray:
        """Solve the strip problem; complex data is split into parts."""
        if any(np.iscomplexobj(a) for a in (surface, source, bottom_flux)
               if a is not None):
            re = self.solve(np.real(surface),
                            None if source is None else np.real(source),
                            None if bottom_flux is None else np.real(bottom_flux))
            im = self.solve(np.imag(surface),
                            None if source is None else np.imag(source),
                            None if bottom_flux is None else np.imag(bottom_flux))
            return re + 1j * im

        dom = self.dom
        nz, shape = dom.nz, dom.grid.shape
        lift = np.broadcast_to(surface, (nz,) + shape)
        l_lift = dom.alpha * dom.lap_x(np.ascontiguousarray(lift))
        b = np.zeros((nz - 1,) + shape)
        b[:-1] = -l_lift[1:-1]
        if source is not None:
            b[:-1] += source[1:-1]
        # the z-constant lift has conormal flux -g2 . grad psi at the bottom
        grad_surf = dom.grad_x(np.asarray(surface)[None])
        for g2c, gc in zip(self.g2_bottom, grad_surf):
            b[-1] += g2c * gc[0]
        if bottom_flux is not None:
            b[-1] += bottom_flux
        bvec = b.ravel()
        bnorm = float(np.linalg.norm(bvec))
        if bnorm == 0.0:
            return np.ascontiguousarray(lift)

        n = bvec.size
        A = LinearOperator((n, n), matvec=self._matvec)
        M = LinearOperator((n, n), matvec=self._precond)
        history: list[float] = []
        restart = min(80, self.maxiter)
        cycles = max(1, int(np.ceil(self.maxiter / restart)))
        sol, _ = gmres(A, bvec, M=M, rtol=self.tol, atol=0.0,
                       restart=restart, maxiter=cycles,
                       callback=lambda pr: history.append(float(pr)),
                       callback_type="pr_norm")
        # judge convergence on the true residual; the preconditioned criterion
        # can stall at the rounding floor slightly above a very tight rtol
        residual = float(np.linalg.norm(self._matvec(sol) - bvec)) / bnorm
        self.last_iterations = len(history)
        if residual > max(50.0 * self.tol, 1e-13):
            raise EllipticSolveError(residual, history)
        u_full = np.zeros((nz,) + shape)
        u_full[1:] = sol.reshape((nz - 1,) + shape)
        return u_full + lift


def solve_laplace(dom: StraightenedDomain, psi: Field,
                  source: StraightenedField | None = None,
                  bottom_flux: Field | None = None,
                  tol: float = 1e-12, maxiter: int = 400) -> StraightenedField:
    """Solve the straightened strip problem with surface trace psi.

    ``bottom_flux`` prescribes the conormal data (g1 d_z - g2 . grad_x) at
    z = -1 (physical no-flux through the bottom when zero).
    """
    solver = dom.solver(tol=tol, maxiter=maxiter)
    vals = solver.solve(
        psi.values,
        None if source is None else source.values,
        None if bottom_flux is None else bottom_flux.values,
    )
    return StraightenedField(dom, vals)


@dataclass
class DNOSolution:
    """A DNO evaluation with enough retained state to reuse the solve."""

    dom: StraightenedDomain
    phi: StraightenedField
    gpsi: Field


def surface_flux(dom: StraightenedDomain, phi: StraightenedField) -> Field:
    """(g1 d_z - g2 . grad_x) phi at z = 0, g1 = (1+|grad rho|^2)/d_z rho."""
    grid = dom.grid
    phiz0 = dom.dz_apply(phi.values)[0]
    grad0 = [g[0] for g in dom.grad_x(phi.values)]
    grad_rho0 = [g[0] for g in dom.drho_x]
    g1 = (1.0 + sum(g ** 2 for g in grad_rho0)) / dom.drho_z[0]
    out = dealiased_product(Field(grid, g1), Field(grid, phiz0))
    for g2c, gc in zip(grad_rho0, grad0):
        out = out - dealiased_product(Field(grid, g2c), Field(grid, gc))
    return out


def dno_solve(eta: Field, psi: Field, params: DNOParams = DNOParams(),
              dom: StraightenedDomain | None = None) -> DNOSolution:
    """Evaluate G(eta) psi, keeping the domain and potential for reuse."""
    if dom is None:
        dom = straighten_adaptive(eta, params)
    phi = solve_laplace(dom, psi, tol=params.tol, maxiter=params.maxiter)
    return DNOSolution(dom=dom, phi=phi, gpsi=surface_flux(dom, phi))


def dirichlet_neumann(eta: Field, psi: Field,
                      params: DNOParams = DNOParams()) -> Field:
    """G(eta) psi."""
    return dno_solve(eta, psi, params).gpsi


def dno_principal_symbol(eta: Field) -> ParaSymbol:
    """lambda(x, xi) = sqrt((1+|grad eta|^2)|xi|^2 - (grad eta . xi)^2)."""
    grads = [g.values for g in spectral_gradient(eta)]
    grad2 = sum(g ** 2 for g in grads)

    def eval_fn(x_meshes, xi):
        dotted = sum(g * xi_c for g, xi_c in zip(grads, xi))
        xi2 = float(np.sum(xi ** 2))
        return np.sqrt((1.0 + grad2) * xi2 - dotted ** 2)

    return ParaSymbol(order=1.0, regularity=0.5, eval=eval_fn, homogeneous=True)


def dno_remainder(eta: Field, psi: Field, cut: CutoffPair | None = None,
                  params: DNOParams = DNOParams()) -> Field:
    """R(eta) psi = G(eta) psi - T_lambda psi."""
    if cut is None:
        cut = CutoffPair()
    g = dirichlet_neumann(eta, psi, params)
    t = paradiff_apply(dno_principal_symbol(eta), psi, cut)
    if psi.is_real:
        t = t.real
    return g - t
