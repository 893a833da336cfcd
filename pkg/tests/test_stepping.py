import numpy as np
import pytest

from wavestrip.core import SurfaceState, hamiltonian
from wavestrip.dno import DNOParams
from wavestrip.grid import Field, field_from_function, make_grid, norm_l2
from wavestrip.stepping import (
    CFLError,
    StepConfig,
    StepError,
    integrate,
    parabolic_step,
    rk4_step,
)

GRID = make_grid([2 * np.pi], [64])
DNO = DNOParams(h=1.0, zpoints=24, tol=1e-12)


def rest_state():
    z = np.zeros(GRID.shape)
    return SurfaceState(eta=Field(GRID, z.copy()), psi=Field(GRID, z.copy()))


def linear_wave_state(eps=0.01, k=1):
    x = GRID.axes()[0]
    return SurfaceState(eta=Field(GRID, eps * np.cos(k * x)),
                        psi=Field(GRID, np.zeros(GRID.shape)))


def zero_rhs(state):
    z = Field(state.eta.grid, np.zeros(state.eta.grid.shape))
    return z, z, None


def test_config_validation():
    with pytest.raises(ValueError):
        StepConfig(dt=-0.1)
    with pytest.raises(ValueError):
        StepConfig(dt=0.1, epsilon=-1.0)
    with pytest.raises(ValueError):
        StepConfig(dt=0.1, scheme="leapfrog")


def test_cfl_guard():
    cfg = StepConfig(dt=10.0, dno=DNO)
    with pytest.raises(CFLError):
        rk4_step(linear_wave_state(), cfg)


def test_rk4_rest_is_fixed_point():
    cfg = StepConfig(dt=0.05, dno=DNO)
    out = rk4_step(rest_state(), cfg)
    assert norm_l2(out.eta) < 1e-14
    assert norm_l2(out.psi) < 1e-14
    assert out.t == pytest.approx(0.05)


def test_parabolic_heat_flow_exact_with_frozen_nonlinearity():
    eps, dt, k = 0.3, 0.05, 3
    x = GRID.axes()[0]
    state = SurfaceState(eta=Field(GRID, np.cos(k * x)),
                         psi=Field(GRID, np.sin(k * x)))
    cfg = StepConfig(dt=dt, epsilon=eps, scheme="parabolic-duhamel", dno=DNO)
    out = parabolic_step(state, cfg, rhs=zero_rhs)
    decay = np.exp(-eps * dt * k ** 2)
    assert np.max(np.abs(out.eta.values - decay * np.cos(k * x))) < 1e-13
    assert np.max(np.abs(out.psi.values - decay * np.sin(k * x))) < 1e-13


def test_parabolic_rest_is_fixed_point():
    cfg = StepConfig(dt=0.05, epsilon=0.01, scheme="parabolic-duhamel", dno=DNO)
    out = parabolic_step(rest_state(), cfg)
    assert norm_l2(out.eta) < 1e-13


def test_parabolic_nonconvergence_raises():
    cfg = StepConfig(dt=0.05, epsilon=0.01, scheme="parabolic-duhamel",
                     fixed_point_max_iter=1, fixed_point_tol=1e-14, dno=DNO)
    with pytest.raises(StepError):
        parabolic_step(linear_wave_state(eps=0.05), cfg)


def test_rk4_linear_wave_period_return():
    k, eps = 1, 1e-7  # linear regime: quadratic bound waves stay below 1e-6 relative
    omega = np.sqrt(np.tanh(1.0))
    period = 2 * np.pi / omega
    cfg = StepConfig(dt=period / 200, dno=DNO, monitor_taylor=False)
    state = linear_wave_state(eps, k)
    traj = integrate(state, period, cfg, keep_states=False)
    assert traj.status == "ok"
    final = traj.final()
    rel = norm_l2(final.eta - state.eta) / norm_l2(state.eta)
    assert rel < 1e-5


def test_rk4_self_convergence_order():
    state = SurfaceState(
        eta=field_from_function(GRID, lambda x: 0.03 * np.cos(x)),
        psi=field_from_function(GRID, lambda x: 0.03 * np.sin(x)))
    T = 0.8
    outs = {}
    for n in (10, 20, 40):
        cfg = StepConfig(dt=T / n, dno=DNO, monitor_taylor=False)
        traj = integrate(state, T, cfg, keep_states=False)
        outs[n] = traj.final()
    e1 = norm_l2(outs[10].eta - outs[40].eta) + norm_l2(outs[10].psi - outs[40].psi)
    e2 = norm_l2(outs[20].eta - outs[40].eta) + norm_l2(outs[20].psi - outs[40].psi)
    ratio = e1 / e2
    assert 16 - 6 < ratio < 16 + 8  # fourth order, loose band


def test_time_reversal_via_psi_negation():
    state = SurfaceState(
        eta=field_from_function(GRID, lambda x: 0.02 * np.cos(x)),
        psi=field_from_function(GRID, lambda x: 0.02 * np.sin(2 * x)))
    T, n = 0.6, 60
    cfg = StepConfig(dt=T / n, dno=DNO, monitor_taylor=False)
    fwd = integrate(state, T, cfg, keep_states=False).final()
    mirrored = SurfaceState(eta=fwd.eta, psi=-1.0 * fwd.psi, t=0.0,
                            g=fwd.g, h=fwd.h)
    back = integrate(mirrored, T, cfg, keep_states=False).final()
    err = norm_l2(back.eta - state.eta) + norm_l2(back.psi + state.psi)
    # bounded by a small multiple of the forward discretization error
    cfg2 = StepConfig(dt=T / (2 * n), dno=DNO, monitor_taylor=False)
    ref = integrate(state, T, cfg2, keep_states=False).final()
    fwd_err = norm_l2(fwd.eta - ref.eta) + norm_l2(fwd.psi - ref.psi)
    assert err <= 10 * max(fwd_err, 1e-12)


def test_parabolic_dissipates_energy():
    state = SurfaceState(
        eta=field_from_function(GRID, lambda x: 0.02 * np.cos(x)),
        psi=field_from_function(GRID, lambda x: 0.02 * np.sin(x)))
    cfg = StepConfig(dt=0.02, epsilon=0.05, scheme="parabolic-duhamel", dno=DNO,
                     monitor_taylor=False)
    traj = integrate(state, 0.4, cfg, keep_states=False)
    energies = [r.hamiltonian for r in traj.records]
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-8 * cfg.dt + 1e-14)


def test_integrate_rest_trajectory_constant():
    cfg = StepConfig(dt=0.1, dno=DNO)
    traj = integrate(rest_state(), 1.0, cfg)
    assert traj.status == "ok"
    assert len(traj.records) == 11
    assert all(abs(r.hamiltonian) < 1e-14 for r in traj.records)
    assert all(abs(r.mass) < 1e-14 for r in traj.records)
    taylor_vals = [r.min_taylor for r in traj.records if np.isfinite(r.min_taylor)]
    assert taylor_vals and all(abs(v - 1.0) < 1e-8 for v in taylor_vals)


def test_integrate_depth_monitor_aborts_immediately():
    x = GRID.axes()[0]
    state = SurfaceState(eta=Field(GRID, -0.99 * np.ones(GRID.shape) + 0.001 * np.cos(x)),
                         psi=Field(GRID, np.zeros(GRID.shape)))
    cfg = StepConfig(dt=0.01, dno=DNO)
    traj = integrate(state, 0.1, cfg)
    assert traj.status.startswith("aborted: depth monitor")
    assert len(traj.states) == 1


def test_integrate_sink_receives_records():
    seen = []
    cfg = StepConfig(dt=0.1, dno=DNO, monitor_taylor=False)
    integrate(rest_state(), 0.3, cfg, sink=seen.append)
    assert len(seen) == 4
    assert seen[0].t == 0.0


def test_vanishing_viscosity_rate():
    state = SurfaceState(
        eta=field_from_function(GRID, lambda x: 0.02 * np.cos(x)),
        psi=field_from_function(GRID, lambda x: 0.02 * np.sin(x)))
    T = 0.4
    ref = integrate(state, T, StepConfig(dt=0.02, dno=DNO, monitor_taylor=False),
                    keep_states=False).final()
    dists, epses = [], [1e-2, 5e-3, 2.5e-3]
    for eps in epses:
        cfg = StepConfig(dt=0.02, epsilon=eps, scheme="parabolic-duhamel",
                         dno=DNO, monitor_taylor=False)
        out = integrate(state, T, cfg, keep_states=False).final()
        dists.append(norm_l2(out.eta - ref.eta) + norm_l2(out.psi - ref.psi))
    slope = np.polyfit(np.log(epses), np.log(dists), 1)[0]
    assert 0.8 <= slope <= 1.2


def test_ul_norm_diagnostics_recorded():
    cfg = StepConfig(dt=0.05, dno=DNO, ul_norm_s=(1.0,), monitor_taylor=False)
    traj = integrate(linear_wave_state(0.01), 0.1, cfg)
    assert "eta_H1.0" in traj.records[0].ul_norms
    assert traj.records[0].ul_norms["eta_H1.0"] > 0
