import math

import numpy as np
import pytest
from pydantic import ValidationError

import propagator
from errors import PropagationError
from lattice_model import DriveSchedule, LatticeParams
from propagator import (
    PropagationConfig,
    SplitOperatorStepper,
    absorber_profile,
    driven_potential,
    energy_expectation,
    gaussian_packet,
    measure_absorber_reflection,
    propagate,
    segment_plan,
    time_rescale,
)
from spectral_grid import default_grid, to_momentum
from stationary_states import overlap, qubit_splitting, superposition

OMEGA = 2 * math.pi * 4990.0


def drives_off(n=1):
    return DriveSchedule(a_pm=0.0, a_am=0.0, omega=OMEGA, n=n)


def test_time_rescale():
    params = LatticeParams.rb85()
    assert time_rescale(1.0 / params.omega_r, params) == pytest.approx(1.0)
    assert time_rescale(2 * math.pi / params.omega_r, params) == pytest.approx(2 * math.pi)
    ratio_params = LatticeParams(r=19.0, s=2.86, omega_r=OMEGA / 7.28)
    assert time_rescale(2 * math.pi / OMEGA, ratio_params) == pytest.approx(0.863, abs=1e-3)


def test_config_invariants():
    with pytest.raises(ValidationError):
        PropagationConfig(absorber_width=0.3)
    with pytest.raises(ValidationError):
        PropagationConfig(steps_per_period=32)
    sched = drives_off()
    assert PropagationConfig().time_step(sched) == pytest.approx(sched.period / 256)
    with pytest.raises(ValueError):
        PropagationConfig(dt=sched.period / 10).time_step(sched)


def test_segment_plan_breaks_at_switching_times():
    sched = DriveSchedule(a_pm=0.1, a_am=0.1, omega=OMEGA, n=2, delta_tau=30e-6)
    dt = sched.period / 64
    plan = segment_plan(sched, dt)
    edges = [start for start, _, _ in plan] + [plan[-1][1]]
    for instant in (0.0, sched.delta_tau, sched.t_m, sched.total_duration):
        assert min(abs(e - instant) for e in edges) < 1e-15
    for start, stop, steps in plan:
        assert (stop - start) / steps <= dt * (1 + 1e-9)


def test_absorber_profile_shape(small_grid):
    w = absorber_profile(small_grid, 0.1, 10.0)
    assert w.max() <= 10.0
    assert w[small_grid.n_points // 2] == 0.0
    assert w[0] > 9.0
    assert not np.any(absorber_profile(small_grid, 0.0, 10.0))


def test_ground_state_is_stationary(reference_basis, reference_params):
    cfg = PropagationConfig(steps_per_period=2048)
    psi0 = reference_basis.ground.wavefunction
    result = propagate(psi0, reference_params, drives_off(), cfg)
    assert abs(overlap(result.final_state, reference_basis.qubit_ground, reference_basis)) ** 2 \
        == pytest.approx(1.0, abs=1e-6)
    e0 = energy_expectation(psi0, reference_params)
    assert energy_expectation(result.final_state, reference_params) == pytest.approx(e0, rel=1e-6)


def test_excited_state_stays_out_of_the_absorber(reference_basis, reference_params):
    psi0 = reference_basis.excited.wavefunction
    result = propagate(psi0, reference_params, drives_off(n=2), PropagationConfig(steps_per_period=64))
    p_e = abs(overlap(result.final_state, reference_basis.qubit_excited, reference_basis)) ** 2
    assert p_e == pytest.approx(1.0, abs=1e-4)
    assert result.absorbed_norm < 1e-4


def test_superposition_phase_advance(reference_basis, reference_params):
    g, e = reference_basis.qubit_ground, reference_basis.qubit_excited
    psi0 = superposition(reference_basis, {g: 1 / math.sqrt(2), e: 1 / math.sqrt(2)})
    sched = drives_off()
    result = propagate(psi0, reference_params, sched, PropagationConfig(steps_per_period=4096))
    c0 = overlap(result.final_state, g, reference_basis)
    c1 = overlap(result.final_state, e, reference_basis)
    assert abs(c0) ** 2 == pytest.approx(0.5, abs=1e-4)
    tau = time_rescale(sched.t_m, reference_params)
    expected = (-qubit_splitting(reference_basis) * tau) % (2 * math.pi)
    advance = np.angle(c1 / c0) % (2 * math.pi)
    diff = (advance - expected + math.pi) % (2 * math.pi) - math.pi
    assert abs(diff) < 1e-3


def test_norm_conserved_without_absorber(reference_basis, reference_params):
    sched = DriveSchedule(a_pm=0.14, a_am=0.10, omega=OMEGA, n=4)
    cfg = PropagationConfig(steps_per_period=2500, absorber_width=0.0)
    result = propagate(reference_basis.ground.wavefunction, reference_params, sched, cfg)
    assert result.steps == 10000
    assert result.absorbed_norm == 0.0
    assert result.final_state.norm2 == pytest.approx(1.0, abs=1e-9)


def test_norm_bookkeeping_with_absorber(reference_basis, reference_params, reference_drive):
    result = propagate(reference_basis.ground.wavefunction, reference_params, reference_drive,
                       PropagationConfig(steps_per_period=64))
    assert result.final_state.norm2 + result.absorbed_norm == pytest.approx(1.0, abs=1e-6)


@pytest.mark.slow
def test_strang_second_order(reference_basis, reference_params):
    sched = DriveSchedule(a_pm=0.14, a_am=0.0, omega=OMEGA, n=2)
    populations = []
    for steps in (128, 256, 512):
        cfg = PropagationConfig(steps_per_period=steps, absorber_width=0.0)
        final = propagate(reference_basis.ground.wavefunction, reference_params, sched, cfg).final_state
        populations.append(abs(overlap(final, reference_basis.qubit_excited, reference_basis)) ** 2)
    ratio = (populations[0] - populations[1]) / (populations[1] - populations[2])
    assert ratio == pytest.approx(4.0, abs=0.5)


def test_time_reversal(reference_basis, reference_params, reference_drive, small_grid):
    v = driven_potential(reference_params, reference_drive, small_grid)
    stepper = SplitOperatorStepper(small_grid, reference_params.omega_r, v)
    psi0 = reference_basis.ground.wavefunction.amplitudes
    t1 = reference_drive.t_m
    forward = stepper.evolve(psi0, 0.0, t1, 512)
    assert np.max(np.abs(forward - psi0)) > 1e-3
    back = stepper.evolve(forward, t1, 0.0, 512)
    np.testing.assert_allclose(back, psi0, atol=1e-6)


def test_snapshots(reference_basis, reference_params):
    cfg = PropagationConfig(steps_per_period=64, record_stride=16)
    result = propagate(reference_basis.ground.wavefunction, reference_params, drives_off(n=2), cfg)
    assert result.steps == 128
    assert len(result.snapshots) == 8
    times = [t for t, _, _ in result.snapshots]
    assert times == sorted(times)
    assert times[-1] == pytest.approx(drives_off(n=2).t_m)


def test_propagate_preconditions(reference_basis, reference_params):
    psi = reference_basis.ground.wavefunction
    doubled = psi.model_copy(update={"amplitudes": 2 * psi.amplitudes})
    with pytest.raises(ValueError):
        propagate(doubled, reference_params, drives_off())
    with pytest.raises(ValueError):
        propagate(to_momentum(psi), reference_params, drives_off())


def test_non_finite_state_aborts(monkeypatch, reference_basis, reference_params):
    n = reference_basis.grid.n_points
    monkeypatch.setattr(propagator, "driven_potential", lambda params, sched, grid: (lambda t: np.full(n, np.nan)))
    with pytest.raises(PropagationError) as excinfo:
        propagate(reference_basis.ground.wavefunction, reference_params, drives_off(),
                  PropagationConfig(steps_per_period=64))
    assert excinfo.value.step == 1


def test_gaussian_packet_normalized(small_grid):
    packet = gaussian_packet(small_grid, 0.0, 2.0, 1.5)
    assert packet.normalized


@pytest.mark.slow
def test_absorber_reflection_below_threshold(reference_basis):
    grid = default_grid()
    reflected = measure_absorber_reflection(grid, PropagationConfig(), qubit_splitting(reference_basis))
    assert reflected < 1e-4
    # no layer, nothing absorbed
    untouched = measure_absorber_reflection(grid, PropagationConfig(absorber_width=0.0), 7.5)
    assert untouched == pytest.approx(1.0, abs=1e-9)
