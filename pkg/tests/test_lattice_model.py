import math

import numpy as np
import pytest
from pydantic import ValidationError

from lattice_model import (
    RB85_MASS_KG,
    DepthDistribution,
    DriveSchedule,
    LatticeParams,
    degrees_to_radians,
    eta,
    phase_from_offset,
    potential,
    recoil_frequency,
    scattering_time_ok,
    theta,
    theta_ddot,
)

OMEGA = 2 * math.pi * 4990.0


def sched(**overrides):
    values = dict(a_pm=0.14, a_am=0.10, omega=OMEGA, n=2, delta_tau=0.0)
    values.update(overrides)
    return DriveSchedule(**values)


def test_lattice_params_invariants():
    with pytest.raises(ValidationError):
        LatticeParams(r=0.0, s=1.0)
    with pytest.raises(ValidationError):
        LatticeParams(r=19.0, s=-0.1)
    with pytest.raises(ValidationError):
        LatticeParams(r=1.0, s=4.0)  # s ≥ πr leaves no wells


def test_from_physical_recoil_consistency():
    params = LatticeParams.from_physical(19.0, 0.930e-6, RB85_MASS_KG)
    expected = 2 * math.pi * 6.62607015e-34 / (8 * RB85_MASS_KG * (0.930e-6) ** 2)
    assert params.omega_r == pytest.approx(expected, rel=1e-9)
    assert params.omega_r == pytest.approx(recoil_frequency(0.930e-6, RB85_MASS_KG), rel=1e-12)
    # ⁸⁵Rb at 0.93 μm: recoil near 2π·685 Hz and tilt near 2.86
    assert params.omega_r / (2 * math.pi) == pytest.approx(685.0, rel=0.02)
    assert params.s == pytest.approx(2.86, rel=0.05)


def test_potential_minimum_at_origin():
    params = LatticeParams.rb85()
    x = np.linspace(-0.5, 0.5, 2001)
    v = potential(x, params)
    assert abs(x[np.argmin(v)]) < 1e-3
    # neighbouring minima sit at ±π, shifted by the tilt
    assert potential(np.array([math.pi]), params)[0] - potential(np.array([0.0]), params)[0] == pytest.approx(2.86)


def test_theta_examples():
    s = sched()
    assert theta(0.0, s) == 0.0
    assert theta(math.pi / OMEGA, s) == pytest.approx(0.28)
    assert theta(s.t_m, s) == pytest.approx(0.0, abs=1e-15)
    assert theta(s.t_m * 1.5, s) == 0.0


def test_theta_ddot_matches_finite_difference():
    s = sched()
    t = 0.3 / OMEGA
    h = 1e-4 / OMEGA
    numeric = (theta(t + h, s) - 2 * theta(t, s) + theta(t - h, s)) / h ** 2
    assert theta_ddot(t, s) == pytest.approx(numeric, rel=1e-6)
    assert theta_ddot(0.0, s) == pytest.approx(0.14 * OMEGA ** 2)
    assert theta_ddot(math.pi / (2 * OMEGA), s) == pytest.approx(0.0, abs=1e-6 * OMEGA ** 2)
    assert theta_ddot(2 * s.t_m, s) == 0.0


def test_smooth_turn_on_and_off():
    for n in (1, 2, 5):
        s = sched(n=n)
        h = 1e-6 / OMEGA
        turn_on = (theta(h, s) - theta(0.0, s)) / h
        turn_off = (theta(s.t_m, s) - theta(s.t_m - h, s)) / h
        assert abs(turn_on) < 1e-5 * OMEGA
        assert abs(turn_off) < 1e-5 * OMEGA


def test_eta_examples():
    delay = 20e-6
    s = sched(delta_tau=delay)
    assert eta(delay, s) == 0.0
    assert eta(delay + math.pi / (4 * OMEGA), s) == pytest.approx(0.10)
    assert eta(delay * 0.5, s) == 0.0
    assert eta(delay + s.t_m + 1e-9, s) == 0.0
    off = sched(a_am=0.0)
    assert all(eta(t, off) == 0.0 for t in np.linspace(0, off.t_m, 50))


def test_phase_from_offset():
    assert phase_from_offset(sched(delta_tau=0.0)) == 0.0
    assert phase_from_offset(sched(delta_tau=math.pi / (2 * OMEGA))) == pytest.approx(math.pi)
    assert phase_from_offset(sched(delta_tau=math.pi / OMEGA)) == pytest.approx(0.0, abs=1e-9)
    # periodic in Δτ with period π/ω
    base = phase_from_offset(sched(delta_tau=13e-6))
    shifted = phase_from_offset(sched(delta_tau=13e-6 + math.pi / OMEGA))
    assert shifted == pytest.approx(base, abs=1e-9)


def test_drive_schedule_invariants():
    with pytest.raises(ValidationError):
        sched(n=0)
    with pytest.raises(ValidationError):
        sched(a_am=1.0)
    with pytest.raises(ValidationError):
        sched(delta_tau=-1e-6)
    s = DriveSchedule.from_degrees(8.0, 0.1, OMEGA, 2)
    assert s.a_pm == pytest.approx(0.1396, abs=1e-4)
    assert degrees_to_radians(180.0) == pytest.approx(math.pi)
    assert s.t_m == pytest.approx(4 * math.pi / OMEGA)
    assert s.fringe_period == pytest.approx(100.2e-6, rel=1e-3)
    assert sched(delta_tau=30e-6).total_duration == pytest.approx(s.t_m + 30e-6)
    assert sched(a_am=0.0, delta_tau=30e-6).total_duration == pytest.approx(s.t_m)


def test_with_amplitudes_revalidates():
    s = sched()
    assert s.with_amplitudes(a_am=0.0).a_am == 0.0
    with pytest.raises(ValidationError):
        s.with_amplitudes(a_am=1.5)


def test_scattering_time_check():
    assert scattering_time_ok(sched(n=4))
    assert not scattering_time_ok(sched(n=4, omega=2 * math.pi * 10.0))


def test_depth_distribution_normalization():
    with pytest.raises(ValidationError):
        DepthDistribution(entries=[(19.0, 0.5), (20.0, 0.6)])
    with pytest.raises(ValidationError):
        DepthDistribution(entries=[(19.0, 1.5), (20.0, -0.5)])
    dist = DepthDistribution.from_weights([18.0, 19.0, 20.0], [1.0, 2.0, 1.0])
    assert math.fsum(dist.weights) == pytest.approx(1.0, abs=1e-12)
    assert dist.mean_depth == pytest.approx(19.0)


def test_truncated_gaussian_default():
    dist = DepthDistribution.truncated_gaussian()
    assert len(dist.entries) == 9
    assert min(dist.depths) == pytest.approx(10.0)
    assert max(dist.depths) == pytest.approx(28.0)
    assert dist.mean_depth == pytest.approx(19.0, abs=1e-9)
    # symmetric around the mean, peaked in the middle
    weights = dist.weights
    assert weights[4] == max(weights)
    assert weights[0] == pytest.approx(weights[-1])
    assert DepthDistribution.truncated_gaussian(nodes=1).entries == [(19.0, 1.0)]
