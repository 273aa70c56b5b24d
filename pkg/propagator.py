"""
Propagator - Strang Split-Operator Integration of the Driven Hamiltonian

Integrates i dψ/dτ = H̃_U(t)ψ with

    H̃_U(t) = p̃² + r sin²(x̃+x₀) + (s/π)x̃ - (θ̈(t)/(2ω_r²))x̃ + rη(t)sin²(x̃+x₀)

in dimensionless time τ = ω_r·t. Each step applies a potential half-step
evaluated at the step midpoint, the full kinetic step in momentum space and a
second potential half-step, followed by the absorbing mask at the domain edges.
"""

import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import fft

import console
from errors import PropagationError
from lattice_model import DriveSchedule, LatticeParams, eta, lattice_profile, potential, theta_ddot
from spectral_grid import DEFAULT_ABSORBER_WIDTH, SpectralGrid, WaveState

MIN_STEPS_PER_PERIOD = 64
NAN_CHECK_INTERVAL = 64


class PropagationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: Optional[float] = Field(None, gt=0, description="Time step, s; default is period/steps_per_period")
    steps_per_period: int = Field(256, ge=MIN_STEPS_PER_PERIOD, description="Default resolution of one drive period")
    absorber_width: float = Field(DEFAULT_ABSORBER_WIDTH, ge=0, le=0.2, description="Absorbing layer per edge, fraction of the domain")
    absorber_strength: float = Field(10.0, ge=0, description="Peak imaginary potential, ħω_r")
    record_stride: int = Field(0, ge=0, description="Steps between snapshots, 0 disables")

    def time_step(self, sched: DriveSchedule) -> float:
        dt = self.dt if self.dt is not None else sched.period / self.steps_per_period
        if sched.omega * dt > 2.0 * math.pi / MIN_STEPS_PER_PERIOD * (1.0 + 1e-12):
            raise ValueError(
                f"dt={dt:.3e} s resolves fewer than {MIN_STEPS_PER_PERIOD} steps per drive period"
            )
        return dt


class PropagationResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    final_state: WaveState
    absorbed_norm: float = Field(0.0, ge=0, description="Probability removed by the absorber")
    snapshots: List[Tuple[float, WaveState, float]] = Field(
        default_factory=list, description="(t, state, probability absorbed so far)"
    )
    steps: int = 0


def time_rescale(t_si: float, params: LatticeParams) -> float:
    """
    SI seconds to dimensionless time.

    Energies are measured in ħω_r with kinetic term p̃², so iħ∂ₜψ = ħω_r H̃ψ
    becomes i∂_τψ = H̃ψ with τ = ω_r·t.
    """
    return params.omega_r * t_si


def absorber_profile(grid: SpectralGrid, width: float, strength: float) -> np.ndarray:
    """Imaginary potential W(ξ) = W₀ sin²(πξ/2L) over the outer layer of each edge"""
    profile = np.zeros(grid.n_points)
    if width <= 0 or strength <= 0:
        return profile
    layer = width * grid.length
    x = grid.x
    depth_left = (grid.x_min + layer) - x
    depth_right = x - (grid.x_max - layer)
    depth = np.clip(np.maximum(depth_left, depth_right), 0.0, layer)
    return strength * np.sin(0.5 * math.pi * depth / layer) ** 2


class SplitOperatorStepper:
    """
    Strang stepper for a time-dependent diagonal potential.

    potential_fn(t) returns V(x̃) at SI time t; h = ω_r·dt may be negative to
    step backwards. The absorber mask is only applied on forward steps.
    """

    def __init__(self, grid: SpectralGrid, omega_r: float,
                 potential_fn: Callable[[float], np.ndarray],
                 absorber: Optional[np.ndarray] = None):
        self.grid = grid
        self.omega_r = omega_r
        self.potential_fn = potential_fn
        self.absorber = absorber if absorber is not None else np.zeros(grid.n_points)
        self._k2 = grid.k_values ** 2
        self._kinetic_cache = {}
        self._mask_cache = {}

    def _kinetic(self, h: float) -> np.ndarray:
        if h not in self._kinetic_cache:
            self._kinetic_cache[h] = np.exp(-1j * self._k2 * h)
        return self._kinetic_cache[h]

    def _mask(self, h: float) -> Optional[np.ndarray]:
        if h <= 0 or not np.any(self.absorber):
            return None
        if h not in self._mask_cache:
            self._mask_cache[h] = np.exp(-self.absorber * h)
        return self._mask_cache[h]

    def step(self, psi: np.ndarray, t: float, dt: float) -> np.ndarray:
        h = self.omega_r * dt
        half_potential = np.exp(-0.5j * h * self.potential_fn(t + 0.5 * dt))
        psi = half_potential * psi
        psi = fft.ifft(self._kinetic(h) * fft.fft(psi))
        psi = half_potential * psi
        mask = self._mask(h)
        if mask is not None:
            psi = mask * psi
        return psi

    def evolve(self, psi: np.ndarray, t0: float, t1: float, n_steps: int,
               on_step: Optional[Callable[[int, float, np.ndarray], None]] = None) -> np.ndarray:
        """Advance from t0 to t1 in n_steps equal steps"""
        dt = (t1 - t0) / n_steps
        for i in range(n_steps):
            t = t0 + i * dt
            psi = self.step(psi, t, dt)
            if on_step is not None:
                on_step(i + 1, t + dt, psi)
        return psi


def driven_potential(params: LatticeParams, sched: DriveSchedule, grid: SpectralGrid) -> Callable[[float], np.ndarray]:
    """V(x̃, t) of the driven Hamiltonian in ħω_r"""
    x = grid.x
    static = potential(x, params)
    profile = params.r * lattice_profile(x, params)
    inertial_scale = 1.0 / (2.0 * params.omega_r ** 2)

    def at(t: float) -> np.ndarray:
        v = static
        acceleration = theta_ddot(t, sched)
        if acceleration != 0.0:
            v = v - (acceleration * inertial_scale) * x
        modulation = eta(t, sched)
        if modulation != 0.0:
            v = v + modulation * profile
        return v

    return at


def segment_plan(sched: DriveSchedule, dt: float) -> List[Tuple[float, float, int]]:
    """Split [0, T] at the drive switching instants; each piece gets whole steps of at most dt"""
    total = sched.total_duration
    breaks = {0.0, total, sched.t_m}
    # an AM drive that is off does not switch
    if sched.a_am != 0.0:
        breaks |= {sched.delta_tau, sched.delta_tau + sched.t_m}
    breaks = sorted(breaks)
    breaks = [b for b in breaks if 0.0 <= b <= total]
    plan = []
    for start, stop in zip(breaks[:-1], breaks[1:]):
        length = stop - start
        if length <= 1e-15 * total:
            continue
        plan.append((start, stop, max(1, math.ceil(length / dt - 1e-9))))
    return plan


def propagate(psi0: WaveState, params: LatticeParams, sched: DriveSchedule,
              cfg: PropagationConfig = PropagationConfig()) -> PropagationResult:
    """Evolve psi0 from t = 0 to sched.total_duration under the driven Hamiltonian"""
    if not psi0.normalized:
        raise ValueError(f"initial state must be normalized (norm²={psi0.norm2:.12f})")
    if psi0.representation != "position":
        raise ValueError("initial state must be in the position representation")

    grid = psi0.grid
    dt = cfg.time_step(sched)
    absorber = absorber_profile(grid, cfg.absorber_width, cfg.absorber_strength)
    stepper = SplitOperatorStepper(grid, params.omega_r, driven_potential(params, sched, grid), absorber)

    psi = psi0.amplitudes.copy()
    snapshots = []
    absorbed = 0.0
    step_count = 0
    norm2 = psi0.norm2

    for start, stop, n_steps in segment_plan(sched, dt):
        seg_dt = (stop - start) / n_steps
        for i in range(n_steps):
            t = start + i * seg_dt
            psi = stepper.step(psi, t, seg_dt)
            step_count += 1
            if cfg.absorber_width > 0 and cfg.absorber_strength > 0:
                new_norm2 = float(np.sum(np.abs(psi) ** 2) * grid.dx)
                absorbed += norm2 - new_norm2
                norm2 = new_norm2
                if not math.isfinite(new_norm2):
                    raise PropagationError("non-finite wavefunction", step_count, new_norm2)
            elif step_count % NAN_CHECK_INTERVAL == 0:
                check = float(np.sum(np.abs(psi) ** 2) * grid.dx)
                if not math.isfinite(check):
                    raise PropagationError("non-finite wavefunction", step_count, check)
            if cfg.record_stride and step_count % cfg.record_stride == 0:
                snapshots.append((t + seg_dt, WaveState(amplitudes=psi.copy(), grid=grid), max(0.0, absorbed)))

    final_norm2 = float(np.sum(np.abs(psi) ** 2) * grid.dx)
    if not math.isfinite(final_norm2):
        raise PropagationError("non-finite wavefunction", step_count, final_norm2)

    return PropagationResult(
        final_state=WaveState(amplitudes=psi, grid=grid),
        absorbed_norm=max(0.0, absorbed),
        snapshots=snapshots,
        steps=step_count,
    )


def energy_expectation(psi: WaveState, params: LatticeParams) -> float:
    """⟨H̃₀⟩ in ħω_r"""
    grid = psi.grid
    kinetic = fft.ifft(grid.k_values ** 2 * fft.fft(psi.amplitudes))
    h_psi = kinetic + potential(grid.x, params) * psi.amplitudes
    return float(np.real(np.vdot(psi.amplitudes, h_psi)) * grid.dx / psi.norm2)


def gaussian_packet(grid: SpectralGrid, x0: float, k0: float, sigma: float) -> WaveState:
    """Normalized Gaussian wavepacket centred at x0 moving with momentum k0"""
    x = grid.x
    amplitudes = np.exp(-((x - x0) ** 2) / (4.0 * sigma ** 2) + 1j * k0 * x)
    return WaveState(amplitudes=amplitudes, grid=grid).normalize()


def measure_absorber_reflection(grid: SpectralGrid, cfg: PropagationConfig, kinetic_energy: float,
                                sigma: float = 3.0, steps_per_unit: int = 200) -> float:
    """
    Calibration: probability a free packet at the given kinetic energy leaves
    in the interior after running into the absorbing layer.

    The packet starts at the centre moving right and is sampled when a
    reflected copy would be back at the centre.
    """
    absorber = absorber_profile(grid, cfg.absorber_width, cfg.absorber_strength)
    k0 = math.sqrt(kinetic_energy)
    packet = gaussian_packet(grid, 0.0, k0, sigma)
    layer = cfg.absorber_width * grid.length
    travel = 0.5 * grid.length - layer
    # group velocity of p̃² is 2k
    tau_return = 2.0 * travel / (2.0 * k0)
    n_steps = max(1, math.ceil(tau_return * steps_per_unit))
    zero = np.zeros(grid.n_points)
    stepper = SplitOperatorStepper(grid, 1.0, lambda t: zero, absorber)
    psi = stepper.evolve(packet.amplitudes, 0.0, tau_return, n_steps)

    interior = absorber == 0.0
    reflected = float(np.sum(np.abs(psi[interior]) ** 2) * grid.dx)
    console.info(f"absorber calibration: E={kinetic_energy:g}, reflected {reflected:.3e}")
    return reflected
