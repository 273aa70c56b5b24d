"""
Lattice Model - Physical Parameters and Drive Waveforms

Holds the static tilted-washboard problem definition, the drive schedule for
the phase (PM) and amplitude (AM) modulations, and the lattice-depth
distribution used for inhomogeneous averaging.

Dimensionless conventions: x̃ = πx/a, p̃ = ap/(πħ), energies in ħω_r and
dimensionless time τ = ω_r·t. The static Hamiltonian is

    H̃₀ = p̃² + r sin²(x̃ + x₀) + (s/π) x̃

where x₀ = -½·arcsin(s/(πr)) registers a potential minimum at x̃ = 0.
The driven Hamiltonian adds -(θ̈/2)x̃ + rη(t)sin²(x̃ + x₀).
"""

import math
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import constants, stats

# ⁸⁵Rb atomic mass
RB85_MASS_KG = 84.911789738 * constants.atomic_mass

# Photon scattering time of the reference apparatus; drives must stay well below it
SCATTERING_TIME_S = 50e-3


def degrees_to_radians(degrees: float) -> float:
    """PM amplitude conversion; the beam-phase to displacement factor is absorbed into A_PM"""
    return math.radians(degrees)


def recoil_frequency(spacing: float, mass: float) -> float:
    """Effective recoil angular frequency ω_r = 2π·h/(8ma²), rad/s"""
    return 2.0 * math.pi * constants.h / (8.0 * mass * spacing ** 2)


class LatticeParams(BaseModel):
    """Static tilted-washboard problem definition"""
    model_config = ConfigDict(frozen=True)

    r: float = Field(..., gt=0, description="Lattice depth U₀ in units of ħω_r")
    s: float = Field(..., ge=0, description="Tilt mga per lattice spacing in units of ħω_r")
    omega_r: float = Field(2.0 * math.pi * 685.0, gt=0, description="Recoil angular frequency, rad/s")
    a: float = Field(0.930e-6, gt=0, description="Lattice spacing, m")
    mass: float = Field(RB85_MASS_KG, gt=0, description="Atom mass, kg")

    @model_validator(mode="after")
    def _check_wells_exist(self):
        if self.s >= math.pi * self.r:
            raise ValueError(f"tilt s={self.s} removes every local minimum (need s < π·r = {math.pi * self.r:.4g})")
        return self

    @classmethod
    def from_physical(cls, r: float, spacing: float, mass: float, g: float = constants.g,
                      s: float = None) -> "LatticeParams":
        """Build from SI inputs; ω_r from the recoil formula, s from gravity unless given"""
        omega_r = recoil_frequency(spacing, mass)
        if s is None:
            s = mass * g * spacing / (constants.hbar * omega_r)
        return cls(r=r, s=s, omega_r=omega_r, a=spacing, mass=mass)

    @classmethod
    def rb85(cls, r: float = 19.0, s: float = 2.86) -> "LatticeParams":
        """⁸⁵Rb reference point: 0.930 μm spacing, ω_r = 2π·685 Hz"""
        return cls(r=r, s=s)

    def with_depth(self, r: float) -> "LatticeParams":
        return self.model_copy(update={"r": r})

    @property
    def offset(self) -> float:
        """Lattice phase x₀ placing a minimum of the tilted potential at x̃ = 0"""
        return -0.5 * math.asin(self.s / (math.pi * self.r))


def potential(x: np.ndarray, params: LatticeParams) -> np.ndarray:
    """Static tilted-washboard potential on x̃, in ħω_r"""
    return params.r * np.sin(x + params.offset) ** 2 + (params.s / math.pi) * x


def lattice_profile(x: np.ndarray, params: LatticeParams) -> np.ndarray:
    """sin²(x̃ + x₀), the shape modulated by the AM drive"""
    return np.sin(x + params.offset) ** 2


class DriveSchedule(BaseModel):
    """PM and AM drive parameters; PM on [0, t_m], AM on [Δτ, Δτ + t_m]"""
    model_config = ConfigDict(frozen=True)

    a_pm: float = Field(..., description="PM amplitude, radians of lattice displacement in x̃ units")
    a_am: float = Field(..., ge=0, lt=1, description="Fractional depth-modulation amplitude")
    omega: float = Field(..., gt=0, description="Drive angular frequency ω, rad/s")
    n: int = Field(..., ge=1, description="Number of PM periods")
    delta_tau: float = Field(0.0, ge=0, description="AM start offset Δτ, s")

    @field_validator("a_pm")
    @classmethod
    def _finite_pm(cls, value):
        if not math.isfinite(value):
            raise ValueError("a_pm must be finite")
        return value

    @classmethod
    def from_degrees(cls, a_pm_deg: float, a_am: float, omega: float, n: int,
                     delta_tau: float = 0.0) -> "DriveSchedule":
        return cls(a_pm=degrees_to_radians(a_pm_deg), a_am=a_am, omega=omega, n=n, delta_tau=delta_tau)

    def with_delay(self, delta_tau: float) -> "DriveSchedule":
        return self.model_copy(update={"delta_tau": delta_tau})

    def with_amplitudes(self, a_pm: float = None, a_am: float = None) -> "DriveSchedule":
        update = {}
        if a_pm is not None:
            update["a_pm"] = a_pm
        if a_am is not None:
            update["a_am"] = a_am
        # re-validate through the constructor
        return DriveSchedule(**{**self.model_dump(), **update})

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def t_m(self) -> float:
        """Modulation duration 2nπ/ω shared by PM and AM"""
        return 2.0 * self.n * math.pi / self.omega

    @property
    def fringe_period(self) -> float:
        """Δτ period of the interference fringe, π/ω"""
        return math.pi / self.omega

    @property
    def total_duration(self) -> float:
        """End of the last drive window; an AM drive that is off opens no window"""
        if self.a_am == 0.0:
            return self.t_m
        return max(self.t_m, self.delta_tau + self.t_m)


def _in_window(t: float, start: float, duration: float) -> bool:
    return start <= t <= start + duration


def theta(t: float, sched: DriveSchedule) -> float:
    """Lattice displacement θ(t) = A_PM(1 - cos ωt), held at θ(t_m) = 0 outside the window"""
    if not _in_window(t, 0.0, sched.t_m):
        return 0.0
    return sched.a_pm * (1.0 - math.cos(sched.omega * t))


def theta_ddot(t: float, sched: DriveSchedule) -> float:
    """Second time derivative of θ, s⁻²·x̃; zero outside the PM window"""
    if not _in_window(t, 0.0, sched.t_m):
        return 0.0
    return sched.a_pm * sched.omega ** 2 * math.cos(sched.omega * t)


def eta(t: float, sched: DriveSchedule) -> float:
    """Fractional depth modulation η(t) = A_AM sin[2ω(t - Δτ)] on [Δτ, Δτ + t_m]"""
    if sched.a_am == 0.0 or not _in_window(t, sched.delta_tau, sched.t_m):
        return 0.0
    return sched.a_am * math.sin(2.0 * sched.omega * (t - sched.delta_tau))


def phase_from_offset(sched: DriveSchedule) -> float:
    """Relative drive phase Δφ = 2ωΔτ reduced to [0, 2π)"""
    phase = math.fmod(2.0 * sched.omega * sched.delta_tau, 2.0 * math.pi)
    if phase < 0:
        phase += 2.0 * math.pi
    # full turns that miss 2π by rounding wrap to 0
    return 0.0 if phase >= 2.0 * math.pi - 1e-12 else phase


def scattering_time_ok(sched: DriveSchedule, limit: float = SCATTERING_TIME_S, margin: float = 10.0) -> bool:
    """True when the drive is much shorter than the photon scattering time"""
    return sched.total_duration * margin <= limit


class DepthDistribution(BaseModel):
    """Discrete distribution of lattice depths for inhomogeneous averaging"""
    model_config = ConfigDict(frozen=True)

    entries: List[Tuple[float, float]] = Field(..., min_length=1, description="(r, weight) pairs")

    @field_validator("entries")
    @classmethod
    def _normalized(cls, entries):
        total = 0.0
        for r, weight in entries:
            if r <= 0:
                raise ValueError(f"depth r={r} must be positive")
            if weight < 0:
                raise ValueError(f"weight {weight} for r={r} is negative")
            total += weight
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        return entries

    @classmethod
    def single(cls, r: float) -> "DepthDistribution":
        return cls(entries=[(r, 1.0)])

    @classmethod
    def from_weights(cls, depths, weights) -> "DepthDistribution":
        weights = np.asarray(weights, dtype=float)
        total = math.fsum(weights)
        if total <= 0:
            raise ValueError("weights must have a positive sum")
        normalized = [w / total for w in weights]
        # absorb the last rounding ulp so the sum is 1 to machine precision
        normalized[-1] = 1.0 - math.fsum(normalized[:-1])
        return cls(entries=[(float(r), float(w)) for r, w in zip(depths, normalized)])

    @classmethod
    def truncated_gaussian(cls, mean: float = 19.0, rel_sigma: float = 0.15, lower: float = 10.0,
                           upper: float = 30.0, nodes: int = 9) -> "DepthDistribution":
        """Gaussian proxy for the measured depth spread, nodes symmetric about the mean within [lower, upper]"""
        sigma = rel_sigma * mean
        if nodes < 1 or sigma <= 0:
            return cls.single(mean)
        half = min(mean - lower, upper - mean)
        if nodes == 1 or half <= 0:
            return cls.single(mean)
        depths = np.linspace(mean - half, mean + half, nodes)
        a, b = (lower - mean) / sigma, (upper - mean) / sigma
        weights = stats.truncnorm.pdf(depths, a, b, loc=mean, scale=sigma)
        return cls.from_weights(depths, weights)

    @property
    def depths(self) -> List[float]:
        return [r for r, _ in self.entries]

    @property
    def weights(self) -> List[float]:
        return [w for _, w in self.entries]

    @property
    def mean_depth(self) -> float:
        return math.fsum(r * w for r, w in self.entries)
