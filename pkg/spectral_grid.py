"""
Spectral Grid - Position/Momentum Discretization

Uniform power-of-two grid spanning an odd number of lattice wells centred on
x̃ = 0, with the discrete Fourier pair used by the split-operator kinetic step.
Momentum amplitudes are scaled so that Σ|φ|²dk = Σ|ψ|²dx.
"""

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import fft

from errors import GridError

MIN_POINTS_PER_WELL = 16
DEFAULT_ABSORBER_WIDTH = 0.1

Representation = Literal["position", "momentum"]


def is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


def next_power_of_two(value: int) -> int:
    return 1 << max(0, math.ceil(math.log2(max(value, 1))))


class SpectralGrid(BaseModel):
    """Immutable 1D grid; x̃ values are x_min + j·dx for j < n_points"""
    model_config = ConfigDict(frozen=True)

    n_points: int = Field(..., description="Power-of-two point count")
    n_wells: int = Field(..., description="Odd number of lattice wells spanned")
    x_min: float = Field(..., description="Left domain bound in x̃")
    x_max: float = Field(..., description="Right domain bound in x̃ (exclusive)")

    @model_validator(mode="after")
    def _consistent(self):
        if not is_power_of_two(self.n_points):
            raise ValueError(f"n_points={self.n_points} is not a power of two")
        if self.n_wells < 3 or self.n_wells % 2 == 0:
            raise ValueError(f"n_wells={self.n_wells} must be odd and at least 3")
        if self.n_points < MIN_POINTS_PER_WELL * self.n_wells:
            raise ValueError(f"need at least {MIN_POINTS_PER_WELL} points per well")
        if not math.isclose(self.x_max - self.x_min, self.n_wells * math.pi, rel_tol=0, abs_tol=1e-12):
            raise ValueError("domain length must equal n_wells·π")
        return self

    @property
    def length(self) -> float:
        return self.n_wells * math.pi

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def dk(self) -> float:
        return 2.0 * math.pi / (self.n_points * self.dx)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k_values(self) -> np.ndarray:
        """Conjugate momenta in p̃ units, standard DFT ordering"""
        return 2.0 * math.pi * fft.fftfreq(self.n_points, d=self.dx)

    @property
    def points_per_well(self) -> float:
        return self.n_points / self.n_wells

    @property
    def half_wells(self) -> int:
        return (self.n_wells - 1) // 2

    def well_centers(self) -> np.ndarray:
        """Well minima at jπ, j = -half_wells..half_wells"""
        return math.pi * np.arange(-self.half_wells, self.half_wells + 1)

    def interior(self, edge_width: float) -> np.ndarray:
        """Mask of points outside the outer edge_width fraction of the domain on each side"""
        if edge_width <= 0:
            return np.ones(self.n_points, dtype=bool)
        layer = edge_width * self.length
        x = self.x
        return (x > self.x_min + layer) & (x < self.x_max - layer)

    def same_as(self, other: "SpectralGrid") -> bool:
        return (self.n_points == other.n_points and self.n_wells == other.n_wells
                and self.x_min == other.x_min and self.x_max == other.x_max)


def make_grid(n_wells: int, points_per_well: int, rounding: Literal["strict", "auto"] = "strict") -> SpectralGrid:
    """
    Build a grid of n_wells wells centred on x̃ = 0.

    With rounding="strict" the total n_wells·points_per_well must already be a
    power of two; "auto" rounds the point count up to the next power of two.
    """
    if n_wells < 3 or n_wells % 2 == 0:
        raise GridError(f"n_wells={n_wells} must be odd and at least 3")
    if points_per_well < MIN_POINTS_PER_WELL:
        raise GridError(f"points_per_well={points_per_well} is below the minimum of {MIN_POINTS_PER_WELL}")

    requested = n_wells * points_per_well
    if is_power_of_two(requested):
        n_points = requested
    elif rounding == "auto":
        n_points = next_power_of_two(requested)
    elif rounding == "strict":
        raise GridError(
            f"{n_wells} wells x {points_per_well} points = {requested} is not a power of two; "
            f"nearest valid point count is {next_power_of_two(requested)} (use rounding='auto')"
        )
    else:
        raise GridError(f"unknown rounding mode '{rounding}'")

    half = 0.5 * n_wells * math.pi
    return SpectralGrid(n_points=n_points, n_wells=n_wells, x_min=-half, x_max=half)


def default_grid() -> SpectralGrid:
    """Production grid: 17 wells, 2048 points"""
    return make_grid(17, 64, rounding="auto")


class WaveState(BaseModel):
    """Complex amplitudes on a grid, in position or momentum representation"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    amplitudes: np.ndarray
    grid: SpectralGrid
    representation: Representation = "position"

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _as_complex(cls, value):
        array = np.asarray(value, dtype=np.complex128)
        if array.ndim != 1:
            raise ValueError("amplitudes must be a 1D vector")
        return array

    @model_validator(mode="after")
    def _matches_grid(self):
        if self.amplitudes.shape[0] != self.grid.n_points:
            raise ValueError(
                f"amplitude length {self.amplitudes.shape[0]} does not match grid size {self.grid.n_points}"
            )
        return self

    @property
    def weight(self) -> float:
        return self.grid.dx if self.representation == "position" else self.grid.dk

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.weight)

    @property
    def normalized(self) -> bool:
        return abs(self.norm2 - 1.0) <= 1e-9

    def normalize(self) -> "WaveState":
        norm = math.sqrt(self.norm2)
        if norm == 0.0:
            raise GridError("cannot normalize a zero state")
        return WaveState(amplitudes=self.amplitudes / norm, grid=self.grid, representation=self.representation)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _momentum_scale(grid: SpectralGrid) -> float:
    return math.sqrt(grid.dx / grid.dk)


def to_momentum(psi: WaveState) -> WaveState:
    if psi.representation != "position":
        raise GridError("state is already in the momentum representation")
    phi = fft.fft(psi.amplitudes, norm="ortho") * _momentum_scale(psi.grid)
    return WaveState(amplitudes=phi, grid=psi.grid, representation="momentum")


def to_position(phi: WaveState) -> WaveState:
    if phi.representation != "momentum":
        raise GridError("state is already in the position representation")
    psi = fft.ifft(phi.amplitudes / _momentum_scale(phi.grid), norm="ortho")
    return WaveState(amplitudes=psi, grid=phi.grid, representation="position")


def check_compatible(a: SpectralGrid, b: SpectralGrid) -> None:
    if not a.same_as(b):
        raise GridError(f"grid mismatch: {a.n_points} points/{a.n_wells} wells vs {b.n_points}/{b.n_wells}")


def inner_product(bra: WaveState, ket: WaveState) -> complex:
    """⟨bra|ket⟩ with the representation's quadrature weight"""
    check_compatible(bra.grid, ket.grid)
    if bra.representation != ket.representation:
        raise GridError("inner product needs both states in the same representation")
    return complex(np.vdot(bra.amplitudes, ket.amplitudes) * bra.weight)
