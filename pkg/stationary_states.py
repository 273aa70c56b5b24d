"""
Stationary States - Wannier-Stark Basis of the Static Tilted Washboard

Diagonalizes the discretized H̃₀ on a SpectralGrid, labels every eigenstate
with the well it sits in and its rank inside that well, keeps the localized
ones and designates the two lowest central-well states as the qubit.

Two kinetic discretizations are available:
    fourier            - Fourier-grid matrix, the same operator the
                         split-operator propagator exponentiates (default)
    finite_difference  - second-order central differences

Both are restricted to the interior of the domain with hard walls at the
inner edge of the absorbing layers, so basis states carry no weight where
the propagator absorbs and never see the periodic wrap of the tilt.

The qubit pair is the two lowest central-well states that sit below the
downhill barrier top and keep most of their probability in the well; the
rest of the basis uses the stricter localization threshold.
"""

import math
from typing import Dict, List, Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field
from scipy import fft

import console
from errors import BasisError
from lattice_model import LatticeParams, potential
from spectral_grid import DEFAULT_ABSORBER_WIDTH, SpectralGrid, WaveState, check_compatible, inner_product

Method = Literal["fourier", "finite_difference"]

DEFAULT_LOCALIZATION_THRESHOLD = 0.9
DEFAULT_CLUSTER_GAP = 0.2
QUBIT_MIN_LOCALIZATION = 0.5
DEPTH_RANGE = (1.0, 60.0)


class BasisState(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    energy: float = Field(..., description="Energy in ħω_r")
    wavefunction: WaveState
    well_index: int = Field(..., description="Well the state is centred on, 0 = central")
    intra_well_rank: int = Field(..., ge=0, description="Energy order inside the well")
    localization: float = Field(..., description="Probability within ±π/2 of the well center")


class StateBasis(BaseModel):
    """Localized stationary states ordered by (well_index, intra_well_rank)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: LatticeParams
    grid: SpectralGrid
    states: List[BasisState]
    qubit_ground: int
    qubit_excited: int
    method: Method = "fourier"
    wall_width: float = Field(DEFAULT_ABSORBER_WIDTH, description="Excluded edge layer per side, fraction of the domain")

    def __len__(self):
        return len(self.states)

    @property
    def ground(self) -> BasisState:
        return self.states[self.qubit_ground]

    @property
    def excited(self) -> BasisState:
        return self.states[self.qubit_excited]

    def energies(self) -> np.ndarray:
        return np.array([state.energy for state in self.states])

    def states_in_well(self, well_index: int) -> List[BasisState]:
        return [state for state in self.states if state.well_index == well_index]

    def index_of(self, well_index: int, rank: int) -> int:
        for i, state in enumerate(self.states):
            if state.well_index == well_index and state.intra_well_rank == rank:
                return i
        raise BasisError(f"no localized state with well_index={well_index}, rank={rank}", r=self.params.r)

    def matrix(self, indices=None) -> np.ndarray:
        """Wavefunctions stacked as rows"""
        chosen = self.states if indices is None else [self.states[i] for i in indices]
        return np.array([state.wavefunction.amplitudes for state in chosen])


def kinetic_matrix(grid: SpectralGrid) -> np.ndarray:
    """Fourier-grid kinetic matrix for p̃²: circulant with kernel ifft(k²)"""
    kernel = fft.ifft(grid.k_values ** 2).real
    return scipy.linalg.circulant(kernel)


def apply_hamiltonian(psi: WaveState, params: LatticeParams, wall_width: float = 0.0) -> np.ndarray:
    """H̃₀ψ with the spectral kinetic operator, zero beyond the walls when wall_width > 0"""
    grid = psi.grid
    kinetic = fft.ifft(grid.k_values ** 2 * fft.fft(psi.amplitudes))
    h_psi = kinetic + potential(grid.x, params) * psi.amplitudes
    h_psi[~grid.interior(wall_width)] = 0.0
    return h_psi


def escape_energy(params: LatticeParams) -> float:
    """Top of the lower of the two barriers around the central well"""
    shift = math.asin(params.s / (math.pi * params.r))
    tops = np.array([-0.5 * math.pi + shift, 0.5 * math.pi + shift])
    return float(potential(tops, params).min())


def _diagonalize(params: LatticeParams, grid: SpectralGrid, method: Method, wall_width: float):
    inside = np.flatnonzero(grid.interior(wall_width))
    v = potential(grid.x[inside], params)
    e_max = float(v.max())

    if method == "fourier":
        hamiltonian = kinetic_matrix(grid)[np.ix_(inside, inside)]
        hamiltonian[np.diag_indices_from(hamiltonian)] += v
        energies, vectors = scipy.linalg.eigh(hamiltonian, subset_by_value=(-np.inf, e_max), driver="evr")
    elif method == "finite_difference":
        inv_dx2 = 1.0 / grid.dx ** 2
        diagonal = 2.0 * inv_dx2 + v
        off_diagonal = np.full(len(inside) - 1, -inv_dx2)
        energies, vectors = scipy.linalg.eigh_tridiagonal(
            diagonal, off_diagonal, select="v", select_range=(float(v.min()) - 1.0, e_max)
        )
    else:
        raise BasisError(f"unknown diagonalization method '{method}'", r=params.r)

    # grid normalization Σ|φ|²dx = 1, sign fixed by the largest component
    vectors = vectors / math.sqrt(grid.dx)
    peaks = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    vectors = vectors * np.where(peaks < 0, -1.0, 1.0)
    full = np.zeros((grid.n_points, vectors.shape[1]))
    full[inside] = vectors
    return energies, full


def _well_labels(vectors: np.ndarray, grid: SpectralGrid):
    """Well index from the mean position and probability within ±π/2 of that well"""
    density = np.abs(vectors) ** 2 * grid.dx
    x = grid.x
    mean_x = x @ density
    wells = np.rint(mean_x / math.pi).astype(int)
    distance = np.abs(x[:, None] - math.pi * wells[None, :])
    localization = np.sum(density * (distance <= 0.5 * math.pi), axis=0)
    return wells, localization


def _localize_clusters(energies, vectors, grid, threshold, cluster_gap):
    """
    Rotate near-degenerate groups with no localized member onto eigenvectors
    of the projected position operator; energies become ⟨H̃₀⟩.
    """
    if cluster_gap <= 0 or len(energies) < 2:
        return energies, vectors
    energies = energies.copy()
    vectors = vectors.copy()
    _, localization = _well_labels(vectors, grid)
    x = grid.x

    breaks = np.flatnonzero(np.diff(energies) >= cluster_gap) + 1
    for group in np.split(np.arange(len(energies)), breaks):
        if len(group) < 2 or np.any(localization[group] >= threshold):
            continue
        block = vectors[:, group]
        position = block.T @ (x[:, None] * block) * grid.dx
        _, rotation = np.linalg.eigh(position)
        vectors[:, group] = block @ rotation
        energies[group] = (rotation ** 2).T @ energies[group]
    return energies, vectors


def solve_static(params: LatticeParams, grid: SpectralGrid, method: Method = "fourier",
                 localization_threshold: float = DEFAULT_LOCALIZATION_THRESHOLD,
                 cluster_gap: float = DEFAULT_CLUSTER_GAP,
                 wall_width: float = DEFAULT_ABSORBER_WIDTH) -> StateBasis:
    """
    Compute the localized stationary states and the qubit pair.

    wall_width places hard walls that fraction of the domain in from each
    edge; pass the propagator's absorber width. Raises BasisError when the
    central well binds fewer than two states below its escape energy
    (lattice too shallow for a two-level qubit).
    """
    if not DEPTH_RANGE[0] <= params.r <= DEPTH_RANGE[1]:
        raise BasisError(f"depth r={params.r} outside supported range {DEPTH_RANGE}", r=params.r)

    energies, vectors = _diagonalize(params, grid, method, wall_width)
    energies, vectors = _localize_clusters(energies, vectors, grid, localization_threshold, cluster_gap)
    wells, localization = _well_labels(vectors, grid)

    bound = (wells == 0) & (localization >= QUBIT_MIN_LOCALIZATION) & (energies < escape_energy(params))
    qubit = sorted(np.flatnonzero(bound), key=lambda i: energies[i])[:2]
    if len(qubit) < 2:
        raise BasisError(
            f"central well binds {len(qubit)} state(s) below the barrier at r={params.r}, s={params.s}; "
            "a qubit needs two", r=params.r
        )

    keep = (localization >= localization_threshold) & (np.abs(wells) <= grid.half_wells)
    keep[qubit] = True
    order = sorted(np.flatnonzero(keep), key=lambda i: (wells[i], energies[i]))

    states = []
    ranks: Dict[int, int] = {}
    for i in order:
        well = int(wells[i])
        rank = ranks.get(well, 0)
        ranks[well] = rank + 1
        states.append(BasisState(
            energy=float(energies[i]),
            wavefunction=WaveState(amplitudes=vectors[:, i], grid=grid),
            well_index=well,
            intra_well_rank=rank,
            localization=float(localization[i]),
        ))

    ground, excited = (order.index(i) for i in qubit)
    console.info(f"basis r={params.r:g} s={params.s:g}: {len(states)} localized states, "
                 f"splitting {states[excited].energy - states[ground].energy:.4f} ħω_r")
    return StateBasis(params=params, grid=grid, states=states, qubit_ground=ground,
                      qubit_excited=excited, method=method, wall_width=wall_width)


def overlap(psi: WaveState, basis_state_index: int, basis: StateBasis) -> complex:
    """⟨φᵢ|ψ⟩ on the grid"""
    if not 0 <= basis_state_index < len(basis.states):
        raise BasisError(f"basis index {basis_state_index} out of range 0..{len(basis.states) - 1}",
                         r=basis.params.r)
    check_compatible(psi.grid, basis.grid)
    return inner_product(basis.states[basis_state_index].wavefunction, psi)


def qubit_splitting(basis: StateBasis) -> float:
    """E₁ - E₀ of the central well, ħω_r"""
    return basis.excited.energy - basis.ground.energy


def superposition(basis: StateBasis, coefficients: Dict[int, complex]) -> WaveState:
    amplitudes = np.zeros(basis.grid.n_points, dtype=np.complex128)
    for index, c in coefficients.items():
        amplitudes += c * basis.states[index].wavefunction.amplitudes
    return WaveState(amplitudes=amplitudes, grid=basis.grid)


def spectrum_table(basis: StateBasis) -> List[dict]:
    """Rows of (well_index, rank, energy, localization) for export"""
    return [
        {
            "well_index": state.well_index,
            "rank": state.intra_well_rank,
            "energy": state.energy,
            "localization": state.localization,
        }
        for state in basis.states
    ]
