import math

import numpy as np
import pytest
import scipy.linalg

from errors import BasisError, GridError
from lattice_model import LatticeParams, potential
from spectral_grid import WaveState, make_grid
from stationary_states import (
    apply_hamiltonian,
    escape_energy,
    overlap,
    qubit_splitting,
    solve_static,
    spectrum_table,
    superposition,
)


def finite_difference_oracle(params, n_wells=5, points_per_well=1600):
    """Hard-wall second-order finite differences on a smaller, much finer box"""
    n = n_wells * points_per_well
    dx = n_wells * math.pi / (n + 1)
    x = -0.5 * n_wells * math.pi + dx * np.arange(1, n + 1)
    v = potential(x, params)
    diagonal = 2.0 / dx ** 2 + v
    off = np.full(n - 1, -1.0 / dx ** 2)
    energies, vectors = scipy.linalg.eigh_tridiagonal(diagonal, off, select="v",
                                                      select_range=(v.min() - 1.0, params.r + 5.0))
    density = vectors ** 2
    central = np.sum(density[np.abs(x) <= 0.5 * math.pi], axis=0) / np.sum(density, axis=0)
    return energies[central >= 0.5]


def test_qubit_splitting_reference_point(reference_basis):
    assert qubit_splitting(reference_basis) == pytest.approx(7.28, abs=0.4)
    assert reference_basis.ground.well_index == 0
    assert reference_basis.ground.intra_well_rank == 0
    assert reference_basis.excited.well_index == 0
    assert reference_basis.excited.intra_well_rank == 1


def test_two_localized_central_states_at_reference(reference_basis):
    assert len(reference_basis.states_in_well(0)) == 2


def test_basis_orthonormal(reference_basis):
    rows = reference_basis.matrix()
    gram = rows.conj() @ rows.T * reference_basis.grid.dx
    np.testing.assert_allclose(gram, np.eye(len(rows)), atol=1e-8)


def test_eigen_residual(reference_basis):
    for state in (s for s in reference_basis.states if abs(s.well_index) <= 1):
        psi = state.wavefunction
        residual = apply_hamiltonian(psi, reference_basis.params, reference_basis.wall_width) - state.energy * psi.amplitudes
        assert math.sqrt(np.sum(np.abs(residual) ** 2) * psi.grid.dx) <= 1e-6


def test_energies_sorted_within_wells(reference_basis):
    for well in {s.well_index for s in reference_basis.states}:
        states = reference_basis.states_in_well(well)
        assert [s.intra_well_rank for s in states] == list(range(len(states)))
        energies = [s.energy for s in states]
        assert energies == sorted(energies)
        qubit = {reference_basis.qubit_ground, reference_basis.qubit_excited}
        for s in states:
            index = reference_basis.index_of(s.well_index, s.intra_well_rank)
            assert s.localization >= (0.5 if index in qubit else 0.9)


def test_basis_vanishes_behind_the_walls(reference_basis):
    outside = ~reference_basis.grid.interior(reference_basis.wall_width)
    assert outside.any()
    for state in reference_basis.states:
        assert not np.any(state.wavefunction.amplitudes[outside])


@pytest.mark.parametrize("r", [10.0, 12.0])
def test_qubit_found_in_shallow_lattices(r, small_grid):
    basis = solve_static(LatticeParams(r=r, s=2.86), small_grid)
    assert basis.ground.well_index == 0 and basis.excited.well_index == 0
    assert basis.ground.intra_well_rank == 0 and basis.excited.intra_well_rank == 1
    assert 0.0 < qubit_splitting(basis) < 2 * math.sqrt(r)
    assert basis.excited.energy < escape_energy(basis.params)
    assert basis.excited.localization >= 0.5


def test_wannier_stark_ladder(reference_basis):
    e = {w: reference_basis.states[reference_basis.index_of(w, 0)].energy for w in (-1, 0, 1)}
    assert e[1] - e[0] == pytest.approx(2.86, rel=0.05)
    assert e[0] - e[-1] == pytest.approx(2.86, rel=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("r", [12.0, 19.0, 26.0])
def test_energies_match_finite_difference_oracle(r, small_grid):
    params = LatticeParams(r=r, s=2.86)
    basis = solve_static(params, small_grid)
    oracle = finite_difference_oracle(params)
    central = basis.states_in_well(0)[:3]
    assert len(central) >= 2
    for state in central:
        assert np.min(np.abs(oracle - state.energy)) < 1e-3


def test_finite_difference_method_agrees(reference_params, small_grid, reference_basis):
    basis = solve_static(reference_params, small_grid, method="finite_difference")
    assert basis.method == "finite_difference"
    assert qubit_splitting(basis) == pytest.approx(qubit_splitting(reference_basis), abs=0.02)


def test_untilted_lattice(small_grid):
    params = LatticeParams(r=19.0, s=0.0)
    assert escape_energy(params) == pytest.approx(19.0)
    basis = solve_static(params, small_grid)
    ground = [basis.states[basis.index_of(w, 0)].energy for w in (-1, 0, 1)]
    assert max(ground) - min(ground) < 1e-3
    assert qubit_splitting(basis) == pytest.approx(2 * math.sqrt(19.0), rel=0.15)


@pytest.mark.slow
def test_splitting_increases_with_depth(small_grid):
    splittings = [qubit_splitting(solve_static(LatticeParams(r=r, s=2.86), small_grid))
                  for r in (10.0, 14.0, 18.0, 22.0, 26.0, 30.0)]
    assert all(b > a for a, b in zip(splittings, splittings[1:]))


def test_deep_lattice_has_third_central_state(deep_basis):
    assert len(deep_basis.states_in_well(0)) >= 3


def test_shallow_lattice_fails(small_grid):
    with pytest.raises(BasisError) as excinfo:
        solve_static(LatticeParams(r=2.0, s=2.86), small_grid)
    assert excinfo.value.r == 2.0


def test_depth_range_enforced(small_grid):
    with pytest.raises(BasisError):
        solve_static(LatticeParams(r=80.0, s=2.86), small_grid)


def test_overlap_examples(reference_basis):
    g, e = reference_basis.qubit_ground, reference_basis.qubit_excited
    ground = reference_basis.ground.wavefunction
    assert abs(overlap(ground, g, reference_basis)) == pytest.approx(1.0, abs=1e-9)
    assert abs(overlap(ground, e, reference_basis)) < 1e-8
    mixed = superposition(reference_basis, {g: 1 / math.sqrt(2), e: 1 / math.sqrt(2)})
    assert abs(overlap(mixed, g, reference_basis)) == pytest.approx(1 / math.sqrt(2), abs=1e-8)


def test_overlap_errors(reference_basis):
    ground = reference_basis.ground.wavefunction
    with pytest.raises(BasisError):
        overlap(ground, len(reference_basis), reference_basis)
    other_grid = make_grid(11, 64, rounding="auto")
    foreign = WaveState(amplitudes=np.ones(other_grid.n_points), grid=other_grid).normalize()
    with pytest.raises(GridError):
        overlap(foreign, 0, reference_basis)


def test_spectrum_table_rows(reference_basis):
    rows = spectrum_table(reference_basis)
    assert len(rows) == len(reference_basis)
    assert {"well_index", "rank", "energy", "localization"} <= set(rows[0])
    central = [row for row in rows if row["well_index"] == 0]
    assert central[1]["energy"] - central[0]["energy"] == pytest.approx(qubit_splitting(reference_basis))
