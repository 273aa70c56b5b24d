"""
Measurement - Qubit Populations and Leakage Breakdown

Projects a propagated state onto the localized basis. Leakage P_L is split
into higher states of the central well (intra), everything left on the grid
outside the central well's bound spectrum (inter) and the absorber loss.
"""

import math
from typing import Dict, List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from propagator import PropagationResult
from spectral_grid import WaveState, check_compatible
from stationary_states import StateBasis

# P_L below this floor is treated as zero for the branching ratio
LEAKAGE_FLOOR = 1e-10

# clamp window for rounding noise on derived probabilities
_ROUNDING = 1e-9

CSV_COLUMNS = ["P_g", "P_e", "P_L", "leak_intra", "leak_inter", "leak_absorbed"]


def _clamp(value: float) -> float:
    if -_ROUNDING < value < 0.0:
        return 0.0
    if 1.0 < value < 1.0 + _ROUNDING:
        return 1.0
    return value


class PopulationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    P_g: float = Field(..., ge=0, le=1, description="Ground-state population")
    P_e: float = Field(..., ge=0, le=1, description="Excited-state population")
    P_L: float = Field(..., ge=0, le=1, description="Leakage out of the qubit space")
    leak_intra: float = Field(0.0, ge=0, le=1, description="Central-well states of rank ≥ 2")
    leak_inter: float = Field(0.0, ge=0, le=1, description="Other wells and unclassified residual")
    leak_absorbed: float = Field(0.0, ge=0, le=1, description="Lost to the absorbing boundary")

    def as_dict(self) -> Dict[str, float]:
        return {column: getattr(self, column) for column in CSV_COLUMNS}

    def csv_row(self) -> List[float]:
        return [getattr(self, column) for column in CSV_COLUMNS]


def measure_state(psi: WaveState, basis: StateBasis, absorbed_norm: float = 0.0) -> PopulationReport:
    """Population report for a position-space state"""
    check_compatible(psi.grid, basis.grid)
    dx = basis.grid.dx

    central = [i for i, state in enumerate(basis.states) if state.well_index == 0]
    rows = basis.matrix(central)
    amplitudes = rows.conj() @ psi.amplitudes * dx
    probabilities = np.abs(amplitudes) ** 2
    by_index = dict(zip(central, probabilities))

    p_g = float(by_index[basis.qubit_ground])
    p_e = float(by_index[basis.qubit_excited])
    p_l = 1.0 - p_g - p_e
    intra = float(sum(p for i, p in by_index.items() if i not in (basis.qubit_ground, basis.qubit_excited)))
    inter = p_l - intra - absorbed_norm

    return PopulationReport(
        P_g=_clamp(p_g),
        P_e=_clamp(p_e),
        P_L=_clamp(p_l),
        leak_intra=_clamp(intra),
        leak_inter=_clamp(inter),
        leak_absorbed=_clamp(absorbed_norm),
    )


def measure(result: PropagationResult, basis: StateBasis) -> PopulationReport:
    return measure_state(result.final_state, basis, absorbed_norm=result.absorbed_norm)


def branching_ratio(report: PopulationReport) -> float:
    """B = P_e/P_L; +inf when leakage is below LEAKAGE_FLOOR"""
    if report.P_L < LEAKAGE_FLOOR:
        return math.inf
    return report.P_e / report.P_L


def weighted_mean(reports: Sequence[PopulationReport], weights: Sequence[float]) -> PopulationReport:
    """Field-wise weighted average; weights are expected to sum to one"""
    if len(reports) != len(weights) or not reports:
        raise ValueError("need one weight per report")
    averaged = {
        column: _clamp(math.fsum(w * getattr(report, column) for report, w in zip(reports, weights)))
        for column in CSV_COLUMNS
    }
    return PopulationReport(**averaged)
