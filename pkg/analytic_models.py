"""
Analytic Models - Two-Path Interference and Fringe Fitting

Closed-form two-path leakage model, visibility algebra and the
fixed-frequency sinusoidal fit applied to P_L(Δτ) fringes.
"""

import math
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from errors import FitError


class TwoPathInputs(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_pm: float = Field(..., ge=0, le=1, description="Leakage with PM alone")
    p_am: float = Field(..., ge=0, le=1, description="Leakage with AM alone")


def two_path_extrema(inp: TwoPathInputs) -> Tuple[float, float]:
    """Fully coherent sum of the two leakage amplitudes: (√a ± √b)²"""
    cross = 2.0 * math.sqrt(inp.p_pm * inp.p_am)
    total = inp.p_pm + inp.p_am
    return total + cross, total - cross


def two_path_fit_extrema(p_pm: float, p_am: float) -> Tuple[float, float]:
    return two_path_extrema(TwoPathInputs(p_pm=p_pm, p_am=p_am))


def visibility(p_max: float, p_min: float) -> float:
    """(P_max - P_min)/(P_max + P_min)"""
    if p_max <= 0.0:
        raise ValueError("visibility undefined for p_max = 0")
    if p_min < 0.0 or p_min > p_max:
        raise ValueError(f"need p_max ≥ p_min ≥ 0, got p_max={p_max}, p_min={p_min}")
    return (p_max - p_min) / (p_max + p_min)


def two_path_visibility_curve(log2_ratio: float) -> float:
    """Model visibility 2√ρ/(1+ρ) at ρ = 2^log2_ratio"""
    rho = 2.0 ** log2_ratio
    return 2.0 * math.sqrt(rho) / (1.0 + rho)


def equi_loss_ratio(p_e: float, p_l: float) -> float:
    """Branching ratio on the equi-loss line of leakage p_l"""
    return p_e / p_l


class FringeFit(BaseModel):
    """p(Δτ) = offset + amplitude·cos(2π·fixed_freq·Δτ + phase)"""
    model_config = ConfigDict(frozen=True)

    amplitude: float = Field(..., ge=0)
    offset: float
    phase: float = Field(..., description="Radians in (-π, π]")
    fixed_freq: float = Field(..., gt=0, description="Hz")
    residual_rms: float = Field(..., ge=0)
    unphysical: bool = Field(False, description="offset < amplitude, the fit dips below zero")

    @property
    def p_max(self) -> float:
        return self.offset + self.amplitude

    @property
    def p_min(self) -> float:
        return max(0.0, self.offset - self.amplitude)

    @property
    def visibility(self) -> float:
        return visibility(self.p_max, self.p_min)

    @property
    def minimum_delay(self) -> float:
        """Smallest Δτ ≥ 0 where the fitted curve is minimal"""
        period = 1.0 / self.fixed_freq
        delay = (math.pi - self.phase) / (2.0 * math.pi * self.fixed_freq)
        return delay % period

    def model(self, delta_tau) -> np.ndarray:
        tau = np.asarray(delta_tau, dtype=float)
        return self.offset + self.amplitude * np.cos(2.0 * math.pi * self.fixed_freq * tau + self.phase)


def _design(tau: np.ndarray, fixed_freq: float) -> np.ndarray:
    angle = 2.0 * math.pi * fixed_freq * tau
    return np.column_stack([np.ones_like(tau), np.cos(angle), np.sin(angle)])


def fit_fringe(samples: Sequence[Tuple[float, float]], fixed_freq: float) -> FringeFit:
    """
    Linear least squares in (offset, A cos φ, -A sin φ) via the normal equations.
    """
    if len(samples) < 4:
        raise FitError(f"need at least 4 samples, got {len(samples)}")
    if fixed_freq <= 0:
        raise FitError("fixed_freq must be positive")
    tau = np.array([s[0] for s in samples], dtype=float)
    p = np.array([s[1] for s in samples], dtype=float)

    design = _design(tau, fixed_freq)
    normal = design.T @ design
    if np.linalg.matrix_rank(normal) < 3:
        raise FitError("rank-deficient fringe design; samples do not resolve the oscillation")
    coeffs = scipy.linalg.solve(normal, design.T @ p, assume_a="pos")

    offset, c, d = (float(v) for v in coeffs)
    amplitude = math.hypot(c, d)
    phase = math.atan2(-d, c) if amplitude > 0 else 0.0
    residual = p - design @ coeffs
    rms = float(math.sqrt(np.mean(residual ** 2)))

    return FringeFit(
        amplitude=amplitude,
        offset=offset,
        phase=phase,
        fixed_freq=fixed_freq,
        residual_rms=rms,
        unphysical=offset < amplitude,
    )


def fit_residual(samples: Sequence[Tuple[float, float]], fit: FringeFit) -> np.ndarray:
    tau = np.array([s[0] for s in samples], dtype=float)
    p = np.array([s[1] for s in samples], dtype=float)
    return p - fit.model(tau)
