"""
Experiments - Fringe Scans, Visibility Study and Branching-Ratio Sweep

End-to-end orchestration on top of the solver modules. A Simulator owns the
grid, the propagation settings and a cache of stationary-state bases; the
experiment functions turn scan specifications into row tables that the CLI
writes out as CSV.

Independent points can run on a thread pool. Results are always merged in
input order, so tables are identical for any thread count.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

import console
from analytic_models import FringeFit, equi_loss_ratio, fit_fringe, two_path_extrema, TwoPathInputs, two_path_visibility_curve, visibility
from errors import BasisError, ExperimentError, FitError, PropagationError
from lattice_model import DepthDistribution, DriveSchedule, LatticeParams, phase_from_offset, scattering_time_ok
from measurement import PopulationReport, branching_ratio, measure, measure_state, weighted_mean
from propagator import PropagationConfig, propagate
from spectral_grid import SpectralGrid, default_grid
from stationary_states import DEFAULT_CLUSTER_GAP, DEFAULT_LOCALIZATION_THRESHOLD, Method, StateBasis, solve_static

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_TAU_POINTS = 16


def default_tau_values(omega: float, points: int = DEFAULT_TAU_POINTS) -> List[float]:
    """Equally spaced Δτ over one fringe period π/ω, endpoint excluded"""
    if points < 1:
        raise ValueError("points must be at least 1")
    period = math.pi / omega
    return [period * i / points for i in range(points)]


def fringe_frequency(sched: DriveSchedule) -> float:
    """P_L(Δτ) oscillates at 2ω in angular terms, i.e. ω/π Hz"""
    return sched.omega / math.pi


class Simulator:
    """Shared solver state for a batch of experiments"""

    def __init__(self, grid: Optional[SpectralGrid] = None,
                 propagation: PropagationConfig = PropagationConfig(),
                 method: Method = "fourier",
                 localization_threshold: float = DEFAULT_LOCALIZATION_THRESHOLD,
                 cluster_gap: float = DEFAULT_CLUSTER_GAP,
                 threads: int = 1):
        if threads < 1:
            raise ValueError(f"threads must be at least 1, got {threads}")
        self.grid = grid if grid is not None else default_grid()
        self.propagation = propagation
        self.method = method
        self.localization_threshold = localization_threshold
        self.cluster_gap = cluster_gap
        self.threads = threads
        self._bases: Dict[Tuple[float, float], StateBasis] = {}
        self._key_locks: Dict[Tuple[float, float], threading.Lock] = {}
        self._lock = threading.Lock()

    def basis(self, params: LatticeParams) -> StateBasis:
        """Cached solve; different (r, s) keys solve concurrently, equal keys solve once"""
        key = (params.r, params.s)
        with self._lock:
            if key in self._bases:
                return self._bases[key]
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            if key not in self._bases:
                basis = solve_static(
                    params, self.grid, method=self.method,
                    localization_threshold=self.localization_threshold,
                    cluster_gap=self.cluster_gap,
                    wall_width=self.propagation.absorber_width,
                )
                with self._lock:
                    self._bases[key] = basis
            return self._bases[key]

    def prepare(self, params: LatticeParams, depths: DepthDistribution) -> None:
        """Solve every depth up front, in parallel; a failing depth aborts naming its r"""
        def solve(r: float) -> StateBasis:
            try:
                return self.basis(params.with_depth(r))
            except BasisError as exc:
                raise ExperimentError(f"stationary-state solve failed at r={r:g}: {exc}") from exc

        self.map(solve, depths.depths)

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        if self.threads == 1 or len(items) < 2:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def run_point(self, params: LatticeParams, sched: DriveSchedule) -> PopulationReport:
        """Start in the qubit ground state, drive, measure"""
        basis = self.basis(params)
        result = propagate(basis.ground.wavefunction, params, sched, self.propagation)
        return measure(result, basis)

    def run_averaged(self, params: LatticeParams, sched: DriveSchedule,
                     depths: Optional[DepthDistribution] = None) -> PopulationReport:
        if depths is None:
            return self.run_point(params, sched)
        return average_over_depths(depths, lambda r: self.run_point(params.with_depth(r), sched))

    def run_trace(self, params: LatticeParams, sched: DriveSchedule,
                  record_stride: int) -> Tuple[PopulationReport, List[Tuple[float, PopulationReport]]]:
        """Single run with populations recorded every record_stride steps"""
        basis = self.basis(params)
        cfg = self.propagation.model_copy(update={"record_stride": record_stride})
        result = propagate(basis.ground.wavefunction, params, sched, cfg)
        trace = [(t, measure_state(state, basis, absorbed)) for t, state, absorbed in result.snapshots]
        return measure(result, basis), trace


def average_over_depths(dist: DepthDistribution, runner: Callable[[float], PopulationReport]) -> PopulationReport:
    """Probability-weighted mean of per-depth reports"""
    reports = []
    for r in dist.depths:
        try:
            reports.append(runner(r))
        except BasisError as exc:
            raise ExperimentError(f"stationary-state solve failed at r={r:g}: {exc}") from exc
    return weighted_mean(reports, dist.weights)


class FringeScanSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: LatticeParams
    depths: Optional[DepthDistribution] = Field(None, description="Depth average; None runs params.r only")
    sched_base: DriveSchedule = Field(..., description="Drive template; delta_tau is replaced per point")
    tau_values: List[float] = Field(..., min_length=1, description="Δτ values, s")

    @field_validator("tau_values")
    @classmethod
    def _nonnegative(cls, values):
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise ValueError("Δτ values must be finite and nonnegative")
        return values

    @model_validator(mode="after")
    def _covers_period(self):
        span = max(self.tau_values) - min(self.tau_values)
        needed = self.sched_base.fringe_period * (1.0 - 1.0 / len(self.tau_values))
        if span < needed * (1.0 - 1e-9):
            raise ValueError(f"Δτ values span {span:.4g} s, less than one fringe period ({needed:.4g} s needed)")
        return self


class FringeRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    delta_tau: float
    delta_phi: float = Field(..., description="Relative drive phase 2ωΔτ minus the calibration offset, [0, 2π)")
    report: Optional[PopulationReport] = None
    error: Optional[str] = None


def run_fringe(spec: FringeScanSpec, simulator: Simulator, phase_offset: float = 0.0) -> List[FringeRow]:
    """One propagate+measure per Δτ; propagation failures are recorded per row"""
    if not scattering_time_ok(spec.sched_base.with_delay(max(spec.tau_values))):
        console.warning("drive duration is not well below the photon scattering time")
    if spec.depths is not None:
        simulator.prepare(spec.params, spec.depths)

    def point(delta_tau: float) -> FringeRow:
        sched = spec.sched_base.with_delay(delta_tau)
        delta_phi = (phase_from_offset(sched) - phase_offset) % (2.0 * math.pi)
        try:
            report = simulator.run_averaged(spec.params, sched, spec.depths)
        except PropagationError as exc:
            console.warning(f"Δτ={delta_tau:.4e} s failed: {exc}")
            return FringeRow(delta_tau=delta_tau, delta_phi=delta_phi, error=str(exc))
        console.info(f"Δτ={delta_tau:.4e} s  P_L={report.P_L:.6f}")
        return FringeRow(delta_tau=delta_tau, delta_phi=delta_phi, report=report)

    console.print_header(f"Fringe scan: {len(spec.tau_values)} points")
    return simulator.map(point, spec.tau_values)


def fit_rows(rows: Sequence[FringeRow], sched: DriveSchedule) -> FringeFit:
    """Fixed-frequency fit of P_L over the successful rows"""
    samples = [(row.delta_tau, row.report.P_L) for row in rows if row.report is not None]
    return fit_fringe(samples, fringe_frequency(sched))


class PhaseCalibration(BaseModel):
    model_config = ConfigDict(frozen=True)

    minimum_delay: float = Field(..., description="Δτ of the fitted P_L minimum, s")
    phase_offset: float = Field(..., description="2ω times minimum_delay, reduced to [0, 2π)")
    fit: FringeFit


def calibrate_phase_offset(simulator: Simulator, params: LatticeParams, sched: DriveSchedule,
                           points: int = DEFAULT_TAU_POINTS) -> PhaseCalibration:
    """
    Locate the destructive-interference delay at reference parameters.

    Whether Δτ = 0 is the fringe minimum depends on the sign conventions of
    θ(t) and η(t); reports quote Δφ relative to the offset found here.
    """
    spec = FringeScanSpec(params=params, sched_base=sched, tau_values=default_tau_values(sched.omega, points))
    fit = fit_rows(run_fringe(spec, simulator), sched)
    delay = fit.minimum_delay
    offset = phase_from_offset(sched.with_delay(delay))
    console.success(f"calibrated fringe minimum at Δτ={delay:.4e} s (Δφ₀={offset:.4f} rad)")
    return PhaseCalibration(minimum_delay=delay, phase_offset=offset, fit=fit)


class VisibilityRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    a_pm: float
    p_l_pm: Optional[float] = None
    p_l_am: Optional[float] = None
    log2_ratio: Optional[float] = None
    visibility: Optional[float] = None
    p_max: Optional[float] = None
    p_min: Optional[float] = None
    residual_rms: Optional[float] = None
    model_visibility: Optional[float] = None
    model_p_max: Optional[float] = None
    model_p_min: Optional[float] = None
    error: Optional[str] = None


def _visibility_row(spec: FringeScanSpec, simulator: Simulator) -> VisibilityRow:
    a_pm = spec.sched_base.a_pm
    base = spec.sched_base.with_delay(0.0)
    try:
        p_pm = simulator.run_averaged(spec.params, base.with_amplitudes(a_am=0.0), spec.depths).P_L
        p_am = simulator.run_averaged(spec.params, base.with_amplitudes(a_pm=0.0), spec.depths).P_L
    except PropagationError as exc:
        return VisibilityRow(a_pm=a_pm, error=str(exc))
    if p_pm <= 0.0 or p_am <= 0.0:
        return VisibilityRow(
            a_pm=a_pm, p_l_pm=p_pm, p_l_am=p_am,
            error=f"single-drive leakage vanished (P_L^PM={p_pm:.3e}, P_L^AM={p_am:.3e}); ratio undefined",
        )
    log2_ratio = math.log2(p_pm / p_am)
    model_max, model_min = two_path_extrema(TwoPathInputs(p_pm=p_pm, p_am=p_am))
    common = dict(
        a_pm=a_pm, p_l_pm=p_pm, p_l_am=p_am, log2_ratio=log2_ratio,
        model_visibility=two_path_visibility_curve(log2_ratio),
        model_p_max=model_max, model_p_min=model_min,
    )

    fringe = run_fringe(spec, simulator)
    try:
        fit = fit_rows(fringe, spec.sched_base)
        return VisibilityRow(
            visibility=visibility(fit.p_max, fit.p_min), p_max=fit.p_max, p_min=fit.p_min,
            residual_rms=fit.residual_rms, **common,
        )
    except (FitError, ValueError) as exc:
        return VisibilityRow(error=str(exc), **common)


def run_visibility_study(specs: Sequence[FringeScanSpec], simulator: Simulator) -> List[VisibilityRow]:
    """
    Per scan: PM-only and AM-only runs for the ratio axis, the joint fringe,
    its fit-based visibility and the two-path model values. A scan that
    cannot produce a ratio or a fit still yields a row carrying the error.
    """
    if not specs:
        raise ExperimentError("visibility study needs at least one scan")
    rows = []
    for spec in specs:
        row = _visibility_row(spec, simulator)
        if row.error is not None:
            console.warning(f"A_PM={row.a_pm:g}: {row.error}")
        rows.append(row)
    return rows


class SweepSpec(BaseModel):
    """Grid over (A_PM, A_AM, n) at fixed Δτ; A_AM = 0 is always included as the baseline"""
    model_config = ConfigDict(frozen=True)

    params: LatticeParams
    depths: Optional[DepthDistribution] = None
    omega: float = Field(..., gt=0, description="Drive angular frequency, rad/s")
    a_pm: List[float] = Field(..., min_length=1, description="PM amplitudes, rad")
    a_am: List[float] = Field(..., min_length=1, description="AM amplitudes, fraction of depth")
    n: List[int] = Field(..., min_length=1, description="PM period counts")
    delta_tau: float = Field(0.0, ge=0, description="Fixed AM delay, s")

    @field_validator("a_am")
    @classmethod
    def _with_baseline(cls, values):
        if any(not 0.0 <= v < 1.0 for v in values):
            raise ValueError("A_AM values must lie in [0, 1)")
        return sorted(set(values) | {0.0})

    @field_validator("n")
    @classmethod
    def _positive_n(cls, values):
        if any(v < 1 for v in values):
            raise ValueError("n values must be at least 1")
        return values

    def schedules(self) -> List[DriveSchedule]:
        return [
            DriveSchedule(a_pm=a_pm, a_am=a_am, omega=self.omega, n=n, delta_tau=self.delta_tau)
            for a_pm in self.a_pm for n in self.n for a_am in self.a_am
        ]


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    a_pm: float
    a_am: float
    n: int
    P_e: Optional[float] = None
    P_L: Optional[float] = None
    B: Optional[float] = None
    baseline_B: Optional[float] = None
    improvement: Optional[float] = Field(None, description="B over the A_AM = 0 value of the same curve")
    equi_loss_B: Optional[float] = Field(None, description="B at this P_e if leakage stayed at the A_AM = 0 value")
    error: Optional[str] = None


def run_branching_sweep(spec: SweepSpec, simulator: Simulator) -> List[SweepRow]:
    if spec.depths is not None:
        simulator.prepare(spec.params, spec.depths)
    schedules = spec.schedules()

    def point(sched: DriveSchedule):
        try:
            return simulator.run_averaged(spec.params, sched, spec.depths)
        except PropagationError as exc:
            console.warning(f"A_PM={sched.a_pm:g} A_AM={sched.a_am:g} n={sched.n} failed: {exc}")
            return exc

    console.print_header(f"Branching-ratio sweep: {len(schedules)} points")
    outcomes = simulator.map(point, schedules)

    baselines: Dict[Tuple[float, int], PopulationReport] = {}
    for sched, outcome in zip(schedules, outcomes):
        if sched.a_am == 0.0 and isinstance(outcome, PopulationReport):
            baselines[(sched.a_pm, sched.n)] = outcome

    rows = []
    for sched, outcome in zip(schedules, outcomes):
        key = (sched.a_pm, sched.n)
        if not isinstance(outcome, PopulationReport):
            rows.append(SweepRow(a_pm=sched.a_pm, a_am=sched.a_am, n=sched.n, error=str(outcome)))
            continue
        b = branching_ratio(outcome)
        reference = baselines.get(key)
        baseline = branching_ratio(reference) if reference is not None else None
        improvement = equi_loss = None
        if baseline is not None and math.isfinite(baseline) and baseline > 0:
            improvement = b / baseline
        if reference is not None and reference.P_L > 0:
            equi_loss = equi_loss_ratio(outcome.P_e, reference.P_L)
        rows.append(SweepRow(a_pm=sched.a_pm, a_am=sched.a_am, n=sched.n, P_e=outcome.P_e, P_L=outcome.P_L,
                             B=b, baseline_B=baseline, improvement=improvement, equi_loss_B=equi_loss))
    return rows


class CurveSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    a_pm: float
    n: int
    best_a_am: Optional[float] = None
    best_B: Optional[float] = None
    best_improvement: Optional[float] = None
    unimodal: bool = False


def _is_unimodal(values: Sequence[float]) -> bool:
    """Non-decreasing up to one peak, non-increasing after it"""
    diffs = np.diff(np.asarray(values, dtype=float))
    falling = False
    for d in diffs:
        if d < 0:
            falling = True
        elif d > 0 and falling:
            return False
    return True


def summarize_sweep(rows: Sequence[SweepRow]) -> List[CurveSummary]:
    """Best point and shape of each (A_PM, n) curve of B vs A_AM"""
    curves: Dict[Tuple[float, int], List[SweepRow]] = {}
    for row in rows:
        curves.setdefault((row.a_pm, row.n), []).append(row)

    summaries = []
    for (a_pm, n), curve in curves.items():
        valid = sorted((row for row in curve if row.B is not None and math.isfinite(row.B)), key=lambda row: row.a_am)
        if not valid:
            summaries.append(CurveSummary(a_pm=a_pm, n=n))
            continue
        best = max(valid, key=lambda row: row.B)
        summaries.append(CurveSummary(
            a_pm=a_pm, n=n, best_a_am=best.a_am, best_B=best.B, best_improvement=best.improvement,
            unimodal=_is_unimodal([row.B for row in valid]),
        ))
    return summaries
