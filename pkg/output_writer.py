#!/usr/bin/env python3
"""
Output Writer - CSV Tables, Fit Results and Run Manifests

Every experiment emits plain CSV (header row, full double precision) plus a
manifest.json recording what produced it. Floats are written with 17
significant digits so identical runs give byte-identical tables.
"""

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from analytic_models import FringeFit
from experiments import CurveSummary, FringeRow, PhaseCalibration, SweepRow, VisibilityRow
from measurement import CSV_COLUMNS, PopulationReport, branching_ratio
from stationary_states import StateBasis, qubit_splitting, spectrum_table

TOOL_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"


def format_value(value: Any) -> str:
    """CSV cell text; floats at full precision, missing values empty"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


class OutputWriter:
    """Writes the artifacts of one run into a single directory"""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[str] = []

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self.out_dir / name
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        self.written.append(name)
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_json_safe(payload), f, indent=2, sort_keys=True)
            f.write("\n")
        self.written.append(name)
        return path

    def write_manifest(self, subcommand: str, config: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> Path:
        """One manifest per run, listing the files written before it"""
        manifest = {
            "subcommand": subcommand,
            "version": TOOL_VERSION,
            "created": datetime.now(timezone.utc).isoformat(),
            "config": config,
            "files": sorted(self.written),
        }
        if extra:
            manifest.update(extra)
        return self.write_json(MANIFEST_NAME, manifest)

    # Experiment tables

    def write_spectrum(self, basis: StateBasis, name: str = "spectrum.csv") -> Path:
        rows = [(row["well_index"], row["rank"], row["energy"], row["localization"]) for row in spectrum_table(basis)]
        path = self.write_csv(name, ["well_index", "rank", "energy", "localization"], rows)
        self.write_json("spectrum_summary.json", {
            "r": basis.params.r,
            "s": basis.params.s,
            "method": basis.method,
            "n_points": basis.grid.n_points,
            "n_wells": basis.grid.n_wells,
            "qubit_splitting": qubit_splitting(basis),
        })
        return path

    def write_report(self, report: PopulationReport, name: str = "populations.csv") -> Path:
        return self.write_csv(name, CSV_COLUMNS + ["B"], [report.csv_row() + [branching_ratio(report)]])

    def write_trace(self, trace, name: str = "trace.csv") -> Path:
        rows = [[t] + report.csv_row() for t, report in trace]
        return self.write_csv(name, ["t"] + CSV_COLUMNS, rows)

    def write_fringe(self, rows: Sequence[FringeRow], name: str = "fringe.csv") -> Path:
        def cells(row: FringeRow):
            values = row.report.csv_row() if row.report is not None else [None] * len(CSV_COLUMNS)
            return [row.delta_tau, row.delta_phi] + values + [row.error]

        return self.write_csv(name, ["delta_tau", "delta_phi"] + CSV_COLUMNS + ["error"], [cells(r) for r in rows])

    def write_fit(self, fit: FringeFit, name: str = "fringe_fit.json",
                  calibration: Optional[PhaseCalibration] = None) -> Path:
        payload = fit.model_dump()
        payload.update({"p_max": fit.p_max, "p_min": fit.p_min, "minimum_delay": fit.minimum_delay})
        if fit.p_max > 0:
            payload["visibility"] = fit.visibility
        if calibration is not None:
            payload["calibration"] = {
                "minimum_delay": calibration.minimum_delay,
                "phase_offset": calibration.phase_offset,
            }
        return self.write_json(name, payload)

    def write_visibility(self, rows: Sequence[VisibilityRow], name: str = "visibility.csv") -> Path:
        header = list(VisibilityRow.model_fields)
        return self.write_csv(name, header, [[getattr(row, f) for f in header] for row in rows])

    def write_sweep(self, rows: Sequence[SweepRow], summaries: Sequence[CurveSummary],
                    name: str = "sweep.csv") -> Path:
        header = list(SweepRow.model_fields)
        path = self.write_csv(name, header, [[getattr(row, f) for f in header] for row in rows])
        summary_header = list(CurveSummary.model_fields)
        self.write_csv("sweep_summary.csv", summary_header,
                       [[getattr(s, f) for f in summary_header] for s in summaries])
        return path
