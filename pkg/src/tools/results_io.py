"""
Result and codebook files.

Sweep results are CSV (UTF-8, LF, floats with 9 significant digits);
codebooks are JSON with shifts at full double precision.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np

from src.utils.errors import ConfigError
from src.utils.state import PhaseCodebook, ResultRow

CSV_COLUMNS = ["sweep_var", "sweep_value", "scheme", "mean_rate_bps_hz", "ci95_half", "trials", "seed"]
FLOAT_COLUMNS = ("sweep_value", "mean_rate_bps_hz", "ci95_half")
INT_COLUMNS = ("trials", "seed")


def _fmt(value: float) -> str:
    return "%.9g" % value


def format_csv(rows: Iterable[ResultRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([
            row["sweep_var"],
            _fmt(row["sweep_value"]),
            row["scheme"],
            _fmt(row["mean_rate_bps_hz"]),
            _fmt(row["ci95_half"]),
            int(row["trials"]),
            int(row["seed"]),
        ])
    return buffer.getvalue()


def emit_csv(result, path: Union[str, Path]) -> Path:
    """
    Write an ExperimentResult (anything with .rows) as CSV.

    Raises:
        OSError: naming the path when the file cannot be written
    """
    path = Path(path)
    text = format_csv(result.rows)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OSError(f"cannot write results to {path}: {e.strerror or e}") from e
    return path


def read_csv(path: Union[str, Path]) -> List[ResultRow]:
    """Parse a file written by emit_csv back into rows"""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for raw in reader:
            row = dict(raw)
            for key in FLOAT_COLUMNS:
                row[key] = float(row[key])
            for key in INT_COLUMNS:
                row[key] = int(row[key])
            rows.append(ResultRow(**row))
    return rows


# ========== CODEBOOK JSON ==========

def _finite_or_none(value: float):
    return float(value) if math.isfinite(value) else None


def codebook_to_dict(codebook: PhaseCodebook) -> dict:
    return {
        "K": float(codebook.K),
        "M": codebook.M,
        "weighting": codebook.weighting,
        "objective": codebook.objective,
        "phase_model": codebook.phase_model,
        "shifts": [float(s) for s in codebook.shifts],
        "objective_value": _finite_or_none(codebook.objective_value),
        "mean_abs_error": _finite_or_none(codebook.mean_abs_error),
        "converged": bool(codebook.converged),
        "iterations": int(codebook.iterations),
    }


def codebook_to_json(codebook: PhaseCodebook) -> str:
    """JSON text; json writes floats with round-trip (17 digit) precision"""
    return json.dumps(codebook_to_dict(codebook), indent=2) + "\n"


def codebook_from_json(text: str) -> PhaseCodebook:
    """
    Rebuild a codebook from codebook_to_json output.

    Raises:
        ConfigError: bad JSON, missing fields or invalid shifts
    """
    try:
        data = json.loads(text)
        shifts = np.asarray(data["shifts"], dtype=float)
        if len(shifts) != int(data["M"]):
            raise ValueError(f"M = {data['M']} but {len(shifts)} shifts")
        objective_value = data.get("objective_value")
        mean_abs_error = data.get("mean_abs_error")
        return PhaseCodebook(
            shifts=shifts,
            K=float(data["K"]),
            objective_value=float("nan") if objective_value is None else float(objective_value),
            weighting=data.get("weighting", "unweighted"),
            objective=data.get("objective", "absolute_error"),
            phase_model=data.get("phase_model", "gaussian"),
            converged=bool(data.get("converged", True)),
            iterations=int(data.get("iterations", 0)),
            mean_abs_error=float("nan") if mean_abs_error is None else float(mean_abs_error),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid codebook JSON: {e}") from e
