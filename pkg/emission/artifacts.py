"""
Run Artifacts

CSV, JSON snapshot and manifest I/O for spectra, trajectories, peak reports
and sweep tables.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from .ansatz import state_from_record, state_to_record
from .errors import DomainError
from .types import Method, MultiD1State, PeakReport, RunConfig, SpectrumResult, TrajectoryRecord

logger = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ["omega", "N", "method"]
TRAJECTORY_COLUMNS = ["t", "norm", "energy", "sigma_x", "sigma_y", "sigma_z", "parity", "sigma2"]
FLOAT_FORMAT = "%.12g"


def _json_default(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "value"):
        return value.value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(data: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
    return path


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def metadata_path(path: Path) -> Path:
    """Sidecar holding the metadata of a spectrum CSV"""
    return Path(path).with_suffix(".meta.json")


def write_spectrum(spectrum: SpectrumResult, path: Path) -> Path:
    """omega,N,method CSV plus a JSON metadata sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "omega": spectrum.frequencies,
            "N": spectrum.values,
            "method": spectrum.method.value,
        },
        columns=SPECTRUM_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    write_json(spectrum.metadata, metadata_path(path))
    logger.debug(f"Wrote {spectrum.method.value} spectrum to {path}")
    return path


def read_spectrum(path: Path) -> SpectrumResult:
    path = Path(path)
    frame = pd.read_csv(path)
    missing = [c for c in ("omega", "N") if c not in frame.columns]
    if missing:
        raise DomainError(f"{path} lacks spectrum columns {missing}")
    if "method" in frame.columns and len(frame):
        method = Method(str(frame["method"].iloc[0]))
    else:
        method = Method.MULTID1
    sidecar = metadata_path(path)
    metadata = read_json(sidecar) if sidecar.exists() else {}
    metadata.setdefault("source", str(path))
    return SpectrumResult(
        method=method,
        frequencies=frame["omega"].to_numpy(dtype=float),
        values=frame["N"].to_numpy(dtype=float),
        metadata=metadata,
    )


def write_trajectory(record: TrajectoryRecord, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "t": record.times,
            "norm": [o.norm for o in record.observables],
            "energy": [o.energy for o in record.observables],
            "sigma_x": [o.sigma_x for o in record.observables],
            "sigma_y": [o.sigma_y for o in record.observables],
            "sigma_z": [o.sigma_z for o in record.observables],
            "parity": [o.parity for o in record.observables],
            "sigma2": record.sigma2,
        },
        columns=TRAJECTORY_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_trajectory(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    if list(frame.columns) != TRAJECTORY_COLUMNS:
        raise DomainError(f"{path} is not a trajectory CSV")
    return frame


def write_checkpoints(record: TrajectoryRecord, frequencies: np.ndarray, path: Path) -> Path:
    """Photon-number snapshots in long form: t,mode,omega,N (mode 0 is the cavity)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for snapshot in record.photon_numbers:
        for mode, (omega, value) in enumerate(zip(frequencies, snapshot.values)):
            rows.append({"t": snapshot.time, "mode": mode, "omega": omega, "N": value})
    pd.DataFrame(rows, columns=["t", "mode", "omega", "N"]).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )
    return path


def save_state(state: MultiD1State, path: Path) -> Path:
    """JSON snapshot usable for restart"""
    return write_json(state_to_record(state), path)


def load_state(path: Path) -> MultiD1State:
    return state_from_record(read_json(path))


def write_peak_report(reports: Sequence[PeakReport], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        {
            "label": report.label,
            "method": report.method.value,
            "position": peak.position,
            "height": peak.height,
            "fwhm": peak.fwhm,
        }
        for report in reports
        for peak in report.peaks
    ]
    pd.DataFrame(rows, columns=["label", "method", "position", "height", "fwhm"]).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )
    return path


def write_deviation_table(points: List[Dict[str, Any]], path: Path) -> Path:
    """Table of max sigma^2 [M] with rows lambda_c and columns alpha, plus the long form"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(points)
    frame.to_csv(path.with_name(path.stem + "_points.csv"), index=False, float_format=FLOAT_FORMAT)

    def cell(row) -> str:
        if row["status"] != "ok" or row["sigma2_max"] is None or np.isnan(row["sigma2_max"]):
            return f"failed [{row['multiplicity']}]"
        return f"{row['sigma2_max']:.4f} [{row['multiplicity']}]"

    frame["cell"] = frame.apply(cell, axis=1)
    table = frame.pivot(index="lambda_c", columns="alpha", values="cell")
    table.columns = [f"alpha={a:g}" for a in table.columns]
    table.to_csv(path)
    return path


def content_hash(path: Path) -> str:
    """Git-style blob hash of a file"""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    path: Path,
    config: RunConfig,
    artifacts: Sequence[Path],
    results: Dict[str, Any],
) -> Path:
    """Inputs, outcomes and content hashes of everything a run wrote"""
    path = Path(path)
    manifest = {
        "config": config.model_dump(mode="json"),
        "config_sha256": config_hash(config),
        "results": results,
        "artifacts": {
            Path(a).name: content_hash(a) for a in artifacts if Path(a).exists()
        },
    }
    write_json(manifest, path)
    logger.info(f"Wrote manifest {path}")
    return path
