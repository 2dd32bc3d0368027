# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Deterministic result files and the sha256 manifest.

CSV: header row, comma separated, LF line endings, floats written with repr() so the
same run always produces the same bytes. JSON: sorted keys, two-space indent, NaN and
infinities written as null, trailing newline.

Layout of an output directory:

    config.json      resolved configuration (always present)
    trace.csv        step, sample_id, loss, exact_loss, success_prob, beta, gamma, accepted
    trace.json       TrainTrace summary
    report.json      EvalReport
    spectrum.csv     index, eigenvalue
    spectrum.json    SpectrumReport summary
    <name>.csv       extra tables (curves, sweeps, reuse events)
    manifest.json    {"schema_version": 1, "files": {name: sha256}}
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Final, Iterable, Sequence

import numpy as np

from .evaluation import EvalReport
from .hamiltonians import SpectrumReport
from .trainer import TrainTrace

log = logging.getLogger(__name__)

SCHEMA_VERSION: Final[int] = 1
MANIFEST_NAME: Final[str] = "manifest.json"
CONFIG_NAME: Final[str] = "config.json"
TRACE_HEADER: Final[tuple[str, ...]] = (
    "step", "sample_id", "loss", "exact_loss", "success_prob", "beta", "gamma", "accepted",
)


class ManifestError(ValueError):
    """Raised when a manifest is missing, malformed or disagrees with the files on disk."""
    pass


Table = tuple[Sequence[str], Sequence[Sequence[Any]]]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ManifestError(
                    f"{path.name}: row of {len(row)} values, header has {len(header)}"
                )
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ManifestError(f"{Path(path).name}: empty CSV file")
    return rows[0], rows[1:]


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(obj.value, str):  # str enums
        return obj.value
    return obj


def dumps_json(payload: Any) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.write_text(dumps_json(payload), encoding="utf-8", newline="\n")
    return path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# run bundles
# ---------------------------------------------------------------------------

def trace_table(trace: TrainTrace) -> Table:
    rows = [
        (r.step, r.sample_id, r.loss, r.exact_loss, r.success_prob, r.beta, r.gamma, r.accepted)
        for r in trace.records
    ]
    return TRACE_HEADER, rows


def spectrum_table(report: SpectrumReport) -> Table:
    return ("index", "eigenvalue"), [(i, float(e)) for i, e in enumerate(report.eigenvalues)]


@dataclass(eq=False)
class RunArtifacts:
    """Everything one command produced; unset parts are simply not written."""

    config: dict
    trace: TrainTrace | None = None
    report: EvalReport | None = None
    spectrum: SpectrumReport | None = None
    tables: dict[str, Table] = field(default_factory=dict)
    summaries: dict[str, dict] = field(default_factory=dict)


def persist(artifacts: RunArtifacts, out_dir: str | Path) -> dict[str, str]:
    """Write all parts plus manifest.json; returns {file name: sha256}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = [write_json(out / CONFIG_NAME, artifacts.config)]
    if artifacts.trace is not None:
        written.append(write_csv(out / "trace.csv", *trace_table(artifacts.trace)))
        written.append(write_json(out / "trace.json", artifacts.trace.summary()))
    if artifacts.report is not None:
        written.append(write_json(out / "report.json", artifacts.report.to_dict()))
    if artifacts.spectrum is not None:
        written.append(write_csv(out / "spectrum.csv", *spectrum_table(artifacts.spectrum)))
        written.append(write_json(out / "spectrum.json", artifacts.spectrum.summary()))
    for name, (header, rows) in sorted(artifacts.tables.items()):
        written.append(write_csv(out / f"{name}.csv", header, rows))
    for name, payload in sorted(artifacts.summaries.items()):
        written.append(write_json(out / f"{name}.json", payload))
    files = {p.name: sha256_file(p) for p in written}
    write_json(out / MANIFEST_NAME, {"schema_version": SCHEMA_VERSION, "files": files})
    log.info("wrote %d files to %s", len(files), out)
    return files


def load_manifest(out_dir: str | Path) -> dict[str, str]:
    path = Path(out_dir) / MANIFEST_NAME
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"manifest: {path} not found")
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest: invalid JSON in {path}: {e}")
    if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
        raise ManifestError(f"manifest: schema_version must be {SCHEMA_VERSION}")
    files = data.get("files")
    if not isinstance(files, dict):
        raise ManifestError("manifest: 'files' must be a mapping")
    return {str(k): str(v) for k, v in files.items()}


def verify_manifest(out_dir: str | Path, *, strict: bool = True) -> list[str]:
    """Names of files that are missing or whose hash differs from the manifest."""
    out = Path(out_dir)
    bad = [
        name for name, digest in sorted(load_manifest(out).items())
        if not (out / name).is_file() or sha256_file(out / name) != digest
    ]
    if bad and strict:
        raise ManifestError(f"manifest: content mismatch for {', '.join(bad)}")
    return bad
