"""Data ingestion and result serialization.

CSV files use RFC-4180-style quoting with a mandatory header row; numeric
cells are written with 17 significant digits so a write/read round trip is
lossless for doubles. Fit results serialize to a versioned JSON document
whose schema ships with the package (``result_schema.json``).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .data import DataMatrix
from .errors import DataError
from .mixture import ComponentParams, FitConfig, MixtureModel
from .model import FitResult

RESULT_SCHEMA_VERSION = 1
DEFAULT_NA_TOKENS = ("", "NA", "NaN")
_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# CSV data
# ---------------------------------------------------------------------------

def read_csv(path, na_tokens=DEFAULT_NA_TOKENS) -> DataMatrix:
    """Read a header-first numeric CSV; cells matching an NA token become
    missing. Raises with row/column coordinates on ragged or unparseable
    input and rejects rows with every cell missing."""
    na = set(na_tokens)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        p = len(header)
        values, mask = [], []
        for ridx, row in enumerate(reader):
            if len(row) != p:
                raise DataError(f"{path}: row {ridx} has {len(row)} cells, expected {p}")
            vals = np.empty(p)
            obs = np.empty(p, dtype=bool)
            for cidx, cell in enumerate(row):
                token = cell.strip()
                if token in na:
                    vals[cidx] = np.nan
                    obs[cidx] = False
                    continue
                try:
                    parsed = float(token)
                except ValueError:
                    raise DataError(
                        f"{path}: unparseable cell at row {ridx}, column {cidx}: {cell!r}"
                    ) from None
                if not np.isfinite(parsed):
                    raise DataError(
                        f"{path}: non-finite value at row {ridx}, column {cidx}")
                vals[cidx] = parsed
                obs[cidx] = True
            if not obs.any():
                raise DataError(f"{path}: row {ridx} has every cell missing")
            values.append(vals)
            mask.append(obs)
    if not values:
        raise DataError(f"{path}: no data rows")
    return DataMatrix(values=np.array(values), mask=np.array(mask), column_names=list(header))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(data: DataMatrix, path, na_token="NA"):
    """Write a DataMatrix with the package's lossless decimal format."""
    names = data.column_names or [f"x{j}" for j in range(data.p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(data.n):
            writer.writerow([
                _fmt(data.values[i, j]) if data.mask[i, j] else na_token
                for j in range(data.p)
            ])


def write_truth_csv(truth, path):
    """Truth sidecar: label, good flag, and per-coordinate missingness."""
    mask = truth.mask
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        p = 0 if mask is None else mask.shape[1]
        writer.writerow(["label", "good_flag"] + [f"observed_{j}" for j in range(p)])
        for i in range(len(truth.labels)):
            row = [int(truth.labels[i]), int(truth.good_flags[i])]
            if mask is not None:
                row += [int(v) for v in mask[i]]
            writer.writerow(row)


def read_flags_csv(path):
    """Read a labels/flags CSV (columns ``label`` and one of ``good_flag`` /
    ``outlier``); returns (labels, outlier_flags)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        labels, outliers = [], []
        for row in reader:
            if "label" not in row:
                raise DataError(f"{path}: need a 'label' column")
            labels.append(int(float(row["label"])))
            if "outlier" in row and row["outlier"] != "":
                outliers.append(bool(int(float(row["outlier"]))))
            elif "good_flag" in row and row["good_flag"] != "":
                outliers.append(not bool(int(float(row["good_flag"]))))
            else:
                raise DataError(f"{path}: need an 'outlier' or 'good_flag' column")
    return np.array(labels), np.array(outliers, dtype=bool)


def write_table(rows, path):
    """Write a list of dicts as a delimiter-separated table."""
    if not rows:
        raise DataError("nothing to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# result documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run bit-identically (one worker).

    The timestamp comes from the SKEWMIX_TIMESTAMP / SOURCE_DATE_EPOCH
    environment variables when set and is null otherwise, so identical runs
    produce identical documents.
    """

    command: str
    config: dict
    seed: int
    version: str = _VERSION
    timestamp: str | None = None
    input_sha256: str | None = None

    @classmethod
    def build(cls, command: str, config: dict, seed: int, input_path=None) -> "RunManifest":
        digest = None
        if input_path is not None and os.path.exists(input_path):
            digest = hashlib.sha256(open(input_path, "rb").read()).hexdigest()
        stamp = os.environ.get("SKEWMIX_TIMESTAMP") or os.environ.get("SOURCE_DATE_EPOCH")
        return cls(command=command, config=config, seed=seed,
                   timestamp=stamp, input_sha256=digest)

    def to_dict(self) -> dict:
        return {"command": self.command, "config": self.config, "seed": self.seed,
                "version": self.version, "timestamp": self.timestamp,
                "input_sha256": self.input_sha256}


def result_to_document(result: FitResult, manifest: RunManifest | None = None,
                       beta_floor: float = 1.001) -> dict:
    """Stable, versioned JSON-ready view of a fit result."""
    model = result.model
    comps = []
    for c in model.components:
        comps.append({
            "pi": c.pi,
            "mu": c.mu.tolist(),
            "sigma": c.sigma.tolist(),
            "lambda": c.lam.tolist(),
            "alpha": c.alpha,
            "beta": c.beta,
            "beta_at_floor": bool(c.beta <= beta_floor),
        })
    doc = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "kind": "skewmix-fit-result",
        "p": model.p,
        "n": int(result.z_matrix.shape[0]),
        "g": model.g,
        "constraints": {"no_skew": model.no_skew,
                        "no_contamination": model.no_contamination},
        "components": comps,
        "labels": [int(v) for v in result.labels],
        "outlier_flags": [bool(v) for v in result.outlier_flags],
        "z_matrix": result.z_matrix.tolist(),
        "v_matrix": result.v_matrix.tolist(),
        "loglik_trace": [float(v) for v in result.loglik_trace],
        "loglik": float(result.loglik),
        "aic": float(result.aic),
        "bic": float(result.bic),
        "n_params": int(result.n_params),
        "converged": bool(result.converged),
        "n_iters": int(result.n_iters),
        "start_id": int(result.start_id),
        "manifest": manifest.to_dict() if manifest else None,
    }
    return doc


def write_result(result: FitResult, path, manifest: RunManifest | None = None,
                 beta_floor: float = 1.001):
    doc = result_to_document(result, manifest, beta_floor)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_result_document(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "skewmix-fit-result":
        raise DataError(f"{path}: not a fit-result document")
    if doc.get("schema_version") != RESULT_SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported schema version {doc.get('schema_version')}")
    return doc


def model_from_document(doc: dict) -> MixtureModel:
    comps = tuple(
        ComponentParams.from_primary(
            pi=c["pi"], mu=np.array(c["mu"]), sigma=np.array(c["sigma"]),
            lam=np.array(c["lambda"]), alpha=c["alpha"], beta=c["beta"])
        for c in doc["components"]
    )
    return MixtureModel(components=comps, p=doc["p"],
                        no_skew=doc["constraints"]["no_skew"],
                        no_contamination=doc["constraints"]["no_contamination"])


def schema_path() -> str:
    return os.path.join(os.path.dirname(__file__), "result_schema.json")
