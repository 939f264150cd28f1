"""Serialisation of density matrices, manifests and tables.

Density matrices are stored as JSON with entries as ``[re, im]`` pairs,
row-major, plus the conventions needed to interpret them.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .qmath import FIDELITY_CONVENTION
from .states import BASIS_ORDER, CIRCULAR_HANDEDNESS

DENSITY_FORMAT = "qpol.density_matrix/1"


def conventions(dim: int) -> dict:
    return {
        "basis_order": list(BASIS_ORDER) if dim == 4 else ["H", "V"],
        "first_factor": "reference arm",
        "circular_handedness": CIRCULAR_HANDEDNESS,
        "fidelity_convention": FIDELITY_CONVENTION,
    }


def density_to_dict(rho, **metadata) -> dict:
    rho = np.asarray(rho, dtype=complex)
    return {
        "format": DENSITY_FORMAT,
        "dim": int(rho.shape[0]),
        "conventions": conventions(rho.shape[0]),
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in rho],
        "metadata": metadata,
    }


def density_from_dict(data: dict) -> np.ndarray:
    try:
        entries = data["entries"]
        rho = np.array([[complex(re, im) for re, im in row] for row in entries])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed density-matrix document: {exc}") from None
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (2, 4):
        raise DataError(f"density matrix must be 2x2 or 4x4, got {rho.shape}")
    return rho


def read_density(path) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read density matrix {path}: {exc}") from None
    return density_from_dict(data)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def table_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return str(v).lower()
    return v
