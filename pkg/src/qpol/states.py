"""Probe states, partial traces and (multiphoton) Stokes operators.

Basis conventions used everywhere in the package:

* single photon: ``|H> = (1, 0)``, ``|V> = (0, 1)``;
* two photons: ordered basis ``(HH, HV, VH, VV)`` where the first letter is
  the reference-arm photon and the second the sample-arm photon.

Stokes index ``k`` maps onto Pauli matrices as ``0 -> I``, ``1 -> sigma_x``
(diagonal/antidiagonal axis), ``2 -> sigma_y`` (circular axis),
``3 -> sigma_z`` (H/V axis).
"""

from __future__ import annotations

import enum
import itertools
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .qmath import PAULI, pure_density

BASIS_ORDER = ("HH", "HV", "VH", "VV")

KET_H = np.array([1, 0], dtype=complex)
KET_V = np.array([0, 1], dtype=complex)

# R = (H - iV)/sqrt2. With this choice n_R - n_L measures -<sigma_y>.
CIRCULAR_HANDEDNESS = "R=(H-iV)/sqrt2, L=(H+iV)/sqrt2"
POLARIZATION_KETS = {
    "H": KET_H,
    "V": KET_V,
    "D": (KET_H + KET_V) / np.sqrt(2),
    "A": (KET_H - KET_V) / np.sqrt(2),
    "R": (KET_H - 1j * KET_V) / np.sqrt(2),
    "L": (KET_H + 1j * KET_V) / np.sqrt(2),
}


class StateKind(enum.Enum):
    BELL_PSI_PLUS = "bell"
    MAXIMALLY_MIXED = "mixed"
    SUPERPOSITION_HV = "superposition"

    @classmethod
    def parse(cls, value) -> "StateKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown probe {value!r}; choose from {[k.value for k in cls]}") from None

    @property
    def dim(self) -> int | None:
        return {"bell": 4, "superposition": 2}.get(self.value)


def bell_psi_plus_ket() -> np.ndarray:
    return np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)


def make_state(kind, d: int = 2) -> np.ndarray:
    """Density matrix for one of the probe states.

    ``d`` only matters for the maximally mixed probe. A custom state is any
    ndarray, returned as a complex copy.
    """
    if isinstance(kind, np.ndarray):
        return np.array(kind, dtype=complex)
    kind = StateKind.parse(kind)
    if kind is StateKind.BELL_PSI_PLUS:
        return pure_density(bell_psi_plus_ket())
    if kind is StateKind.MAXIMALLY_MIXED:
        return np.eye(d, dtype=complex) / d
    return pure_density((KET_H + KET_V) / np.sqrt(2))


def partial_trace(rho, keep: str) -> np.ndarray:
    """Reduce a two-photon state to one arm.

    Parameters
    ----------
    rho : array_like, shape (4, 4)
    keep : {"reference", "sample"}
        The arm that survives.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DimensionError(f"partial trace needs a 4x4 state, got {rho.shape}")
    r = rho.reshape(2, 2, 2, 2)  # (ref, sample, ref', sample')
    if keep == "reference":
        return np.einsum("ajbj->ab", r)
    if keep == "sample":
        return np.einsum("jajb->ab", r)
    raise ValueError(f"keep must be 'reference' or 'sample', not {keep!r}")


def _as_index(index) -> tuple[int, ...]:
    if isinstance(index, (int, np.integer)):
        index = (int(index),)
    index = tuple(int(i) for i in index)
    if not 1 <= len(index) <= 2 or any(i not in (0, 1, 2, 3) for i in index):
        raise ValueError(f"invalid Stokes index {index}")
    return index


def stokes_operator(index, convention: str = "pauli") -> np.ndarray:
    """Stokes operator for a one- or two-photon index.

    ``convention="pauli"`` gives bare Pauli tensor products; ``"half"`` gives
    the Schwinger-boson operators restricted to one photon per arm, i.e. each
    single-photon factor carries a 1/2.
    """
    index = _as_index(index)
    if convention not in ("pauli", "half"):
        raise ValueError(f"unknown convention {convention!r}")
    scale = 0.5 if convention == "half" else 1.0
    op = np.ones((1, 1), dtype=complex)
    for i in index:
        op = np.kron(op, scale * PAULI[i])
    return op


def _n_photons(d: int) -> int:
    if d == 2:
        return 1
    if d == 4:
        return 2
    raise DimensionError(f"Stokes expansion supports d in (2, 4), got {d}")


def stokes_expand(rho) -> np.ndarray:
    """Multiphoton Stokes parameters ``S[i1, ..., iN] = Tr(rho S_{i1..iN})``.

    Returns a real array of shape ``(4,)`` or ``(4, 4)``.
    """
    rho = np.asarray(rho, dtype=complex)
    n = _n_photons(rho.shape[0])
    out = np.zeros((4,) * n)
    for idx in itertools.product(range(4), repeat=n):
        out[idx] = np.real(np.trace(rho @ stokes_operator(idx)))
    return out


def stokes_reconstruct(coeffs) -> np.ndarray:
    """Inverse of :func:`stokes_expand`: ``rho = 2^-N sum S_i S_i``."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.ndim
    rho = np.zeros((2**n, 2**n), dtype=complex)
    for idx in itertools.product(range(4), repeat=n):
        rho += coeffs[idx] * stokes_operator(idx)
    return rho / 2**n


def polarization_ket(label: str) -> np.ndarray:
    """Single-photon ket for ``H, V, D, A, R, L`` (see ``CIRCULAR_HANDEDNESS``)."""
    try:
        return POLARIZATION_KETS[label].copy()
    except KeyError:
        raise ValueError(f"unknown polarisation label {label!r}") from None


def labels_to_ket(labels: Sequence[str] | str) -> np.ndarray:
    """Product ket for a label string such as ``"H"`` or ``"DR"`` (reference first)."""
    ket = np.ones(1, dtype=complex)
    for lab in labels:
        ket = np.kron(ket, polarization_ket(lab))
    return ket
