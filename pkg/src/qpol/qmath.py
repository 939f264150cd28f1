"""Small dense complex linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. Every
routine here targets 2x2 and 4x4 operators; nothing is tuned for larger sizes.
Functions that accept density matrices also accept stacks of them (leading
batch axes) where noted, which keeps grid searches vectorised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotHermitianError

PHYSICAL_TOL = 1e-10
SPECTRAL_TOL = 1e-9

FIDELITY_CONVENTION = "uhlmann_squared: F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2"

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(a, b) -> np.ndarray:
    """Kronecker product; the first factor is the reference arm."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def hermiticity_defect(h: np.ndarray) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - dagger(h)))) if h.size else 0.0


def eigh_hermitian(h, tol: float = PHYSICAL_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix (or a stack of them).

    Parameters
    ----------
    h : array_like, shape (..., d, d)
        Hermitian input. Checked against ``tol`` before decomposing.
    tol : float
        Maximum tolerated entry of ``h - h^dag``.

    Returns
    -------
    eigenvalues : ndarray, shape (..., d)
        Real, ascending.
    eigenvectors : ndarray, shape (..., d, d)
        Orthonormal columns; column ``k`` belongs to ``eigenvalues[..., k]``.

    Raises
    ------
    NotHermitianError
        If the Hermiticity defect exceeds ``tol``. The defect is attached to
        the exception.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] != h.shape[-2]:
        raise DimensionError(f"expected square matrix, got shape {h.shape}")
    defect = hermiticity_defect(h)
    if defect > tol:
        raise NotHermitianError(defect, tol)
    # Symmetrise so LAPACK sees an exactly Hermitian input.
    return np.linalg.eigh(0.5 * (h + dagger(h)))


# Eigenvalues below this fraction of the largest are round-off; their square
# roots (~1e-8 for a 1e-16 artefact) would otherwise leak into fidelities.
_RANK_CUT = 1e-14


def _psd_factor(m: np.ndarray) -> np.ndarray:
    """``W`` with ``W W^dag = m`` (batched), dropping round-off eigenvalues."""
    w, v = np.linalg.eigh(0.5 * (m + dagger(m)))
    cut = _RANK_CUT * np.max(np.abs(w), axis=-1, keepdims=True)
    w = np.where(w > cut, w, 0.0)
    return v * np.sqrt(w)[..., None, :]


def fidelity(rho, sigma) -> np.ndarray | float:
    """Uhlmann fidelity, squared convention.

    ``F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``, evaluated as the squared
    nuclear norm of ``W_rho^dag W_sigma`` for factors ``rho = W W^dag``.
    Negative (and negligible) eigenvalues are clamped to zero before the
    square roots. Either argument may carry leading batch axes; they
    broadcast against each other.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape[-2:] != sigma.shape[-2:]:
        raise DimensionError(f"fidelity of {rho.shape[-2:]} and {sigma.shape[-2:]} states")
    overlap = dagger(_psd_factor(rho)) @ _psd_factor(sigma)
    f = np.sum(np.linalg.svd(overlap, compute_uv=False), axis=-1) ** 2
    f = np.clip(f, 0.0, 1.0)
    return float(f) if f.ndim == 0 else f


def purity(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.trace(rho @ rho)))


_YY = np.kron(SIGMA_Y, SIGMA_Y).real


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state.

    The decreasing square roots of the spectrum of ``rho (Y rho* Y)`` are the
    singular values of ``W^dag Y W*`` for ``rho = W W^dag``, which avoids
    taking square roots of round-off eigenvalues.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DimensionError(f"concurrence needs a 4x4 state, got {rho.shape}")
    w = _psd_factor(rho)
    lam = np.linalg.svd(dagger(w) @ _YY @ w.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    """Ginibre-random density matrix ``G G^dag / Tr(G G^dag)``.

    ``G`` has i.i.d. standard complex normal entries, which gives the
    Hilbert-Schmidt measure on full-rank states.
    """
    if d < 2:
        raise DimensionError("dimension must be at least 2")
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def physicalize(m) -> np.ndarray:
    """Closest-in-spectrum physical state: clamp negative eigenvalues, renormalise."""
    m = np.asarray(m, dtype=complex)
    w, v = np.linalg.eigh(0.5 * (m + dagger(m)))
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return np.eye(m.shape[0], dtype=complex) / m.shape[0]
    w = w / w.sum()
    return (v * w) @ v.conj().T


@dataclass(frozen=True)
class PhysicalityReport:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    tol: float

    @property
    def ok(self) -> bool:
        return (
            self.hermiticity_defect <= self.tol
            and self.trace_defect <= self.tol
            and self.min_eigenvalue >= -self.tol
        )

    def __bool__(self) -> bool:
        return self.ok

    def as_dict(self) -> dict:
        return {
            "physical": self.ok,
            "hermiticity_defect": self.hermiticity_defect,
            "trace_defect": self.trace_defect,
            "min_eigenvalue": self.min_eigenvalue,
            "tol": self.tol,
        }


def check_physical(m, tol: float = PHYSICAL_TOL) -> PhysicalityReport:
    """Diagnose whether ``m`` is a valid density matrix. Never raises."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return PhysicalityReport(np.inf, np.inf, -np.inf, tol)
    herm = hermiticity_defect(m)
    tr = abs(np.trace(m) - 1.0)
    w = np.linalg.eigvalsh(0.5 * (m + dagger(m)))
    return PhysicalityReport(herm, float(tr), float(w[0]), tol)


def pure_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())
