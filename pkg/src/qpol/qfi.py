"""Quantum Fisher information of the polarimetry outputs and Cramer-Rao bounds.

All information values are per observation in rad^-2; variance bounds are in
rad^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import Scenario
from .errors import UnphysicalStateError, UnsupportedScenarioError
from .qmath import check_physical, dagger, eigh_hermitian
from .states import StateKind, bell_psi_plus_ket, KET_H, KET_V

SUPPORT_EPS = 1e-12
DEFAULT_STEP = 1e-6
# Information below this is round-off from an alpha-independent state.
ZERO_INFO = 1e-10


@dataclass(frozen=True)
class ParamState:
    """A state at ``alpha`` together with its alpha-derivative.

    ``value`` is a ket when ``pure`` is true and a density matrix otherwise.
    """

    value: np.ndarray
    derivative: np.ndarray
    alpha: float
    pure: bool
    method: str = "analytic"
    fd_error: float | None = None


@dataclass(frozen=True)
class QfiResult:
    value: float
    scenario: str = ""
    alpha: float = float("nan")
    m: int = 1

    @property
    def qcrb(self) -> float:
        return qcrb(self, self.m)

    @property
    def no_information(self) -> bool:
        return self.value <= ZERO_INFO


def _probe_ket(probe: StateKind) -> np.ndarray | None:
    if probe is StateKind.BELL_PSI_PLUS:
        return bell_psi_plus_ket()
    if probe is StateKind.SUPERPOSITION_HV:
        return (KET_H + KET_V) / np.sqrt(2)
    return None


def _pure_output(sc: Scenario, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    ch = sc.channel(alpha)
    psi_in = _probe_ket(sc.probe)
    v = ch.operator() @ psi_in
    dv = ch.operator_derivative() @ psi_in
    norm = np.linalg.norm(v)
    if norm**2 < 1e-12:
        raise UnsupportedScenarioError(f"{sc.name} fully blocks the probe at alpha={alpha}")
    psi = v / norm
    dpsi = dv / norm - v * np.real(np.vdot(v, dv)) / norm**3
    return psi, dpsi


def _mixed_output(sc: Scenario, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    ch = sc.channel(alpha)
    rho_in = sc.probe_state()
    u, du = ch.operator(), ch.operator_derivative()
    out = u @ rho_in @ dagger(u)
    dout = du @ rho_in @ dagger(u) + u @ rho_in @ dagger(du)
    tr = np.trace(out).real
    if tr < 1e-12:
        raise UnsupportedScenarioError(f"{sc.name} fully blocks the probe at alpha={alpha}")
    dtr = np.trace(dout).real
    rho = out / tr
    return rho, dout / tr - rho * dtr / tr


def channel_derivative(sc: Scenario, alpha: float, method: str = "analytic", h: float = DEFAULT_STEP) -> ParamState:
    """Output state of ``sc`` at ``alpha`` and its derivative.

    ``method`` is ``"analytic"`` (exact Jones-matrix derivative, including the
    post-selection renormalisation) or ``"central_diff"`` with step ``h``.
    Pure probes yield kets, mixed probes density matrices. For central
    differences ``fd_error`` holds the max entrywise gap to the step ``h/2``
    estimate, a cheap Richardson check on the truncation error.
    """
    pure = _probe_ket(sc.probe) is not None
    fn = _pure_output if pure else _mixed_output
    fd_error = None
    if method == "analytic":
        value, deriv = fn(sc, alpha)
    elif method == "central_diff":
        value, _ = fn(sc, alpha)

        def diff(step):
            return (fn(sc, alpha + step)[0] - fn(sc, alpha - step)[0]) / (2 * step)

        deriv = diff(h)
        fd_error = float(np.max(np.abs(deriv - diff(h / 2))))
    else:
        raise ValueError(f"unknown derivative method {method!r}")
    return ParamState(value, deriv, float(alpha), pure, method, fd_error)


def qfi_pure(ps: ParamState, tol: float = 1e-10) -> QfiResult:
    """``F = 4 (<d psi|d psi> - |<psi|d psi>|^2)`` for a normalised ket."""
    psi, dpsi = ps.value, ps.derivative
    norm_defect = abs(np.vdot(psi, psi).real - 1.0)
    if norm_defect > tol:
        raise UnphysicalStateError(f"ket not normalised (|<psi|psi> - 1| = {norm_defect:.2e})")
    f = 4.0 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2)
    return QfiResult(float(max(f, 0.0)), alpha=ps.alpha)


def qfi_mixed(ps: ParamState, eps: float = SUPPORT_EPS, tol: float = 1e-10) -> QfiResult:
    """Mixed-state QFI in the eigenbasis of ``rho``.

    ``F = 2 sum_{i,j} |<e_i|d rho|e_j>|^2 / (lambda_i + lambda_j)`` over pairs
    with ``lambda_i + lambda_j > eps``. This needs no eigenvector derivatives
    and so stays well defined for degenerate spectra.
    """
    rho, drho = np.asarray(ps.value), np.asarray(ps.derivative)
    if ps.pure:
        rho = np.outer(rho, rho.conj())
        drho = np.outer(drho, ps.value.conj()) + np.outer(ps.value, drho.conj())
    report = check_physical(rho, tol)
    if not report:
        raise UnphysicalStateError(f"state is not physical: {report.as_dict()}")
    lam, vecs = eigh_hermitian(rho)
    lam = np.clip(lam, 0.0, None)
    d_eig = dagger(vecs) @ drho @ vecs
    denom = lam[:, None] + lam[None, :]
    mask = denom > eps
    f = 2.0 * np.sum(np.abs(d_eig[mask]) ** 2 / denom[mask])
    return QfiResult(float(f), alpha=ps.alpha)


def scenario_qfi(sc: Scenario, alpha: float, method: str = "analytic", h: float = DEFAULT_STEP, m: int = 1) -> QfiResult:
    ps = channel_derivative(sc, alpha, method=method, h=h)
    res = qfi_pure(ps) if ps.pure else qfi_mixed(ps)
    return QfiResult(res.value, sc.name, float(alpha), m)


def superposition_qwp_formula(alpha):
    """Closed-form QFI for the QWP acting on (H+V)/sqrt2: ``8 - 4 cos^2(2 alpha)``."""
    return 8.0 - 4.0 * np.cos(2 * np.asarray(alpha)) ** 2


def qcrb(f: QfiResult | float, m: int = 1, bias_slope: float | None = None) -> float:
    """Quantum Cramer-Rao variance bound ``(1 + b')^2 / (m F)``.

    Returns ``inf`` when the information vanishes (below ``ZERO_INFO``).
    """
    if m < 1:
        raise ValueError("observation count m must be >= 1")
    value = f.value if isinstance(f, QfiResult) else float(f)
    if value <= ZERO_INFO:
        return float("inf")
    num = 1.0 if bias_slope is None else (1.0 + bias_slope) ** 2
    return num / (m * value)
