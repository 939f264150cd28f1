"""Polarisation state tomography for one and two photons.

Measurement sets
----------------
``single6``
    ``H, V, D, A, R, L`` on the sample photon.
``two_minimal16``
    The 16 product projectors of James et al. (2001), informationally complete.
``two_full36``
    Every pair of the six single-photon projectors.

Labels are tuples of single-photon labels, reference photon first.

Reconstruction is either linear inversion (may return an unphysical matrix) or
maximum likelihood over the Cholesky-parametrised state space, minimising the
Gaussian negative log-likelihood

    L(t) = sum_i (N p_i(t) - n_i)^2 / (2 N p_i(t)).

Cholesky layout: ``T`` is lower triangular with real diagonal ``t[0:d]`` and
the strictly lower entries filled row-major by ``(re, im)`` pairs from
``t[d:]``, so ``t = (1, 0, ..., 0)`` gives ``|H><H|`` (or ``|HH><HH|``).
"""

from __future__ import annotations

import csv
import functools
import io
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .errors import DataError, DimensionError
from .qmath import PAULI, physicalize
from .states import POLARIZATION_KETS, labels_to_ket

log = logging.getLogger(__name__)

SINGLE_LABELS = ("H", "V", "D", "A", "R", "L")
SINGLE_BASES = (("H", "V"), ("D", "A"), ("R", "L"))

MINIMAL16_LABELS = tuple(
    tuple(p)
    for p in (
        "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
        "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
    )
)
FULL36_LABELS = tuple(itertools.product(SINGLE_LABELS, repeat=2))

MODES = ("single6", "two_minimal16", "two_full36")


@dataclass(frozen=True)
class Projector:
    label: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)

    @property
    def name(self) -> str:
        return "".join(self.label)


@dataclass(frozen=True)
class PovmSet:
    mode: str
    projectors: tuple[Projector, ...]

    def __len__(self) -> int:
        return len(self.projectors)

    @property
    def labels(self) -> tuple[tuple[str, ...], ...]:
        return tuple(p.label for p in self.projectors)

    @property
    def n_qubits(self) -> int:
        return len(self.projectors[0].label)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @functools.cached_property
    def matrices(self) -> np.ndarray:
        return np.stack([p.matrix for p in self.projectors])

    @functools.cached_property
    def design(self) -> np.ndarray:
        """``B[i, j] = Tr(Pi_i Gamma_j)`` for the orthonormal Pauli basis ``Gamma``."""
        gam = gamma_basis(self.n_qubits)
        return np.real(np.einsum("kab,jba->kj", self.matrices, gam))


def _projector(label: Sequence[str]) -> Projector:
    ket = labels_to_ket(label)
    return Projector(tuple(label), np.outer(ket, ket.conj()))


@functools.lru_cache(maxsize=None)
def povm_set(mode: str) -> PovmSet:
    """The fixed projector set for ``mode`` (one of ``MODES``)."""
    if mode == "single6":
        labels = tuple((x,) for x in SINGLE_LABELS)
    elif mode == "two_minimal16":
        labels = MINIMAL16_LABELS
    elif mode == "two_full36":
        labels = FULL36_LABELS
    else:
        raise ValueError(f"unknown POVM mode {mode!r}; choose from {MODES}")
    povm = PovmSet(mode, tuple(_projector(lab) for lab in labels))
    if mode == "two_minimal16":
        det = np.linalg.det(povm.design)
        assert abs(det) > 1e-6, f"minimal16 design matrix singular (det={det})"
    return povm


@functools.lru_cache(maxsize=None)
def gamma_basis(n_qubits: int) -> np.ndarray:
    """Pauli products normalised so ``Tr(Gamma_i Gamma_j) = delta_ij``."""
    ops = []
    for idx in itertools.product(range(4), repeat=n_qubits):
        op = np.ones((1, 1), dtype=complex)
        for i in idx:
            op = np.kron(op, PAULI[i])
        ops.append(op / np.sqrt(2**n_qubits))
    return np.stack(ops)


def default_mode(dim: int) -> str:
    return "single6" if dim == 2 else "two_minimal16"


def born_probabilities(rho, povm: PovmSet) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (povm.dim, povm.dim):
        raise DimensionError(f"state of shape {rho.shape} vs {povm.mode} projectors")
    return np.real(np.einsum("kab,ba->k", povm.matrices, rho))


# --------------------------------------------------------------------------
# count records


@dataclass
class CountRecord:
    """Counts per projector label plus the per-basis total ``N``.

    ``counts`` may be real-valued (exact expectations) or integers.
    """

    labels: tuple[tuple[str, ...], ...]
    counts: np.ndarray
    n_total: float | None = None
    source: str = "simulated"

    def __post_init__(self):
        self.labels = tuple(tuple(lab) for lab in self.labels)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (len(self.labels),):
            raise DataError("one count per label required")
        if np.any(self.counts < 0):
            raise DataError("counts must be non-negative")
        if self.n_total is None:
            self.n_total = infer_basis_total(self.labels, self.counts)

    def as_dict(self) -> dict[tuple[str, ...], float]:
        return dict(zip(self.labels, self.counts))

    def vector(self, povm: PovmSet) -> np.ndarray:
        """Counts ordered like ``povm``; raises if any projector is missing."""
        table = self.as_dict()
        missing = [("".join(lab)) for lab in povm.labels if lab not in table]
        if missing:
            raise DataError(f"incomplete count set for {povm.mode}: missing {', '.join(missing)}")
        return np.array([table[lab] for lab in povm.labels])

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# source: {self.source}\n")
        buf.write(f"# n_total: {self.n_total!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["proj_r", "proj_s", "count"])
        for lab, n in zip(self.labels, self.counts):
            r, s = ("", lab[0]) if len(lab) == 1 else lab
            w.writerow([r, s, _fmt_count(n)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "CountRecord":
        return parse_count_csv(Path(path).read_text(encoding="utf-8"), source=f"ingested({path})")


def _fmt_count(n: float) -> str:
    return str(int(n)) if float(n).is_integer() else repr(float(n))


def infer_basis_total(labels: Iterable[tuple[str, ...]], counts) -> float:
    """Mean count sum over every complete measurement basis present."""
    table = dict(zip((tuple(x) for x in labels), counts))
    if not table:
        raise DataError("empty count record")
    n_q = len(next(iter(table)))
    sums = []
    for bases in itertools.product(SINGLE_BASES, repeat=n_q):
        outcomes = list(itertools.product(*bases))
        if all(o in table for o in outcomes):
            sums.append(sum(table[o] for o in outcomes))
    if not sums:
        raise DataError("no complete measurement basis in the count set; cannot infer N")
    return float(np.mean(sums))


def parse_count_csv(text: str, source: str = "ingested") -> CountRecord:
    """Parse ``proj_r,proj_s,count`` rows. ``#`` starts a comment line."""
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        if not header_seen:
            if [f.lower() for f in fields] != ["proj_r", "proj_s", "count"]:
                raise DataError(f"line {lineno}: expected header 'proj_r,proj_s,count', got {stripped!r}")
            header_seen = True
            continue
        if len(fields) != 3:
            raise DataError(f"line {lineno}: expected 3 fields, got {len(fields)}")
        r, s, n = fields
        for lab in (r, s) if r else (s,):
            if lab not in POLARIZATION_KETS:
                raise DataError(f"line {lineno}: unknown projector label {lab!r}")
        try:
            value = float(n)
        except ValueError:
            raise DataError(f"line {lineno}: count {n!r} is not a number") from None
        if not np.isfinite(value) or value < 0:
            raise DataError(f"line {lineno}: count must be finite and non-negative")
        rows.append((lineno, (r, s) if r else (s,), value))
    if not header_seen:
        raise DataError("count file has no header")
    if not rows:
        raise DataError("count file has no data rows")
    widths = {len(lab) for _, lab, _ in rows}
    if len(widths) != 1:
        raise DataError("count file mixes single-channel and two-channel rows")
    seen = {}
    for lineno, lab, _ in rows:
        if lab in seen:
            raise DataError(f"line {lineno}: duplicate projector {''.join(lab)} (first on line {seen[lab]})")
        seen[lab] = lineno
    return CountRecord([lab for _, lab, _ in rows], [v for _, _, v in rows], source=source)


def infer_mode(record: CountRecord) -> str:
    labels = set(record.labels)
    if len(record.labels[0]) == 1:
        return "single6"
    if set(FULL36_LABELS) <= labels:
        return "two_full36"
    return "two_minimal16"


def simulate_counts(rho, povm: PovmSet, n: int, rng: np.random.Generator | None = None, exact: bool = False) -> CountRecord:
    """Noiseless count kernel.

    ``exact=True`` returns expected counts ``N p_i``; otherwise each projector
    gets an independent Poisson draw with that mean.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    p = np.clip(born_probabilities(rho, povm), 0.0, None)
    if exact:
        return CountRecord(povm.labels, n * p, float(n), source="exact")
    if rng is None:
        raise ValueError("sampled counts need an rng")
    return CountRecord(povm.labels, rng.poisson(n * p).astype(float), float(n), source="simulated")


# --------------------------------------------------------------------------
# linear inversion


@functools.lru_cache(maxsize=None)
def _stokes_axis_labels() -> tuple[tuple[str, str], ...]:
    """For each Pauli axis, the (+1, -1) eigen-labels under the ket convention."""
    axes = []
    for sigma in PAULI[1:]:
        for a, b in SINGLE_BASES:
            ka, kb = POLARIZATION_KETS[a], POLARIZATION_KETS[b]
            ea = np.vdot(ka, sigma @ ka).real
            eb = np.vdot(kb, sigma @ kb).real
            if np.isclose(ea, 1) and np.isclose(eb, -1):
                axes.append((a, b))
            elif np.isclose(ea, -1) and np.isclose(eb, 1):
                axes.append((b, a))
    return tuple(axes)


def linear_inversion(counts: CountRecord, povm: PovmSet, n: float | None = None) -> np.ndarray:
    """Reconstruct ``rho`` by direct inversion of the Born rule.

    ``single6`` uses the Stokes-parameter formulas; two-photon sets solve
    ``n / N = B r`` for the Pauli-basis coefficients ``r`` (exact inverse for
    the minimal set, least squares for the overcomplete one). The result is
    Hermitian but may have negative eigenvalues.
    """
    vec = counts.vector(povm)
    n = float(counts.n_total if n is None else n)
    if n <= 0:
        raise DataError("N must be positive")
    if povm.mode == "single6":
        table = dict(zip((lab[0] for lab in povm.labels), vec))
        stokes = [1.0] + [(table[plus] - table[minus]) / n for plus, minus in _stokes_axis_labels()]
        return 0.5 * sum(s * sig for s, sig in zip(stokes, PAULI))
    if povm.mode == "two_minimal16":
        r = np.linalg.solve(povm.design, vec / n)
    else:
        r = np.linalg.lstsq(povm.design, vec / n, rcond=None)[0]
    rho = np.einsum("j,jab->ab", r, gamma_basis(povm.n_qubits))
    return 0.5 * (rho + rho.conj().T)


# --------------------------------------------------------------------------
# Cholesky parametrisation


@functools.lru_cache(maxsize=None)
def _lower_positions(d: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = zip(*[(i, j) for i in range(1, d) for j in range(i)])
    return np.array(rows), np.array(cols)


def cholesky_matrix(t, d: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (d * d,):
        raise DimensionError(f"expected {d * d} Cholesky parameters, got {t.shape}")
    T = np.zeros((d, d), dtype=complex)
    T[np.arange(d), np.arange(d)] = t[:d]
    rows, cols = _lower_positions(d)
    T[rows, cols] = t[d::2] + 1j * t[d + 1 :: 2]
    return T


def rho_from_cholesky(t, d: int | None = None) -> np.ndarray:
    """``rho = T^dag T / Tr(T^dag T)``; positive and unit-trace for any nonzero ``t``."""
    t = np.asarray(t, dtype=float)
    d = d or int(round(np.sqrt(t.size)))
    T = cholesky_matrix(t, d)
    m = T.conj().T @ T
    tr = np.trace(m).real
    if tr <= 0:
        raise ValueError("Cholesky parameters are all zero")
    return m / tr


def cholesky_params(rho, reg: float = 0.0) -> np.ndarray:
    """Parameters ``t`` with ``rho_from_cholesky(t) == rho``.

    ``rho`` must be positive definite; pass ``reg > 0`` to mix in that much
    of the identity first (needed for rank-deficient states).
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    if reg:
        rho = (rho + reg * np.eye(d)) / (1 + reg * d)
    # rho = T^dag T with T lower triangular: Cholesky of the index-reversed matrix.
    rev = rho[::-1, ::-1]
    L = np.linalg.cholesky(0.5 * (rev + rev.conj().T))
    T = L[::-1, ::-1].conj().T
    rows, cols = _lower_positions(d)
    t = np.empty(d * d)
    t[:d] = np.real(np.diag(T))
    off = T[rows, cols]
    t[d::2] = off.real
    t[d + 1 :: 2] = off.imag
    return t


# --------------------------------------------------------------------------
# maximum likelihood


@dataclass(frozen=True)
class MleOptions:
    """Optimiser settings for :func:`mle_reconstruct`.

    ``method="lbfgs"`` uses the analytic gradient; ``"nelder-mead"`` is the
    derivative-free simplex alternative.
    """

    restarts: int = 3
    method: str = "lbfgs"
    max_evals: int = 100_000
    ftol: float = 1e-10
    stall_iters: int = 50
    floor: float = 1e-9
    seed_reg: float = 1e-9


@dataclass
class MleResult:
    rho: np.ndarray
    objective: float
    iterations: int
    converged: bool
    evaluations: int = 0


class _Objective:
    def __init__(self, projectors: np.ndarray, counts: np.ndarray, n: float, floor: float):
        self.P = projectors
        self.n_obs = counts
        self.N = float(n)
        self.d = projectors.shape[-1]
        self.floor = floor * self.N
        self.evals = 0

    def _parts(self, t):
        T = cholesky_matrix(t, self.d)
        m = T.conj().T @ T
        tau = np.trace(m).real
        rho = m / tau
        p = np.real(np.einsum("kab,ba->k", self.P, rho))
        return T, tau, p

    def value(self, t) -> float:
        self.evals += 1
        _, _, p = self._parts(t)
        expected = np.maximum(self.N * p, self.floor)
        return float(np.sum((expected - self.n_obs) ** 2 / (2 * expected)))

    def value_and_grad(self, t):
        self.evals += 1
        T, tau, p = self._parts(t)
        raw = self.N * p
        expected = np.maximum(raw, self.floor)
        loss = float(np.sum((expected - self.n_obs) ** 2 / (2 * expected)))
        g = self.N * (0.5 - self.n_obs**2 / (2 * expected**2))
        g = np.where(raw > self.floor, g, 0.0)
        M = np.einsum("k,kab->ab", g, self.P) - np.dot(g, p) * np.eye(self.d)
        G = 2.0 * (T @ M) / tau
        d = self.d
        rows, cols = _lower_positions(d)
        grad = np.empty(d * d)
        grad[:d] = np.real(np.diag(G))
        off = G[rows, cols]
        grad[d::2] = off.real
        grad[d + 1 :: 2] = off.imag
        return loss, grad


def mle_objective(t, counts: CountRecord, povm: PovmSet, n: float | None = None, floor: float = 1e-9) -> float:
    obj = _Objective(povm.matrices, counts.vector(povm), counts.n_total if n is None else n, floor)
    return obj.value(np.asarray(t, dtype=float))


def _run(obj: _Objective, t0: np.ndarray, opts: MleOptions):
    if opts.method == "lbfgs":
        res = optimize.minimize(
            obj.value_and_grad,
            t0,
            jac=True,
            method="L-BFGS-B",
            options={"maxfun": opts.max_evals, "maxiter": opts.max_evals, "ftol": 1e-15, "gtol": 1e-12},
        )
        # An abnormal line-search exit means no further descent was found at
        # machine precision, which is convergence for this objective.
        converged = bool(res.success) or ("ABNORMAL" in str(res.message) and res.nfev < opts.max_evals)
        return res.x, float(res.fun), int(res.nit), converged
    if opts.method == "nelder-mead":
        return _nelder_mead(obj, t0, opts)
    raise ValueError(f"unknown MLE method {opts.method!r}")


def _nelder_mead(obj: _Objective, t0: np.ndarray, opts: MleOptions):
    best = [np.inf]
    stall = [0]

    class _Stall(Exception):
        pass

    def callback(xk):
        f = obj.value(xk)
        if best[0] - f < opts.ftol:
            stall[0] += 1
        else:
            stall[0] = 0
        best[0] = min(best[0], f)
        if stall[0] >= opts.stall_iters:
            raise StopIteration

    res = optimize.minimize(
        obj.value,
        t0,
        method="Nelder-Mead",
        callback=callback,
        options={"maxfev": opts.max_evals, "xatol": 1e-12, "fatol": opts.ftol, "adaptive": True},
    )
    converged = stall[0] >= opts.stall_iters or bool(res.success)
    return res.x, float(res.fun), int(res.nit), converged


def mle_reconstruct(
    counts: CountRecord,
    povm: PovmSet,
    n: float | None = None,
    options: MleOptions | None = None,
    rng: np.random.Generator | None = None,
) -> MleResult:
    """Maximum-likelihood density matrix for ``counts``.

    The first start is the physicalised linear-inversion estimate; each of
    ``options.restarts`` further starts draws ``t`` from a standard normal
    using ``rng`` (default: a generator seeded with 0, so results are
    reproducible). The best objective wins; ties keep the earliest start.
    """
    opts = options or MleOptions()
    n = float(counts.n_total if n is None else n)
    if n <= 0:
        raise DataError("N must be positive")
    vec = counts.vector(povm)
    rng = rng if rng is not None else np.random.default_rng(0)
    d = povm.dim
    obj = _Objective(povm.matrices, vec, n, opts.floor)

    seed_rho = physicalize(linear_inversion(counts, povm, n))
    starts = [cholesky_params(seed_rho, reg=opts.seed_reg)]
    starts += [rng.standard_normal(d * d) for _ in range(opts.restarts)]

    best = None
    iters = 0
    for t0 in starts:
        x, f, nit, conv = _run(obj, t0, opts)
        iters += nit
        if best is None or f < best[1] - 1e-14:
            best = (x, f, conv)
    x, f, conv = best
    rho = rho_from_cholesky(x, d)
    if not conv:
        log.warning("MLE did not converge within %d evaluations", opts.max_evals)
    return MleResult(rho, f, iters, conv, obj.evals)


def reconstruct(counts: CountRecord, povm: PovmSet, method: str = "mle", **kwargs) -> np.ndarray:
    if method == "linear":
        return linear_inversion(counts, povm)
    if method == "mle":
        return mle_reconstruct(counts, povm, **kwargs).rho
    raise ValueError(f"unknown reconstruction method {method!r}")


__all__ = [
    "CountRecord",
    "MleOptions",
    "MleResult",
    "PovmSet",
    "Projector",
    "born_probabilities",
    "cholesky_params",
    "linear_inversion",
    "mle_reconstruct",
    "parse_count_csv",
    "povm_set",
    "rho_from_cholesky",
    "simulate_counts",
]
