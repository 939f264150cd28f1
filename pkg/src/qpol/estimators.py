"""Angle estimators, bias statistics and the noise-strength sweep.

Two estimators are provided:

* ``alpha1`` reads the angle off two density-matrix elements;
* ``alpha2`` maximises the fidelity between the measured state and the
  ideal output family ``alpha -> channel_alpha(probe)`` over ``[0, pi/2]``.

Angles are radians internally; reports carry degree mirrors.
"""

from __future__ import annotations

import enum
import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .channels import Configuration, Element, Scenario
from .errors import UnsupportedScenarioError
from .noise import NoiseConfig, noisy_counts
from .qmath import fidelity
from .states import StateKind
from .tomography import MleOptions, default_mode, mle_reconstruct, povm_set

GRID_POINTS = 1801
REFINE_TOL = 1e-5
_GOLDEN = (math.sqrt(5) - 1) / 2


class EstimatorKind(enum.Enum):
    ALPHA1 = "alpha1"
    ALPHA2 = "alpha2"

    @classmethod
    def parse(cls, value) -> "EstimatorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown estimator {value!r}; choose 'alpha1' or 'alpha2'") from None


@dataclass(frozen=True)
class AngleEstimate:
    alpha: float
    estimator: str
    clamped: bool = False
    limit: bool = False
    no_information: bool = False

    @property
    def degrees(self) -> float:
        return math.degrees(self.alpha)

    def __float__(self) -> float:
        return self.alpha

    def flags(self) -> list[str]:
        return [name for name in ("clamped", "limit", "no_information") if getattr(self, name)]


def _is_default_probe(sc: Scenario) -> bool:
    if sc.configuration is Configuration.NONLOCAL:
        return sc.probe is StateKind.BELL_PSI_PLUS
    return sc.probe is StateKind.MAXIMALLY_MIXED


def check_alpha1_scenario(sc: Scenario) -> None:
    if sc.element is Element.QWP and sc.configuration is Configuration.LOCAL:
        raise UnsupportedScenarioError(
            "alpha1 is undefined for the local QWP: its output is alpha-independent "
            "(zero quantum Fisher information), so no angle can be estimated"
        )
    if not _is_default_probe(sc):
        raise UnsupportedScenarioError(f"alpha1 is defined only for Bell / maximally mixed probes, not {sc.name}")


def alpha_hat_1(rho, sc: Scenario, clamp_tol: float = 1e-12) -> AngleEstimate:
    """Element-ratio estimator.

    LP (local or nonlocal): ``arctan(sqrt(rho_11 / rho_22))``.
    Nonlocal QWP: ``arccos(sqrt(2 (rho_33 - rho_44))) / 2``, which is
    identifiable on ``[0, pi/4]`` only. Indices are 1-based in the package
    basis order. Arguments leaving their domain by more than ``clamp_tol``
    set the ``clamped`` flag.
    """
    check_alpha1_scenario(sc)
    rho = np.asarray(rho, dtype=complex)
    if sc.element is Element.LP:
        r11, r22 = rho[0, 0].real, rho[1, 1].real
        if r22 < 1e-12:
            return AngleEstimate(math.pi / 2, "alpha1", limit=True)
        ratio = r11 / r22
        clamped = ratio < -clamp_tol
        return AngleEstimate(math.atan(math.sqrt(max(ratio, 0.0))), "alpha1", clamped=clamped)
    x = 2.0 * (rho[2, 2].real - rho[3, 3].real)
    clamped = x < -clamp_tol or x > 1 + clamp_tol
    x = min(max(x, 0.0), 1.0)
    return AngleEstimate(0.5 * math.acos(math.sqrt(x)), "alpha1", clamped=clamped)


@functools.lru_cache(maxsize=32)
def _family(sc: Scenario, n: int) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(0.0, math.pi / 2, n)
    return grid, np.stack([sc.ideal_output(a) for a in grid])


def fidelity_landscape(rho, sc: Scenario, n: int = GRID_POINTS) -> tuple[np.ndarray, np.ndarray]:
    grid, fam = _family(sc, n)
    return grid, fidelity(np.asarray(rho, dtype=complex), fam)


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def alpha_hat_2(rho_exp, sc: Scenario, n_grid: int = GRID_POINTS, tol: float = REFINE_TOL) -> AngleEstimate:
    """Fidelity-maximising estimator over ``[0, pi/2]``.

    A grid pass (0.05 deg spacing by default) picks the best point, ties going
    to the smaller angle; golden-section search then refines within one grid
    step on each side. A flat landscape returns 0 with ``no_information`` set.
    """
    rho_exp = np.asarray(rho_exp, dtype=complex)
    grid, fids = fidelity_landscape(rho_exp, sc, n_grid)
    if fids.max() - fids.min() < 1e-12:
        return AngleEstimate(0.0, "alpha2", no_information=True)
    k = int(np.argmax(fids))
    step = grid[1] - grid[0]
    lo, hi = max(grid[0], grid[k] - step), min(grid[-1], grid[k] + step)

    def f(a: float) -> float:
        return fidelity(rho_exp, sc.ideal_output(a))

    x, fx = _golden_max(f, lo, hi, tol)
    if fx < fids[k]:
        x = grid[k]
    return AngleEstimate(float(x), "alpha2")


def estimate(rho, sc: Scenario, kind) -> AngleEstimate:
    kind = EstimatorKind.parse(kind)
    return alpha_hat_1(rho, sc) if kind is EstimatorKind.ALPHA1 else alpha_hat_2(rho, sc)


@dataclass(frozen=True)
class EstimationReport:
    estimates: tuple[float, ...]
    true_alpha: float
    mean: float
    bias: float
    variance: float
    qcrb_reference: float | None = None

    @property
    def abs_bias(self) -> float:
        return abs(self.bias)

    @property
    def mean_deg(self) -> float:
        return math.degrees(self.mean)

    @property
    def bias_deg(self) -> float:
        return math.degrees(self.bias)

    @property
    def variance_deg2(self) -> float:
        return math.degrees(1.0) ** 2 * self.variance


def bias_variance(estimates, true_alpha: float, qcrb_reference: float | None = None) -> EstimationReport:
    """Sample mean, signed bias ``mean - true`` and unbiased variance."""
    est = np.asarray([float(e) for e in estimates], dtype=float)
    if est.size < 2:
        raise ValueError("need at least two estimates")
    mean = float(est.mean())
    return EstimationReport(tuple(est), float(true_alpha), mean, mean - float(true_alpha), float(est.var(ddof=1)), qcrb_reference)


# --------------------------------------------------------------------------
# sweeps


SWEEP_COLUMNS = ("q", "trial_count", "mean_abs_bias_deg", "var_deg2", "estimator", "scenario")


@dataclass(frozen=True)
class SweepRow:
    q: float
    trial_count: int
    mean_abs_bias_deg: float
    var_deg2: float
    estimator: str
    scenario: str
    bias_deg: float = 0.0
    median_abs_error_deg: float = 0.0


@dataclass
class SweepResult:
    rows: list[SweepRow]
    estimates: dict = field(default_factory=dict, repr=False)

    def trend(self, estimator: str) -> float:
        """Spearman correlation between ``q`` and mean |bias| for one estimator."""
        sel = [r for r in self.rows if r.estimator == estimator]
        if len(sel) < 2:
            return float("nan")
        rho = stats.spearmanr([r.q for r in sel], [r.mean_abs_bias_deg for r in sel]).statistic
        return float(rho)


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(trial,))


def run_trial(
    sc: Scenario,
    alpha: float,
    cfg: NoiseConfig,
    estimators: tuple[str, ...],
    seed: np.random.SeedSequence,
    povm_mode: str | None = None,
    mle: MleOptions | None = None,
) -> dict[str, float]:
    """One full pipeline: noisy counts, MLE reconstruction, then every estimator.

    The noise and optimiser restarts draw from two independent child streams
    of ``seed``.
    """
    noise_ss, mle_ss = seed.spawn(2)
    povm = povm_set(povm_mode or default_mode(sc.dim))
    counts = noisy_counts(sc, alpha, povm, cfg, np.random.default_rng(noise_ss))
    rho_hat = mle_reconstruct(counts, povm, options=mle, rng=np.random.default_rng(mle_ss)).rho
    return {name: estimate(rho_hat, sc, name).alpha for name in estimators}


def _trial_job(args):
    return run_trial(*args)


def bias_sweep(
    sc: Scenario,
    estimators,
    q_grid,
    cfg_base: NoiseConfig,
    trials: int,
    alpha: float = math.radians(37.0),
    povm_mode: str | None = None,
    mle: MleOptions | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Bias and variance of each estimator versus noise strength ``q``.

    ``q`` sets ``q1 = q2 = 1 - q``. Trial ``k`` reuses the seed
    ``SeedSequence(cfg_base.seed, spawn_key=(k,))`` at every grid point
    (common random numbers), which keeps the trend in ``q`` free of
    between-point sampling noise. Output is independent of ``jobs``.
    """
    estimators = tuple(EstimatorKind.parse(e).value for e in estimators)
    if EstimatorKind.ALPHA1.value in estimators:
        check_alpha1_scenario(sc)
    q_grid = [float(q) for q in q_grid]
    if not q_grid or any(not 0.0 <= q <= 1.0 for q in q_grid):
        raise ValueError("q_grid must be a non-empty subset of [0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")

    tasks = [
        (sc, alpha, cfg_base.with_strength(q), estimators, trial_seed(cfg_base.seed, k), povm_mode, mle)
        for q in q_grid
        for k in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_trial_job(t) for t in tasks]

    rows = []
    collected = {}
    for qi, q in enumerate(q_grid):
        chunk = results[qi * trials : (qi + 1) * trials]
        for name in estimators:
            est = np.array([r[name] for r in chunk])
            collected[(q, name)] = est
            err = est - alpha
            var = float(est.var(ddof=1)) if trials > 1 else 0.0
            rows.append(
                SweepRow(
                    q=q,
                    trial_count=trials,
                    mean_abs_bias_deg=abs(math.degrees(float(err.mean()))),
                    var_deg2=math.degrees(1.0) ** 2 * var,
                    estimator=name,
                    scenario=sc.name,
                    bias_deg=math.degrees(float(err.mean())),
                    median_abs_error_deg=math.degrees(float(np.median(np.abs(err)))),
                )
            )
    return SweepResult(rows, collected)
