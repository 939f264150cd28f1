"""Experiment configuration documents (JSON, angles in degrees)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channels import Scenario
from .errors import ConfigError
from .estimators import EstimatorKind
from .noise import DEFAULT_K_RANDOM, DEFAULT_N, NoiseConfig
from .tomography import MODES, MleOptions

EXAMPLE = {
    "scenario": {"element": "lp", "configuration": "nonlocal", "probe": "bell", "alpha_deg": 37.0},
    "noise": {"q": 0.0, "sigma_deg": 0.25, "n_mean": DEFAULT_N, "k_random": DEFAULT_K_RANDOM},
    "tomography": {"povm": "two_minimal16", "method": "mle", "mle": {"restarts": 3, "method": "lbfgs"}},
    "trials": 10,
    "seed": 2024,
    "q_grid": [0.0, 0.1, 0.2, 0.3],
    "estimators": ["alpha1", "alpha2"],
}

_TOP_KEYS = {"scenario", "noise", "tomography", "trials", "seed", "q_grid", "estimators", "alpha_sweep_deg", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    alpha_deg: float
    noise: NoiseConfig
    povm: str
    method: str = "mle"
    mle: MleOptions = field(default_factory=MleOptions)
    trials: int = 1
    seed: int = 0
    q_grid: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    estimators: tuple[str, ...] = ("alpha1", "alpha2")
    alpha_sweep_deg: tuple[float, float, float] | None = None
    out_dir: str | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def alpha(self) -> float:
        return math.radians(self.alpha_deg)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        raw = dict(self.raw, seed=seed)
        return replace(self, seed=seed, noise=replace(self.noise, seed=seed), raw=raw)

    def to_dict(self) -> dict:
        """Normalised, fully explicit form recorded in run manifests.

        Feeding it back to :func:`parse_config` reproduces this config.
        """
        noise = self.noise.to_dict()
        noise["sigma_deg"] = math.degrees(noise.pop("sigma"))
        del noise["seed"]  # the top-level seed drives every stream
        return {
            "scenario": {
                "element": self.scenario.element.value,
                "configuration": self.scenario.configuration.value,
                "probe": self.scenario.probe.value,
                "alpha_deg": self.alpha_deg,
            },
            "noise": noise,
            "tomography": {
                "povm": self.povm,
                "method": self.method,
                "mle": {k: getattr(self.mle, k) for k in MleOptions.__dataclass_fields__},
            },
            "trials": self.trials,
            "seed": self.seed,
            "q_grid": list(self.q_grid),
            "estimators": list(self.estimators),
            "alpha_sweep_deg": list(self.alpha_sweep_deg) if self.alpha_sweep_deg else None,
        }


def _get(d: dict, key: str, kind, default, where: str, problems: list):
    if key not in d:
        return default
    value = d[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        problems.append(f"{where}.{key}: expected {kind.__name__}, got {value!r}")
        return default
    return value


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config document, collecting every problem before raising."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    problems: list[str] = []
    unknown = set(data) - _TOP_KEYS
    if unknown:
        problems.append(f"unknown top-level keys: {sorted(unknown)}")

    sc_d = data.get("scenario", {})
    element = _get(sc_d, "element", str, "lp", "scenario", problems)
    configuration = _get(sc_d, "configuration", str, "nonlocal", "scenario", problems)
    probe = _get(sc_d, "probe", str, None, "scenario", problems)
    alpha_deg = _get(sc_d, "alpha_deg", float, 37.0, "scenario", problems)
    if not 0.0 <= alpha_deg < 180.0:
        problems.append(f"scenario.alpha_deg: {alpha_deg} outside [0, 180)")
    scenario = None
    try:
        scenario = Scenario(element, configuration, probe)
    except ValueError as exc:
        problems.append(f"scenario: {exc}")

    nz = data.get("noise", {})
    seed = _get(data, "seed", int, 0, "config", problems)
    noise = None
    try:
        q = _get(nz, "q", float, None, "noise", problems)
        q1 = _get(nz, "q1", float, 1.0, "noise", problems)
        q2 = _get(nz, "q2", float, 1.0, "noise", problems)
        if q is not None:
            if "q1" in nz or "q2" in nz:
                problems.append("noise: give either q or q1/q2, not both")
            q1 = q2 = 1.0 - q
        extra = set(nz) - {"q", "q1", "q2", "sigma_deg", "n_mean", "k_random", "rotation_draws", "round_counts", "poisson"}
        if extra:
            problems.append(f"noise: unknown keys {sorted(extra)}")
        noise = NoiseConfig(
            q1=q1,
            q2=q2,
            sigma=math.radians(_get(nz, "sigma_deg", float, 0.0, "noise", problems)),
            n_mean=_get(nz, "n_mean", int, DEFAULT_N, "noise", problems),
            k_random=_get(nz, "k_random", int, DEFAULT_K_RANDOM, "noise", problems),
            seed=seed,
            rotation_draws=_get(nz, "rotation_draws", str, "per_projector", "noise", problems),
            round_counts=_get(nz, "round_counts", bool, True, "noise", problems),
            poisson=_get(nz, "poisson", bool, True, "noise", problems),
        )
    except ConfigError as exc:
        problems.append(f"noise: {exc}")

    tomo = data.get("tomography", {})
    default_povm = "single6" if scenario is not None and scenario.dim == 2 else "two_minimal16"
    povm = _get(tomo, "povm", str, default_povm, "tomography", problems)
    if povm not in MODES:
        problems.append(f"tomography.povm: {povm!r} not in {MODES}")
    elif scenario is not None and (povm == "single6") != (scenario.dim == 2):
        problems.append(f"tomography.povm: {povm!r} does not fit a {scenario.configuration.value} scenario")
    method = _get(tomo, "method", str, "mle", "tomography", problems)
    if method not in ("mle", "linear"):
        problems.append(f"tomography.method: {method!r} not in ('mle', 'linear')")
    mle_d = tomo.get("mle", {})
    mle_fields = set(MleOptions.__dataclass_fields__)
    if set(mle_d) - mle_fields:
        problems.append(f"tomography.mle: unknown keys {sorted(set(mle_d) - mle_fields)}")
    mle = MleOptions()
    try:
        mle = MleOptions(**{k: v for k, v in mle_d.items() if k in mle_fields})
        if mle.method not in ("lbfgs", "nelder-mead"):
            problems.append(f"tomography.mle.method: {mle.method!r} not in ('lbfgs', 'nelder-mead')")
    except TypeError as exc:
        problems.append(f"tomography.mle: {exc}")

    trials = _get(data, "trials", int, 1, "config", problems)
    if trials < 1:
        problems.append(f"config.trials: {trials} < 1")
    q_grid = data.get("q_grid", [0.0, 0.1, 0.2, 0.3])
    if not isinstance(q_grid, list) or not q_grid or not all(isinstance(q, (int, float)) and 0 <= q <= 1 for q in q_grid):
        problems.append(f"config.q_grid: expected a non-empty list of numbers in [0, 1], got {q_grid!r}")
        q_grid = []
    estimators = data.get("estimators", ["alpha1", "alpha2"])
    try:
        estimators = tuple(EstimatorKind.parse(e).value for e in estimators)
    except (ValueError, TypeError) as exc:
        problems.append(f"config.estimators: {exc}")
        estimators = ()
    sweep = data.get("alpha_sweep_deg")
    if sweep is not None:
        if not (isinstance(sweep, list) and len(sweep) == 3 and all(isinstance(x, (int, float)) for x in sweep) and sweep[2] > 0):
            problems.append("config.alpha_sweep_deg: expected [start, stop, step] with step > 0")
            sweep = None
        else:
            sweep = tuple(float(x) for x in sweep)
    out_dir = data.get("output", {}).get("dir") if isinstance(data.get("output"), dict) else None

    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
    return ExperimentConfig(
        scenario=scenario,
        alpha_deg=alpha_deg,
        noise=noise,
        povm=povm,
        method=method,
        mle=mle,
        trials=trials,
        seed=seed,
        q_grid=tuple(float(q) for q in q_grid),
        estimators=estimators,
        alpha_sweep_deg=sweep,
        out_dir=out_dir,
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(data)
