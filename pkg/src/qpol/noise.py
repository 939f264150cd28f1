"""Noise model for simulated tomography campaigns.

Four effects are composed, in this order:

1. preparation noise: ``rho_in = q1 rho + (1 - q1) rho_r`` with ``rho_r`` the
   mean of ``k_random`` Ginibre-random states, drawn once per campaign;
2. the ideal sample channel;
3. dark counts: ``rho' = q2 rho_out + (1 - q2) I/d``;
4. measurement: every projector is conjugated by a small random unitary on
   the sample photon and its count is ``round(N_i Tr(Pi' rho'))`` with
   ``N_i ~ Poisson(N)``.

``q1 = q2 = 1`` and ``sigma = 0`` switch the state-level noise off.

Randomness
----------
All draws come from ``numpy.random.Generator`` objects backed by PCG64. Trial
``k`` of a run with master seed ``s`` uses ``default_rng(SeedSequence(s).spawn(k+1)[k])``
(see :func:`trial_rngs`), so results do not depend on how trials are
scheduled across workers.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .channels import Configuration, Scenario, apply_channel
from .errors import ConfigError
from .qmath import dagger, random_density
from .tomography import CountRecord, PovmSet, Projector

DEFAULT_SIGMA = np.pi / 720
DEFAULT_N = 5000
DEFAULT_K_RANDOM = 20


@dataclass(frozen=True)
class NoiseConfig:
    q1: float = 1.0
    q2: float = 1.0
    sigma: float = 0.0
    n_mean: int = DEFAULT_N
    k_random: int = DEFAULT_K_RANDOM
    seed: int = 0
    rotation_draws: str = "per_projector"
    round_counts: bool = True
    poisson: bool = True

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.q1 <= 1.0:
            problems.append(f"q1={self.q1} outside [0, 1]")
        if not 0.0 <= self.q2 <= 1.0:
            problems.append(f"q2={self.q2} outside [0, 1]")
        if self.sigma < 0:
            problems.append(f"sigma={self.sigma} is negative")
        if self.n_mean < 1:
            problems.append(f"n_mean={self.n_mean} < 1")
        if self.k_random < 1:
            problems.append(f"k_random={self.k_random} < 1")
        if self.rotation_draws not in ("per_projector", "per_campaign"):
            problems.append(f"rotation_draws={self.rotation_draws!r} not in (per_projector, per_campaign)")
        if problems:
            raise ConfigError("; ".join(problems))

    @classmethod
    def standard(cls, q: float = 0.0, **overrides) -> "NoiseConfig":
        """Reference parameters (sigma = pi/720, N = 5000, 20 random states) at noise strength ``q``."""
        base = cls(sigma=DEFAULT_SIGMA, n_mean=DEFAULT_N, k_random=DEFAULT_K_RANDOM)
        return replace(base.with_strength(q), **overrides)

    @classmethod
    def noiseless(cls, n_mean: int = DEFAULT_N, **overrides) -> "NoiseConfig":
        return cls(n_mean=n_mean, poisson=False, round_counts=False, **overrides)

    def with_strength(self, q: float) -> "NoiseConfig":
        """Set ``q1 = q2 = 1 - q`` so that ``q = 0`` means no state noise."""
        if not 0.0 <= q <= 1.0:
            raise ConfigError(f"noise strength q={q} outside [0, 1]")
        return replace(self, q1=1.0 - q, q2=1.0 - q)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown noise fields: {sorted(unknown)}")
        return cls(**data)


def trial_rngs(master_seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(n)]


def trial_rng(master_seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(k,)))


def random_mixture(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    return sum(random_density(d, rng) for _ in range(k)) / k


def apply_prep_noise(rho, q1: float, k_random: int, rng: np.random.Generator) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    rho_r = random_mixture(rho.shape[0], k_random, rng)
    return q1 * rho + (1.0 - q1) * rho_r


def apply_dark_counts(rho, q2: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    return q2 * rho + (1.0 - q2) * np.eye(d) / d


def rotation_unitary(w1: float, w2: float, w3: float) -> np.ndarray:
    c, s = np.cos(w3), np.sin(w3)
    return np.array(
        [
            [np.exp(0.5j * w1) * c, -1j * np.exp(0.5j * w2) * s],
            [-1j * np.exp(-0.5j * w2) * s, np.exp(-0.5j * w1) * c],
        ]
    )


def random_basis_rotation(sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Misalignment unitary with angles drawn i.i.d. from ``Normal(0, sigma)``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    w = rng.normal(0.0, sigma, size=3) if sigma > 0 else np.zeros(3)
    return rotation_unitary(*w)


def rotate_projector(p: Projector | np.ndarray, u: np.ndarray, configuration=Configuration.NONLOCAL):
    """Conjugate a projector by ``u`` on the sample photon (``I (x) u`` when nonlocal)."""
    mat = p.matrix if isinstance(p, Projector) else np.asarray(p)
    configuration = Configuration.parse(configuration)
    full = u if configuration is Configuration.LOCAL else np.kron(np.eye(2), u)
    if full.shape != mat.shape:
        raise ValueError(f"rotation of shape {full.shape} cannot act on projector {mat.shape}")
    out = full @ mat @ dagger(full)
    return Projector(p.label, out) if isinstance(p, Projector) else out


def noisy_states(sc: Scenario, alpha: float, cfg: NoiseConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """State-level part of the pipeline: probe, noisy input, output, detected state."""
    probe = sc.probe_state()
    rho_in = apply_prep_noise(probe, cfg.q1, cfg.k_random, rng) if cfg.q1 < 1.0 else probe
    rho_out = apply_channel(sc.channel(alpha), rho_in)
    rho_det = apply_dark_counts(rho_out, cfg.q2)
    return {"probe": probe, "input": rho_in, "output": rho_out, "detected": rho_det}


def noisy_counts(
    sc: Scenario,
    alpha: float,
    povm: PovmSet,
    cfg: NoiseConfig,
    rng: np.random.Generator,
    return_states: bool = False,
):
    """Run one noisy tomography campaign and return its :class:`CountRecord`.

    ``N`` of the record is ``cfg.n_mean``, the value the reconstruction should
    assume.
    """
    if povm.dim != sc.dim:
        raise ValueError(f"{povm.mode} projectors do not fit the {sc.configuration.value} scenario")
    states = noisy_states(sc, alpha, cfg, rng)
    rho = states["detected"]
    shared_u = random_basis_rotation(cfg.sigma, rng) if cfg.rotation_draws == "per_campaign" else None
    counts = np.empty(len(povm))
    for k, proj in enumerate(povm.projectors):
        u = shared_u if shared_u is not None else random_basis_rotation(cfg.sigma, rng)
        rotated = rotate_projector(proj.matrix, u, sc.configuration)
        n_k = rng.poisson(cfg.n_mean) if cfg.poisson else cfg.n_mean
        counts[k] = n_k * max(np.real(np.trace(rotated @ rho)), 0.0)
    if cfg.round_counts:
        counts = np.rint(counts)
    record = CountRecord(povm.labels, counts, float(cfg.n_mean), source=f"simulated(seed={cfg.seed})")
    return (record, states) if return_states else record
