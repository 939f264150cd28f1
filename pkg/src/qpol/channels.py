"""Jones operators for the sample element and their action on probe states.

Angles are in radians, measured from the vertical laboratory axis (the
transmission axis for the LP, the fast axis for the QWP). Both Jones matrices
have period pi in the angle, so :class:`Channel` folds ``alpha`` into
``[0, pi)``.

The LP is not unitary. Its action is treated as post-selection on the
transmitted photon: the output is renormalised to unit trace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FullyBlockedError, UnsupportedScenarioError
from .qmath import dagger, pure_density
from .states import StateKind, make_state

I2 = np.eye(2, dtype=complex)
BLOCKED_TOL = 1e-12


class Element(enum.Enum):
    LP = "lp"
    QWP = "qwp"

    @classmethod
    def parse(cls, value) -> "Element":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown element {value!r}; choose 'lp' or 'qwp'") from None


class Configuration(enum.Enum):
    LOCAL = "local"
    NONLOCAL = "nonlocal"

    @classmethod
    def parse(cls, value) -> "Configuration":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown configuration {value!r}; choose 'local' or 'nonlocal'") from None

    @property
    def dim(self) -> int:
        return 2 if self is Configuration.LOCAL else 4


def jones(element, alpha: float) -> np.ndarray:
    """2x2 Jones matrix of an ideal LP or QWP oriented at ``alpha``."""
    element = Element.parse(element)
    s, c = np.sin(alpha), np.cos(alpha)
    if element is Element.LP:
        return np.array([[s * s, s * c], [s * c, c * c]], dtype=complex)
    return np.array(
        [
            [c * c + 1j * s * s, (1j - 1) * s * c],
            [(1j - 1) * s * c, 1j * c * c + s * s],
        ],
        dtype=complex,
    )


def jones_derivative(element, alpha: float) -> np.ndarray:
    """Exact d/dalpha of :func:`jones`."""
    element = Element.parse(element)
    s2, c2 = np.sin(2 * alpha), np.cos(2 * alpha)
    if element is Element.LP:
        return np.array([[s2, c2], [c2, -s2]], dtype=complex)
    return np.array(
        [
            [(1j - 1) * s2, (1j - 1) * c2],
            [(1j - 1) * c2, (1 - 1j) * s2],
        ],
        dtype=complex,
    )


@dataclass(frozen=True)
class Channel:
    element: Element
    alpha: float
    configuration: Configuration = Configuration.NONLOCAL

    def __post_init__(self):
        object.__setattr__(self, "element", Element.parse(self.element))
        object.__setattr__(self, "configuration", Configuration.parse(self.configuration))
        object.__setattr__(self, "alpha", float(np.mod(self.alpha, np.pi)))

    def operator(self) -> np.ndarray:
        """Full operator on the probe space (``I (x) U`` when nonlocal)."""
        u = jones(self.element, self.alpha)
        return u if self.configuration is Configuration.LOCAL else np.kron(I2, u)

    def operator_derivative(self) -> np.ndarray:
        du = jones_derivative(self.element, self.alpha)
        return du if self.configuration is Configuration.LOCAL else np.kron(I2, du)


@dataclass(frozen=True)
class Scenario:
    """A sample element, a measurement configuration and a probe state.

    ``probe`` defaults to the Bell state for nonlocal runs and to the
    maximally mixed single-photon state for local runs.
    """

    element: Element
    configuration: Configuration
    probe: StateKind | None = None

    def __post_init__(self):
        element = Element.parse(self.element)
        config = Configuration.parse(self.configuration)
        if self.probe is None:
            probe = StateKind.BELL_PSI_PLUS if config is Configuration.NONLOCAL else StateKind.MAXIMALLY_MIXED
        else:
            probe = StateKind.parse(self.probe)
        if probe.dim is not None and probe.dim != config.dim:
            raise UnsupportedScenarioError(f"probe {probe.value!r} does not fit the {config.value} configuration")
        object.__setattr__(self, "element", element)
        object.__setattr__(self, "configuration", config)
        object.__setattr__(self, "probe", probe)

    @property
    def dim(self) -> int:
        return self.configuration.dim

    @property
    def name(self) -> str:
        base = f"{self.element.value}_{self.configuration.value}"
        if self.probe is StateKind.SUPERPOSITION_HV:
            base += "_superposition"
        return base

    def channel(self, alpha: float) -> Channel:
        return Channel(self.element, alpha, self.configuration)

    def probe_state(self) -> np.ndarray:
        return make_state(self.probe, d=self.dim)

    def ideal_output(self, alpha: float) -> np.ndarray:
        return apply_channel(self.channel(alpha), self.probe_state())

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """Parse names such as ``"lp_nonlocal"`` or ``"qwp_local_superposition"``."""
        parts = text.lower().replace("-", "_").split("_")
        if len(parts) not in (2, 3):
            raise ValueError(f"cannot parse scenario {text!r}")
        return cls(parts[0], parts[1], parts[2] if len(parts) == 3 else None)


def apply_channel(ch: Channel, state) -> np.ndarray:
    """Propagate a density matrix through the channel and post-select.

    Raises
    ------
    FullyBlockedError
        If the transmitted weight is below 1e-12.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape != (ch.configuration.dim,) * 2:
        raise DimensionError(f"{ch.configuration.value} channel expects a {ch.configuration.dim}-dim state, got {state.shape}")
    u = ch.operator()
    out = u @ state @ dagger(u)
    tr = np.trace(out).real
    if tr < BLOCKED_TOL:
        raise FullyBlockedError(f"{ch.element.value.upper()} at {np.degrees(ch.alpha):.4f} deg blocks the input (Tr = {tr:.2e})")
    return out / tr


def closed_form_output(sc: Scenario, alpha: float) -> np.ndarray:
    """Output state written directly from the printed trigonometric coefficients.

    Supports the four Bell / maximally-mixed probe scenarios only; used as an
    independent cross-check of :func:`apply_channel`.
    """
    a = np.sin(alpha) * np.cos(alpha)
    b = np.sin(alpha) ** 2
    c = np.cos(alpha) ** 2
    probe_default = (sc.configuration is Configuration.NONLOCAL and sc.probe is StateKind.BELL_PSI_PLUS) or (
        sc.configuration is Configuration.LOCAL and sc.probe is StateKind.MAXIMALLY_MIXED
    )
    if not probe_default:
        raise UnsupportedScenarioError(f"no closed form for scenario {sc.name}")
    if sc.configuration is Configuration.NONLOCAL:
        if sc.element is Element.LP:
            ket = np.array([a, c, b, a], dtype=complex)
        else:
            ket = np.array([(1j - 1) * a, 1j * c + b, c + 1j * b, (1j - 1) * a], dtype=complex) / np.sqrt(2)
        return pure_density(ket)
    if sc.element is Element.LP:
        return np.array([[b, a], [a, c]], dtype=complex)
    return np.eye(2, dtype=complex) / 2


STANDARD_SCENARIOS = (
    Scenario(Element.LP, Configuration.NONLOCAL),
    Scenario(Element.QWP, Configuration.NONLOCAL),
    Scenario(Element.LP, Configuration.LOCAL),
    Scenario(Element.QWP, Configuration.LOCAL),
)
