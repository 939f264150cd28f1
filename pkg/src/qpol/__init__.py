"""Simulation of local and entangled-photon (nonlocal) quantum polarimetry.

Submodules: ``qmath`` (small-matrix algebra), ``states``, ``channels``,
``qfi``, ``tomography``, ``noise``, ``estimators``, ``config``/``io``/``cli``.
"""

__version__ = "0.1.0"

from .channels import Channel, Configuration, Element, Scenario, apply_channel, closed_form_output, jones
from .qfi import qcrb, scenario_qfi
from .qmath import check_physical, concurrence, fidelity, random_density
from .states import StateKind, make_state, partial_trace

__all__ = [
    "Channel",
    "Configuration",
    "Element",
    "Scenario",
    "StateKind",
    "apply_channel",
    "check_physical",
    "closed_form_output",
    "concurrence",
    "fidelity",
    "jones",
    "make_state",
    "partial_trace",
    "qcrb",
    "random_density",
    "scenario_qfi",
]
