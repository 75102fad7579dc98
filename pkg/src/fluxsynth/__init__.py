"""fluxsynth: RSFQ sequential circuit synthesis from finite state machines."""

from .fsm import FiniteStateMachine, PulseTrace, parse_fsm, serialize_fsm, fsm_step, fsm_run

__version__ = "0.1.0"

__all__ = [
    "FiniteStateMachine",
    "PulseTrace",
    "parse_fsm",
    "serialize_fsm",
    "fsm_step",
    "fsm_run",
    "__version__",
]
