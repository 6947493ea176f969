"""Seedable simulator for on/off network constructors."""

from .detectors import DetectorKind
from .engine import (
    Configuration,
    RunResult,
    Simulation,
    apply_interaction,
    init_configuration,
    run,
    snapshot,
)
from .protocols import ProtocolSpec, Rule, builtin, parse_protocol_file, random_protocol
from .schedulers import SchedulerConfig, SchedulerKind

__all__ = [
    "Configuration",
    "DetectorKind",
    "ProtocolSpec",
    "Rule",
    "RunResult",
    "SchedulerConfig",
    "SchedulerKind",
    "Simulation",
    "apply_interaction",
    "builtin",
    "init_configuration",
    "parse_protocol_file",
    "random_protocol",
    "run",
    "snapshot",
]
