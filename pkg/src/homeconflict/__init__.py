"""Detect IoT service conflicts in multi-resident event logs and resolve them with
context-driven AHP resident priorities."""

__version__ = "0.1.0"

from .ahp import PairwiseMatrix, PrioritizationResult, prioritize
from .detection import detect_conflicts
from .domain import ConflictCase, ConflictType, ResidentProfile, ServiceEvent, ServiceEventLog
from .prioritization import rank_residents
from .resolution import resolve_adaptive, resolve_average

__all__ = [
    "ConflictCase",
    "ConflictType",
    "PairwiseMatrix",
    "PrioritizationResult",
    "ResidentProfile",
    "ServiceEvent",
    "ServiceEventLog",
    "detect_conflicts",
    "prioritize",
    "rank_residents",
    "resolve_adaptive",
    "resolve_average",
]
