"""Synchronization performance of power grids with rating-proportional machines.

Closed-form system frequency, Nadir, RoCoF and L2 synchronization cost,
cross-checked against a time-domain simulation of the coupled network.
"""

from .errors import (
    DisconnectedGraphError,
    GridSyncError,
    NeedsSimulation,
    ParameterError,
)
from .machines import MachineKind, MachineParams
from .metrics import MetricsReport, analyze, sync_cost
from .network import NetworkModel, Spectrum, decompose

__version__ = "0.1.0"

__all__ = [
    "DisconnectedGraphError",
    "GridSyncError",
    "NeedsSimulation",
    "ParameterError",
    "MachineKind",
    "MachineParams",
    "MetricsReport",
    "analyze",
    "sync_cost",
    "NetworkModel",
    "Spectrum",
    "decompose",
]
