"""GenSync: set-reconciliation middleware and benchmarking layer.

Three communication-efficient protocols (CPI, IBLT, CUCKOO) share one
Builder/GenSync/Observation API. See the README for a tour.
"""

from .core import Builder, GenSync
from .errors import (
    BoundExceededError,
    ConfigError,
    FilterFullError,
    GenSyncError,
    IncompatibleSketchError,
    InterpolationError,
    NotSplittableError,
    ParameterError,
    PeelError,
    ProtocolError,
    StateError,
    TransportError,
)
from .params import Observation, ProtocolId, ProtocolParams, SyncRole
from .transport import ChannelParams, memory_channel_pair

__all__ = [
    "Builder",
    "GenSync",
    "Observation",
    "ProtocolId",
    "ProtocolParams",
    "SyncRole",
    "ChannelParams",
    "memory_channel_pair",
    "GenSyncError",
    "ConfigError",
    "ParameterError",
    "StateError",
    "TransportError",
    "ProtocolError",
    "InterpolationError",
    "NotSplittableError",
    "BoundExceededError",
    "PeelError",
    "IncompatibleSketchError",
    "FilterFullError",
]

__version__ = "0.1.0"
