"""Event-driven state machines for the three node roles."""

from .common import (
    Action,
    ArmTimer,
    Boot,
    Event,
    FrameRx,
    ProtocolParams,
    Send,
    SenseTick,
    SetDimLevel,
    TimerFired,
    TraceEvent,
)
from .controller import LightController, lcn_handle
from .master import MasterNode, Phase, mn_handle, topology_audit
from .sensor import SensorNode, sn_handle

__all__ = [
    "Action",
    "ArmTimer",
    "Boot",
    "Event",
    "FrameRx",
    "LightController",
    "MasterNode",
    "Phase",
    "ProtocolParams",
    "Send",
    "SenseTick",
    "SensorNode",
    "SetDimLevel",
    "TimerFired",
    "TraceEvent",
    "lcn_handle",
    "mn_handle",
    "sn_handle",
    "topology_audit",
]
