"""Protocol package - frames, payload codecs, session state machines, transports."""

from grid_shield.protocol.frame import HEADER, MAGIC, VERSION, Frame, MsgType, session_id_of
from grid_shield.protocol.wire import AbortCode, Flags, Purpose
from grid_shield.protocol.session import (
    ClientSession,
    IntermediateMessage,
    Phase,
    ProtocolConfig,
    ReplayCache,
    ReplyMessage,
    ServerSession,
)
from grid_shield.protocol.transport import (
    WS_PATH,
    LoopbackTransport,
    Transport,
    WebSocketTransport,
    create_app,
)

__all__ = [
    "HEADER",
    "MAGIC",
    "VERSION",
    "Frame",
    "MsgType",
    "session_id_of",
    "AbortCode",
    "Flags",
    "Purpose",
    "ClientSession",
    "ServerSession",
    "IntermediateMessage",
    "ReplyMessage",
    "Phase",
    "ProtocolConfig",
    "ReplayCache",
    "WS_PATH",
    "Transport",
    "LoopbackTransport",
    "WebSocketTransport",
    "create_app",
]
