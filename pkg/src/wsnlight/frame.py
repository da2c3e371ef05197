"""One-octet protocol frame and the 8-bit hardware address byte.

Bit layout of a frame (MSB first)::

    bit 7   bit 6   bit 5   bit 4      bits 3..0
    C1      C2      topo    data_ack   nibble

C1/C2 select the frame class. Together with the topology and data/ack
flags they name exactly one ``FrameKind``; any other combination is
reserved and refuses to decode.

On air, a frame is preceded by the destination hardware address, giving
a 16-bit payload (address octet, frame octet).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum, IntEnum

BROADCAST = 0xFF
UNASSIGNED = 0x00

NIBBLE_MAX = 0x0F
INVALID_ID = 0


class InvalidFrame(ValueError):
    """Raised when an octet does not carry a defined frame."""


class FrameClass(IntEnum):
    NORMAL = 0b00
    LCN_COMMISSION = 0b01
    SN_COMMISSION = 0b10
    MAPPING = 0b11


class FrameKind(Enum):
    # value = (class, topo, data_ack)
    SN_REQ_DEC = (FrameClass.NORMAL, 0, 0)
    SN_REQ_INC = (FrameClass.NORMAL, 0, 1)
    TOPO_PING = (FrameClass.NORMAL, 1, 0)
    TOPO_PONG = (FrameClass.NORMAL, 1, 1)
    LCN_HELLO = (FrameClass.LCN_COMMISSION, 0, 0)
    MN_ID_ECHO = (FrameClass.LCN_COMMISSION, 0, 1)
    MN_ADDR_SET = (FrameClass.LCN_COMMISSION, 1, 0)
    LCN_ADDR_ACK = (FrameClass.LCN_COMMISSION, 1, 1)
    MN_BCAST = (FrameClass.SN_COMMISSION, 0, 0)
    SN_ACK = (FrameClass.SN_COMMISSION, 0, 1)
    LCN_SET_MAX = (FrameClass.MAPPING, 0, 0)
    LCN_RESTORE = (FrameClass.MAPPING, 0, 1)
    LCN_STEP_DEC = (FrameClass.MAPPING, 1, 0)
    LCN_STEP_INC = (FrameClass.MAPPING, 1, 1)

    @property
    def frame_class(self) -> FrameClass:
        return self.value[0]

    @property
    def topo(self) -> int:
        return self.value[1]

    @property
    def data_ack(self) -> int:
        return self.value[2]


_KIND_BY_TRIPLE = {kind.value: kind for kind in FrameKind}

# The step count is a magnitude; a zero step is not a command.
_NONZERO_NIBBLE = frozenset({FrameKind.LCN_STEP_DEC, FrameKind.LCN_STEP_INC})


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    nibble: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, FrameKind):
            raise InvalidFrame(f"not a frame kind: {self.kind!r}")
        if not 0 <= self.nibble <= NIBBLE_MAX:
            raise InvalidFrame(f"nibble out of range: {self.nibble}")
        if self.kind in _NONZERO_NIBBLE and self.nibble == 0:
            raise InvalidFrame(f"{self.kind.name} needs a step count >= 1")

    @property
    def frame_class(self) -> FrameClass:
        return self.kind.frame_class

    @property
    def topo(self) -> int:
        return self.kind.topo

    @property
    def data_ack(self) -> int:
        return self.kind.data_ack

    def __str__(self) -> str:
        return _label(self.kind, self.nibble)


@functools.lru_cache(maxsize=None)
def _label(kind: FrameKind, nibble: int) -> str:
    return f"{kind.name}({nibble})"


def encode(frame: Frame) -> int:
    """Pack a frame into one octet."""
    cls, topo, data_ack = frame.kind.value
    return (int(cls) << 6) | (topo << 5) | (data_ack << 4) | frame.nibble


def decode(octet: int) -> Frame:
    """Unpack one octet, raising ``InvalidFrame`` for reserved encodings."""
    if not 0 <= octet <= 0xFF:
        raise InvalidFrame(f"not an octet: {octet}")
    triple = (FrameClass(octet >> 6), (octet >> 5) & 1, (octet >> 4) & 1)
    kind = _KIND_BY_TRIPLE.get(triple)
    if kind is None:
        raise InvalidFrame(f"reserved combination in 0x{octet:02X}")
    return Frame(kind, octet & NIBBLE_MAX)


def check_hw_address(value: int) -> int:
    if not 0 <= value <= 0xFF:
        raise ValueError(f"hardware address must fit in 8 bits, got {value}")
    return value


def mn_address(index: int) -> int:
    """Hardware address the master node derives from its address index."""
    _check_index(index)
    return index


def lcn_address(index: int) -> int:
    """Hardware address for an assigned LCN address index.

    LCN addresses live in 0x11..0x1F so they never collide with the master
    (0x01..0x0F), the unassigned sentinel, or broadcast.
    """
    _check_index(index)
    return 0x10 | index


def _check_index(index: int) -> None:
    if not 1 <= index <= NIBBLE_MAX:
        raise ValueError(f"address index must be in 1..15, got {index}")


def pack_air(dest: int, frame: Frame) -> bytes:
    """The 16-bit on-air unit: destination address then frame."""
    return bytes((check_hw_address(dest), encode(frame)))


def unpack_air(data: bytes) -> tuple[int, Frame]:
    if len(data) != 2:
        raise InvalidFrame(f"on-air unit is 2 octets, got {len(data)}")
    return data[0], decode(data[1])
