"""Line protocol for tag exchange between the levels.

One frame per line, UTF-8, newline-terminated, space-separated:

    REQUEST <tag>                      one-shot read -> DATA
    POKE <tag> <value>                 write -> ACK or NAK
    ADVISE <tag>                       subscribe -> ACK, then DATA per change
    UNADVISE <tag>                     unsubscribe -> ACK
    DATA <tag> <value> <quality> <ts>  pushed or requested sample
    ACK <tag>
    NAK <tag> <reason>

Values: booleans as 0/1, integers bare, reals with up to nine
significant digits and a mandatory decimal marker, enumeration values as
bare tokens that cannot be mistaken for numbers.  Timestamps are integer
milliseconds.  Tags are lowercase dotted names.  A NAK about an
unparseable line uses "-" in the tag slot.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

__all__ = [
    "Verb",
    "Quality",
    "Message",
    "ProtocolError",
    "EncodeError",
    "encode",
    "decode",
    "format_value",
    "parse_value",
    "TAG_PATTERN",
    "NAK_REASONS",
]

TAG_PATTERN = re.compile(r"^[a-z0-9_]+(\.[a-z0-9_]+)+$")
_INT_PATTERN = re.compile(r"^[+-]?[0-9]+$")
_ENUM_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_.,:+/-]*$")
_PLACEHOLDER = "-"

NAK_REASONS = (
    "bad-verb",
    "bad-arity",
    "bad-value",
    "bad-tag",
    "no-such-tag",
    "read-only",
    "overrun",
)


class Verb(Enum):
    REQUEST = "REQUEST"
    POKE = "POKE"
    ADVISE = "ADVISE"
    UNADVISE = "UNADVISE"
    DATA = "DATA"
    ACK = "ACK"
    NAK = "NAK"


class Quality(Enum):
    GOOD = "GOOD"
    BAD = "BAD"
    STALE = "STALE"


Value = Union[int, float, str]


class ProtocolError(ValueError):
    """A malformed frame; ``reason`` is one of NAK_REASONS."""

    def __init__(self, reason: str, tag: str = _PLACEHOLDER, detail: str = ""):
        self.reason = reason
        self.tag = tag
        super().__init__(f"{reason}: {detail}" if detail else reason)


class EncodeError(ValueError):
    """The message cannot be represented in the wire grammar."""


@dataclass(frozen=True)
class Message:
    verb: Verb
    tag: str
    value: Optional[Value] = None
    quality: Optional[Quality] = None
    timestamp: Optional[int] = None
    nak_reason: Optional[str] = None

    def __post_init__(self) -> None:
        if isinstance(self.value, bool):
            object.__setattr__(self, "value", int(self.value))

    @classmethod
    def request(cls, tag: str) -> "Message":
        return cls(Verb.REQUEST, tag)

    @classmethod
    def poke(cls, tag: str, value: Value) -> "Message":
        return cls(Verb.POKE, tag, value=value)

    @classmethod
    def advise(cls, tag: str) -> "Message":
        return cls(Verb.ADVISE, tag)

    @classmethod
    def unadvise(cls, tag: str) -> "Message":
        return cls(Verb.UNADVISE, tag)

    @classmethod
    def data(cls, tag: str, value: Value, quality: Quality, timestamp: int) -> "Message":
        return cls(Verb.DATA, tag, value=value, quality=quality, timestamp=timestamp)

    @classmethod
    def ack(cls, tag: str) -> "Message":
        return cls(Verb.ACK, tag)

    @classmethod
    def nak(cls, tag: str, reason: str) -> "Message":
        return cls(Verb.NAK, tag, nak_reason=reason)


def format_value(value: Value) -> str:
    """Wire form of a tag value; floats keep a decimal marker."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise EncodeError(f"non-finite value {value!r}")
        text = format(value, ".9g")
        if not any(c in text for c in ".e"):
            text += ".0"
        return text
    if isinstance(value, str):
        if not _ENUM_PATTERN.match(value):
            raise EncodeError(f"enum value {value!r} violates the token grammar")
        if _looks_numeric(value):
            raise EncodeError(f"enum value {value!r} would parse as a number")
        return value
    raise EncodeError(f"unsupported value type {type(value).__name__}")


def _looks_numeric(token: str) -> bool:
    if _INT_PATTERN.match(token):
        return True
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_value(token: str) -> Value:
    """Inverse of format_value: int, float, or enum token."""
    if _INT_PATTERN.match(token):
        return int(token)
    if any(c in token for c in ".eE") or token[:1] in "+-0123456789":
        try:
            value = float(token)
        except ValueError:
            value = None
        if value is not None:
            if not math.isfinite(value):
                raise ProtocolError("bad-value", detail=f"non-finite {token!r}")
            return value
    if _ENUM_PATTERN.match(token) and not _looks_numeric(token):
        return token
    raise ProtocolError("bad-value", detail=f"unparseable value {token!r}")


def _check_tag(tag: str, *, allow_placeholder: bool = False) -> str:
    if allow_placeholder and tag == _PLACEHOLDER:
        return tag
    if not TAG_PATTERN.match(tag):
        raise ProtocolError("bad-tag", tag=tag, detail=f"tag {tag!r} violates the grammar")
    return tag


def encode(msg: Message) -> bytes:
    """Serialize a message to one wire line."""
    try:
        _check_tag(msg.tag, allow_placeholder=msg.verb is Verb.NAK)
    except ProtocolError as exc:
        raise EncodeError(str(exc)) from None

    verb = msg.verb
    if verb in (Verb.REQUEST, Verb.ADVISE, Verb.UNADVISE, Verb.ACK):
        fields = [verb.value, msg.tag]
    elif verb is Verb.POKE:
        if msg.value is None:
            raise EncodeError("POKE requires a value")
        fields = [verb.value, msg.tag, format_value(msg.value)]
    elif verb is Verb.DATA:
        if msg.value is None or msg.quality is None or msg.timestamp is None:
            raise EncodeError("DATA requires value, quality and timestamp")
        if msg.timestamp < 0:
            raise EncodeError("timestamp must be >= 0")
        fields = [
            verb.value,
            msg.tag,
            format_value(msg.value),
            msg.quality.value,
            str(int(msg.timestamp)),
        ]
    elif verb is Verb.NAK:
        if msg.nak_reason not in NAK_REASONS:
            raise EncodeError(f"unknown NAK reason {msg.nak_reason!r}")
        fields = [verb.value, msg.tag, msg.nak_reason]
    else:  # pragma: no cover
        raise EncodeError(f"unhandled verb {verb}")
    return (" ".join(fields) + "\n").encode("utf-8")


def decode(line: Union[bytes, str]) -> Message:
    """Parse one wire line; raises ProtocolError with a NAK reason."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("bad-value", detail="not valid UTF-8") from None
    line = line.rstrip("\r\n")
    if not line:
        raise ProtocolError("bad-arity", detail="empty line")
    fields = line.split(" ")
    if any(f == "" for f in fields):
        raise ProtocolError("bad-arity", detail="doubled or trailing separator")

    verb_token = fields[0]
    tag = fields[1] if len(fields) > 1 else _PLACEHOLDER
    try:
        verb = Verb(verb_token)
    except ValueError:
        raise ProtocolError("bad-verb", tag=tag, detail=f"unknown verb {verb_token!r}") from None

    arity = {
        Verb.REQUEST: 2,
        Verb.ADVISE: 2,
        Verb.UNADVISE: 2,
        Verb.ACK: 2,
        Verb.POKE: 3,
        Verb.NAK: 3,
        Verb.DATA: 5,
    }[verb]
    if len(fields) != arity:
        raise ProtocolError(
            "bad-arity", tag=tag, detail=f"{verb.value} takes {arity} fields, got {len(fields)}"
        )
    _check_tag(tag, allow_placeholder=verb is Verb.NAK)

    if verb in (Verb.REQUEST, Verb.ADVISE, Verb.UNADVISE, Verb.ACK):
        return Message(verb, tag)
    if verb is Verb.POKE:
        return Message(verb, tag, value=parse_value(fields[2]))
    if verb is Verb.NAK:
        reason = fields[2]
        if reason not in NAK_REASONS:
            raise ProtocolError("bad-value", tag=tag, detail=f"unknown NAK reason {reason!r}")
        return Message(verb, tag, nak_reason=reason)

    # DATA
    value = parse_value(fields[2])
    try:
        quality = Quality(fields[3])
    except ValueError:
        raise ProtocolError("bad-value", tag=tag, detail=f"unknown quality {fields[3]!r}") from None
    ts_token = fields[4]
    if not _INT_PATTERN.match(ts_token) or int(ts_token) < 0:
        raise ProtocolError("bad-value", tag=tag, detail=f"bad timestamp {ts_token!r}")
    return Message(verb, tag, value=value, quality=quality, timestamp=int(ts_token))
