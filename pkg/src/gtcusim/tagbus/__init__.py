"""Tag exchange and archiving: the glue between the three levels.

- ``protocol``: the line codec (request/poke/advise verbs)
- ``store``: the tag database with atomic commits and subscriptions
- ``historian``: append-only archive with range queries
- ``server``: TCP + WebSocket sessions over one shared store
"""

from gtcusim.tagbus.historian import Historian, HistorianRecord, load_history
from gtcusim.tagbus.protocol import (
    EncodeError,
    Message,
    ProtocolError,
    Quality,
    Verb,
    decode,
    encode,
)
from gtcusim.tagbus.store import (
    CLIENT_WRITABLE_PREFIX,
    ReadOnlyError,
    STALE_FACTOR,
    Subscriber,
    TagRecord,
    TagStore,
    UnknownTagError,
    ValueTypeError,
)
from gtcusim.tagbus.server import SESSION_BUFFER, TagBusClient, TagBusServer

__all__ = [
    "Historian",
    "HistorianRecord",
    "load_history",
    "EncodeError",
    "Message",
    "ProtocolError",
    "Quality",
    "Verb",
    "decode",
    "encode",
    "CLIENT_WRITABLE_PREFIX",
    "ReadOnlyError",
    "STALE_FACTOR",
    "Subscriber",
    "TagRecord",
    "TagStore",
    "UnknownTagError",
    "ValueTypeError",
    "SESSION_BUFFER",
    "TagBusClient",
    "TagBusServer",
]
