"""Name -> domain-level path records used by sources to build DLSR headers."""

from __future__ import annotations

from dataclasses import dataclass
from ipaddress import IPv6Address
from typing import Callable

from .forwarding import encapsulate_dlsr
from .wire import NH_NONE, Ipv6BaseHeader, Packet, TlvOption


class InvalidPath(ValueError):
    pass


class NameNotFound(LookupError):
    pass


@dataclass(frozen=True)
class PathRecord:
    name: str
    domain_path: tuple[int, ...]
    destination: IPv6Address
    options: tuple[TlvOption, ...] = ()


class PathStore:
    def __init__(self, domain_of: Callable[[IPv6Address], int | None] | None = None):
        self._domain_of = domain_of
        self._records: dict[str, PathRecord] = {}

    def register(self, record: PathRecord) -> PathStore:
        if not record.domain_path:
            raise InvalidPath(f"{record.name}: empty domain path")
        if self._domain_of is not None:
            owner = self._domain_of(record.destination)
            if owner != record.domain_path[-1]:
                raise InvalidPath(
                    f"{record.name}: path ends in AS{record.domain_path[-1]} "
                    f"but {record.destination} belongs to {'nobody' if owner is None else f'AS{owner}'}"
                )
        self._records[record.name] = record
        return self

    def query(self, name: str) -> PathRecord:
        try:
            return self._records[name]
        except KeyError:
            raise NameNotFound(name) from None

    def names(self) -> list[str]:
        return sorted(self._records)

    def __len__(self):
        return len(self._records)


def register(store: PathStore, record: PathRecord) -> PathStore:
    return store.register(record)


def query(store: PathStore, name: str) -> PathRecord:
    return store.query(name)


def build_packet(record: PathRecord, source: IPv6Address, payload: bytes = b"",
                 upper_protocol: int = NH_NONE, hop_limit: int = 64, extra_options=()) -> Packet:
    """Source-side packet construction from a resolved record."""
    inner = Packet(Ipv6BaseHeader(source, record.destination, upper_protocol, hop_limit), None, payload)
    return encapsulate_dlsr(inner, record.domain_path, record.options + tuple(extra_options))
