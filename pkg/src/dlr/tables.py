"""Domain Entry Table, and a FIB whose entries double as the Next Domain Table."""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass
from ipaddress import IPv6Address, IPv6Network

_ALL_ONES = (1 << 128) - 1


class NoSuchDomain(LookupError):
    pass


class NoRoute(LookupError):
    pass


class DomainEntryTable:
    """Maps a peering domain to the address of its ingress border router.

    One address per domain; the first one configured or learned is kept.
    """

    def __init__(self, owner_addresses=()):
        self._owner = frozenset(owner_addresses)
        self._entries: dict[int, IPv6Address] = {}

    def add(self, domain: int, address: IPv6Address) -> bool:
        if address in self._owner:
            raise ValueError(f"DET entry for AS{domain} points at the owner's own address {address}")
        if domain in self._entries:
            return False
        self._entries[domain] = address
        return True

    def lookup(self, domain: int) -> IPv6Address:
        try:
            return self._entries[domain]
        except KeyError:
            raise NoSuchDomain(f"no route to next domain AS{domain}") from None

    def items(self):
        return sorted(self._entries.items())

    def __contains__(self, domain) -> bool:
        return domain in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def dump(self) -> list[str]:
        return [f"AS{dom} -> {addr}" for dom, addr in self.items()]


def det_lookup(det: DomainEntryTable, domain: int) -> IPv6Address:
    return det.lookup(domain)


@dataclass(frozen=True)
class RouteEntry:
    prefix: IPv6Network
    next_hop: IPv6Address
    next_domain: int | None = None
    as_path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.next_domain is not None and (not self.as_path or self.as_path[0] != self.next_domain):
            raise ValueError(f"next domain {self.next_domain} must head the AS path {self.as_path}")

    def format(self) -> str:
        nd = "-" if self.next_domain is None else str(self.next_domain)
        path = ",".join(map(str, self.as_path)) or "-"
        return f"{self.prefix} via {self.next_hop} nd={nd} path={path}"


class Fib:
    """Longest-prefix-match table, one bucket per prefix length."""

    def __init__(self, routes=()):
        self._buckets: dict[int, dict[int, RouteEntry]] = {}
        self._lengths: list[int] = []  # descending
        for entry in routes:
            self.install(entry)

    def install(self, entry: RouteEntry) -> Fib:
        plen = entry.prefix.prefixlen
        bucket = self._buckets.get(plen)
        if bucket is None:
            bucket = self._buckets[plen] = {}
            insort(self._lengths, -plen)
        bucket[int(entry.prefix.network_address)] = entry
        return self

    def lookup(self, destination: IPv6Address) -> RouteEntry:
        addr = int(destination)
        for neg in self._lengths:
            plen = -neg
            mask = (_ALL_ONES << (128 - plen)) & _ALL_ONES
            hit = self._buckets[plen].get(addr & mask)
            if hit is not None:
                return hit
        raise NoRoute(f"no route to {destination}")

    def get(self, prefix: IPv6Network) -> RouteEntry | None:
        return self._buckets.get(prefix.prefixlen, {}).get(int(prefix.network_address))

    def routes(self) -> list[RouteEntry]:
        return sorted(
            (e for b in self._buckets.values() for e in b.values()),
            key=lambda e: (int(e.prefix.network_address), e.prefix.prefixlen),
        )

    def __len__(self) -> int:
        return sum(len(b) for b in self._buckets.values())

    def dump(self) -> list[str]:
        return [e.format() for e in self.routes()]


def fib_lookup(fib: Fib, destination: IPv6Address) -> RouteEntry:
    return fib.lookup(destination)


def install_route(fib: Fib, entry: RouteEntry) -> Fib:
    return fib.install(entry)
