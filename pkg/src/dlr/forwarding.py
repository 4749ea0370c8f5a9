"""Per-node packet processing.

Each function is a pure transition ``(node state, packet) -> (packet, action)``.
Only border routers ever look inside a DLR routing header.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

from .tables import DomainEntryTable, Fib, NoRoute, NoSuchDomain
from .topology import NodeIdentity, NodeKind
from .wire import NH_ROUTING, DbdHeader, DlsrHeader, Packet, TlvOption

__all__ = [
    "Deliver", "Drop", "DropReason", "EmptyPath", "ForwardTo", "ForwardingAction",
    "NodeIdentity", "NodeKind", "dbd_process", "dlsr_process", "encapsulate_dbd",
    "encapsulate_dlsr", "interior_forward", "process",
]


class DropReason(str, Enum):
    NO_ROUTE = "NoRoute"
    NO_ROUTE_TO_NEXT_DOMAIN = "NoRouteToNextDomain"
    MALFORMED = "Malformed"
    HOP_LIMIT_EXCEEDED = "HopLimitExceeded"
    DEADLINE_INFEASIBLE = "DeadlineInfeasible"


@dataclass(frozen=True)
class ForwardTo:
    next_hop: object


@dataclass(frozen=True)
class Deliver:
    pass


@dataclass(frozen=True)
class Drop:
    reason: DropReason


ForwardingAction = Union[ForwardTo, Deliver, Drop]


class EmptyPath(ValueError):
    pass


def encapsulate_dlsr(packet: Packet, path, options: tuple[TlvOption, ...] = ()) -> Packet:
    """Wrap ``packet`` in a DLSR header for ``path`` (travel order, source domain first)."""
    path = tuple(path)
    if not path:
        raise EmptyPath("a domain-level source route needs at least the source domain")
    rh = DlsrHeader(
        next_header=packet.base.next_header,
        domains_left=len(path) - 1,
        domain_list=path[::-1],
        original_destination=packet.base.destination,
        options=tuple(options),
    )
    return Packet(replace(packet.base, next_header=NH_ROUTING), rh, packet.payload)


def encapsulate_dbd(packet: Packet, options: tuple[TlvOption, ...] = ()) -> Packet:
    rh = DbdHeader(
        next_header=packet.base.next_header,
        original_destination=packet.base.destination,
        options=tuple(options),
    )
    return Packet(replace(packet.base, next_header=NH_ROUTING), rh, packet.payload)


def interior_forward(fib: Fib, packet: Packet, local=()) -> tuple[Packet, ForwardingAction]:
    """Plain destination-based forwarding; reads the base header only."""
    base = packet.base
    if base.destination in local:
        return packet, Deliver()
    if base.hop_limit <= 1:
        return packet, Drop(DropReason.HOP_LIMIT_EXCEEDED)
    try:
        route = fib.lookup(base.destination)
    except NoRoute:
        return packet, Drop(DropReason.NO_ROUTE)
    return replace(packet, base=replace(base, hop_limit=base.hop_limit - 1)), ForwardTo(route.next_hop)


def dlsr_process(node: NodeIdentity, det: DomainEntryTable, fib: Fib, packet: Packet) -> tuple[Packet, ForwardingAction]:
    rh = packet.routing_header
    i = rh.domains_left
    if i >= len(rh.domain_list):
        return packet, Drop(DropReason.MALFORMED)
    targeted = node.owns(packet.destination)
    if rh.domain_list[i] != node.domain:
        if targeted:
            # addressed as the entry point of a domain the path is not in
            return packet, Drop(DropReason.MALFORMED)
        return interior_forward(fib, packet, node.addresses)
    if i == 0:
        packet = packet.with_destination(rh.original_destination)
    else:
        try:
            entry = det.lookup(rh.domain_list[i - 1])
        except NoSuchDomain:
            return packet, Drop(DropReason.NO_ROUTE_TO_NEXT_DOMAIN)
        packet = replace(packet, base=replace(packet.base, destination=entry),
                         routing_header=replace(rh, domains_left=i - 1))
    return interior_forward(fib, packet, node.addresses)


def dbd_process(node: NodeIdentity, det: DomainEntryTable, fib: Fib, packet: Packet) -> tuple[Packet, ForwardingAction]:
    od = packet.routing_header.original_destination
    dst = packet.destination
    if not (node.owns(dst) or dst == od):
        return interior_forward(fib, packet, node.addresses)
    if node.owns(od):
        new_dst = od
    else:
        try:
            route = fib.lookup(od)
        except NoRoute:
            return packet, Drop(DropReason.NO_ROUTE)
        if route.next_domain is None or route.next_domain == node.domain:
            new_dst = od
        else:
            try:
                new_dst = det.lookup(route.next_domain)
            except NoSuchDomain:
                return packet, Drop(DropReason.NO_ROUTE_TO_NEXT_DOMAIN)
    return interior_forward(fib, packet.with_destination(new_dst), node.addresses)


def process(node: NodeIdentity, det: DomainEntryTable | None, fib: Fib, packet: Packet) -> tuple[Packet, ForwardingAction]:
    """Dispatch on node kind and routing-header type."""
    rh = packet.routing_header
    if node.kind is NodeKind.BORDER and det is not None:
        if isinstance(rh, DlsrHeader):
            return dlsr_process(node, det, fib, packet)
        if isinstance(rh, DbdHeader):
            return dbd_process(node, det, fib, packet)
    return interior_forward(fib, packet, node.addresses)
