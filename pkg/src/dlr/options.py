"""Typed views of the functional routing-header options.

Value layouts (big-endian, after the type/length octets)::

    Deadline       budget_remaining u32 (us) | accumulated u32 (us) | overrun u32 (us)
    Telemetry      namespace u16 | capacity u8 | next_free u8 | flags u8 | reserved 3
                   then capacity x (domain u32 | ingress_ts u64 | egress_ts u64)
    ServiceChain   chain_id u32 | service_index u8 | flags u8
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from enum import Enum

from .wire import OptionType, TlvOption, WireError

TELEMETRY_HEADER_LEN = 8
TELEMETRY_RECORD_LEN = 20
MAX_TELEMETRY_CAPACITY = (255 - TELEMETRY_HEADER_LEN) // TELEMETRY_RECORD_LEN
_U32 = 0xFFFFFFFF


class MalformedOption(WireError):
    pass


class MismatchedEgress(ValueError):
    """Egress stamp with no open record for the stamping domain."""


class Boundary(str, Enum):
    INGRESS = "ingress"
    EGRESS = "egress"


@dataclass(frozen=True)
class DeadlineOption:
    budget_remaining: int
    accumulated: int = 0
    overrun: int = 0

    TYPE = OptionType.DEADLINE

    @property
    def original_budget(self) -> int:
        return self.budget_remaining + self.accumulated - self.overrun

    def to_tlv(self) -> TlvOption:
        return TlvOption(self.TYPE, struct.pack("!III", self.budget_remaining, self.accumulated, self.overrun))

    @classmethod
    def from_tlv(cls, opt: TlvOption) -> DeadlineOption:
        if len(opt.value) != 12:
            raise MalformedOption(f"deadline option value is {len(opt.value)} bytes, expected 12")
        return cls(*struct.unpack("!III", opt.value))


def deadline_check(option: DeadlineOption, min_residual_delay: int) -> bool:
    """True when the remaining budget still covers the residual lower bound."""
    return option.budget_remaining >= min_residual_delay


def deadline_debit(option: DeadlineOption, residence: int) -> DeadlineOption:
    if residence < 0:
        raise ValueError("residence time cannot be negative")
    short = max(0, residence - option.budget_remaining)
    return DeadlineOption(
        budget_remaining=option.budget_remaining - residence + short,
        accumulated=min(_U32, option.accumulated + residence),
        overrun=min(_U32, option.overrun + short),
    )


@dataclass(frozen=True)
class TelemetryRecord:
    domain: int
    ingress_ts: int
    egress_ts: int = 0

    @property
    def complete(self) -> bool:
        return self.egress_ts != 0


@dataclass(frozen=True)
class TelemetryOption:
    """Pre-allocated per-domain trace; ``records`` holds the filled slots."""

    capacity: int
    records: tuple[TelemetryRecord, ...] = ()
    overflow: bool = False
    namespace: int = 0

    TYPE = OptionType.TELEMETRY

    def __post_init__(self):
        if not 0 < self.capacity <= MAX_TELEMETRY_CAPACITY:
            raise MalformedOption(f"telemetry capacity {self.capacity} outside 1..{MAX_TELEMETRY_CAPACITY}")
        if len(self.records) > self.capacity:
            raise MalformedOption(f"{len(self.records)} records exceed capacity {self.capacity}")

    @property
    def next_free(self) -> int:
        return len(self.records)

    def to_tlv(self) -> TlvOption:
        head = struct.pack("!HBBB3x", self.namespace, self.capacity, self.next_free, int(self.overflow))
        body = b"".join(struct.pack("!IQQ", r.domain, r.ingress_ts, r.egress_ts) for r in self.records)
        body += bytes(TELEMETRY_RECORD_LEN * (self.capacity - self.next_free))
        return TlvOption(self.TYPE, head + body)

    @classmethod
    def from_tlv(cls, opt: TlvOption) -> TelemetryOption:
        v = opt.value
        if len(v) < TELEMETRY_HEADER_LEN:
            raise MalformedOption("telemetry option shorter than its header")
        ns, cap, nfree, flags = struct.unpack_from("!HBBB", v)
        if len(v) != TELEMETRY_HEADER_LEN + cap * TELEMETRY_RECORD_LEN:
            raise MalformedOption(f"telemetry value is {len(v)} bytes for capacity {cap}")
        if nfree > cap:
            raise MalformedOption(f"next_free {nfree} exceeds capacity {cap}")
        recs = tuple(
            TelemetryRecord(*struct.unpack_from("!IQQ", v, TELEMETRY_HEADER_LEN + i * TELEMETRY_RECORD_LEN))
            for i in range(nfree)
        )
        return cls(capacity=cap, records=recs, overflow=bool(flags & 1), namespace=ns)


def telemetry_stamp(option: TelemetryOption, domain: int, ts: int, boundary: Boundary) -> TelemetryOption:
    """Apply one border-router stamp.

    Once the slots run out the option is flagged and left alone; the packet
    keeps flowing.
    """
    if option.overflow:
        return option
    if boundary is Boundary.INGRESS:
        if option.next_free >= option.capacity:
            return replace(option, overflow=True)
        return replace(option, records=option.records + (TelemetryRecord(domain, ts),))
    last = option.records[-1] if option.records else None
    if last is None or last.domain != domain or last.complete:
        raise MismatchedEgress(f"no open telemetry record for AS{domain}")
    return replace(option, records=option.records[:-1] + (replace(last, egress_ts=ts),))


@dataclass(frozen=True)
class ServiceChainOption:
    chain_id: int
    service_index: int
    complete: bool = False

    TYPE = OptionType.SERVICE_CHAIN

    def to_tlv(self) -> TlvOption:
        return TlvOption(self.TYPE, struct.pack("!IBB", self.chain_id, self.service_index, int(self.complete)))

    @classmethod
    def from_tlv(cls, opt: TlvOption) -> ServiceChainOption:
        if len(opt.value) != 6:
            raise MalformedOption(f"service chain value is {len(opt.value)} bytes, expected 6")
        cid, idx, flags = struct.unpack("!IBB", opt.value)
        return cls(cid, idx, bool(flags & 1))


def service_chain_step(option: ServiceChainOption, hosts_function: bool) -> ServiceChainOption:
    if not hosts_function:
        return option
    if option.service_index == 0:
        return replace(option, complete=True)
    return replace(option, service_index=option.service_index - 1)


_TYPED = {cls.TYPE: cls for cls in (DeadlineOption, TelemetryOption, ServiceChainOption)}


def find_option(options, cls):
    """Decode the first option of ``cls``'s type, or None."""
    for opt in options:
        if opt.option_type == cls.TYPE:
            return cls.from_tlv(opt)
    return None


def put_option(options, typed) -> tuple[TlvOption, ...]:
    """Replace the first option of the same type in place, else append."""
    tlv = typed.to_tlv()
    out = list(options)
    for i, opt in enumerate(out):
        if opt.option_type == tlv.option_type:
            out[i] = tlv
            return tuple(out)
    return tuple(out) + (tlv,)


def decode_typed(opt: TlvOption):
    """Typed view of a known option, or the raw TLV for anything else."""
    cls = _TYPED.get(opt.option_type)
    return opt if cls is None else cls.from_tlv(opt)
