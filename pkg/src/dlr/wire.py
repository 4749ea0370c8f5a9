"""Bit-exact codecs for the IPv6 base header and the two DLR routing headers.

Layouts (all multi-octet fields big-endian)::

    DLSR routing header
     0                   1                   2                   3
    +---------------+---------------+---------------+---------------+
    |  Next Header  |    Hdr Len    | Routing Type  | Domains Left  |
    +---------------+---------------+---------------+---------------+
    | First Domain  |                 Reserved (24)                 |
    +---------------+-----------------------------------------------+
    |            Original Destination Address (128 bits)            |
    +---------------------------------------------------------------+
    |      Domain ID [0] (last domain on the path, 32 bits)        |
    |                              ...                              |
    |      Domain ID [n-1] (first domain on the path)              |
    +---------------------------------------------------------------+
    |                     TLV options + padding                     |
    +---------------------------------------------------------------+

    DBD routing header
    +---------------+---------------+---------------+---------------+
    |  Next Header  |    Hdr Len    | Routing Type  |   Reserved    |
    +---------------+---------------+---------------+---------------+
    |                        Reserved (32)                          |
    +---------------------------------------------------------------+
    |            Original Destination Address (128 bits)            |
    +---------------------------------------------------------------+
    |                     TLV options + padding                     |
    +---------------------------------------------------------------+

Hdr Len counts 8-octet units after the first 8 octets.  Both headers are
padded to a multiple of 8 octets with Pad1/PadN options appended after the
caller's options; padding is stripped again on decode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum
from ipaddress import IPv6Address
from typing import Union

IPV6_HEADER_LEN = 40
NH_ROUTING = 43
NH_NONE = 59

# Experimental routing types (RFC 4727); SRH is 4.
RT_DLSR = 253
RT_DBD = 254

RH_FIXED_LEN = 8
RH_MIN_LEN = RH_FIXED_LEN + 16
MAX_RH_LEN = (255 + 1) * 8
MAX_DOMAINS = 255
MAX_DOMAIN_ID = 0xFFFFFFFF


class OptionType(IntEnum):
    PAD1 = 0
    PADN = 1
    DEADLINE = 3
    TELEMETRY = 4
    SERVICE_CHAIN = 5


class WireError(ValueError):
    """Base class for every codec failure."""


class Truncated(WireError):
    pass


class WrongRoutingType(WireError):
    pass


class IndexOutOfRange(WireError):
    pass


class MalformedTlv(WireError):
    pass


class DomainListTooLong(WireError):
    pass


class OptionTooLong(WireError):
    pass


class HeaderTooLong(WireError):
    pass


@dataclass(frozen=True)
class Ipv6BaseHeader:
    source: IPv6Address
    destination: IPv6Address
    next_header: int = NH_NONE
    hop_limit: int = 64
    traffic_class: int = 0
    flow_label: int = 0
    payload_length: int = 0

    version = 6

    def encode(self) -> bytes:
        word0 = (6 << 28) | ((self.traffic_class & 0xFF) << 20) | (self.flow_label & 0xFFFFF)
        return (
            struct.pack("!IHBB", word0, self.payload_length, self.next_header, self.hop_limit)
            + self.source.packed
            + self.destination.packed
        )

    @classmethod
    def decode(cls, buf: bytes) -> Ipv6BaseHeader:
        if len(buf) < IPV6_HEADER_LEN:
            raise Truncated(f"IPv6 header needs {IPV6_HEADER_LEN} bytes, got {len(buf)}")
        word0, plen, nh, hlim = struct.unpack_from("!IHBB", buf)
        if word0 >> 28 != 6:
            raise WireError(f"IP version {word0 >> 28} is not 6")
        return cls(
            source=IPv6Address(bytes(buf[8:24])),
            destination=IPv6Address(bytes(buf[24:40])),
            next_header=nh,
            hop_limit=hlim,
            traffic_class=(word0 >> 20) & 0xFF,
            flow_label=word0 & 0xFFFFF,
            payload_length=plen,
        )


@dataclass(frozen=True)
class TlvOption:
    option_type: int
    value: bytes = b""

    @property
    def length(self) -> int:
        return len(self.value)

    def encode(self) -> bytes:
        if self.option_type == OptionType.PAD1:
            return b"\x00"
        if len(self.value) > 255:
            raise OptionTooLong(f"option {self.option_type} value is {len(self.value)} bytes (max 255)")
        return bytes((self.option_type, len(self.value))) + self.value

    @property
    def encoded_size(self) -> int:
        return 1 if self.option_type == OptionType.PAD1 else 2 + len(self.value)


def _padding(n: int) -> bytes:
    if n == 0:
        return b""
    if n == 1:
        return b"\x00"
    return bytes((OptionType.PADN, n - 2)) + bytes(n - 2)


def _encode_options(options, used: int) -> bytes:
    body = b"".join(opt.encode() for opt in options)
    return body + _padding(-(used + len(body)) % 8)


def _decode_options(buf: bytes) -> tuple[TlvOption, ...]:
    out = []
    pos = 0
    while pos < len(buf):
        otype = buf[pos]
        if otype == OptionType.PAD1:
            pos += 1
            continue
        if pos + 2 > len(buf):
            raise MalformedTlv(f"option at offset {pos} lacks a length octet")
        olen = buf[pos + 1]
        end = pos + 2 + olen
        if end > len(buf):
            raise MalformedTlv(f"option at offset {pos} overruns the header by {end - len(buf)} bytes")
        if otype != OptionType.PADN:
            out.append(TlvOption(otype, bytes(buf[pos + 2:end])))
        pos = end
    return tuple(out)


def _check_total(total: int) -> int:
    if total > MAX_RH_LEN:
        raise HeaderTooLong(f"routing header would be {total} bytes (max {MAX_RH_LEN})")
    return (total - 8) // 8


def _read_fixed(buf: bytes, expected_type: int) -> int:
    """Validate the common 8-octet prefix and return the full header length."""
    if len(buf) < RH_FIXED_LEN:
        raise Truncated(f"routing header needs at least {RH_FIXED_LEN} bytes, got {len(buf)}")
    if buf[2] != expected_type:
        raise WrongRoutingType(f"routing type {buf[2]}, expected {expected_type}")
    total = (buf[1] + 1) * 8
    if total < RH_MIN_LEN:
        raise Truncated(f"length field {buf[1]} is shorter than the {RH_MIN_LEN}-byte minimum")
    if len(buf) < total:
        raise Truncated(f"length field claims {total} bytes, buffer has {len(buf)}")
    if len(buf) > total:
        raise WireError(f"{len(buf) - total} trailing bytes after routing header")
    return total


@dataclass(frozen=True)
class DlsrHeader:
    """Domain-level source route.

    ``domain_list`` is kept in wire order: index 0 is the last domain and
    index ``n - 1`` the first, so ``domains_left`` indexes it directly.
    """

    next_header: int
    domains_left: int
    domain_list: tuple[int, ...]
    original_destination: IPv6Address
    options: tuple[TlvOption, ...] = ()

    routing_type = RT_DLSR

    @property
    def first_domain(self) -> int:
        return len(self.domain_list) - 1

    @property
    def path(self) -> tuple[int, ...]:
        """Domains in travel order."""
        return tuple(reversed(self.domain_list))

    @property
    def current_domain(self) -> int:
        return self.domain_list[self.domains_left]


@dataclass(frozen=True)
class DbdHeader:
    next_header: int
    original_destination: IPv6Address
    options: tuple[TlvOption, ...] = ()

    routing_type = RT_DBD


@dataclass(frozen=True)
class OpaqueRoutingHeader:
    """A routing header of a type this node does not implement, kept verbatim."""

    raw: bytes

    @property
    def next_header(self) -> int:
        return self.raw[0]

    @property
    def routing_type(self) -> int:
        return self.raw[2]

    @property
    def options(self) -> tuple[TlvOption, ...]:
        return ()


RoutingHeader = Union[DlsrHeader, DbdHeader, OpaqueRoutingHeader]


def encode_dlsr(header: DlsrHeader) -> bytes:
    n = len(header.domain_list)
    if n > MAX_DOMAINS:
        raise DomainListTooLong(f"{n} domains (max {MAX_DOMAINS})")
    if n == 0:
        raise IndexOutOfRange("domain list is empty")
    if not 0 <= header.domains_left < n:
        raise IndexOutOfRange(f"domains_left {header.domains_left} outside list of {n}")
    for dom in header.domain_list:
        if not 0 <= dom <= MAX_DOMAIN_ID:
            raise WireError(f"domain id {dom} does not fit 32 bits")
    used = RH_MIN_LEN + 4 * n
    opts = _encode_options(header.options, used)
    total = used + len(opts)
    hdr_len = _check_total(total)
    return (
        struct.pack("!BBBBB3x", header.next_header, hdr_len, RT_DLSR, header.domains_left, n - 1)
        + header.original_destination.packed
        + struct.pack(f"!{n}I", *header.domain_list)
        + opts
    )


def decode_dlsr(buf: bytes) -> DlsrHeader:
    buf = bytes(buf)
    total = _read_fixed(buf, RT_DLSR)
    nh, _, _, left, first = struct.unpack_from("!BBBBB", buf)
    n = first + 1
    if left > first:
        raise IndexOutOfRange(f"domains_left {left} exceeds first_domain {first}")
    if RH_MIN_LEN + 4 * n > total:
        raise IndexOutOfRange(f"first_domain {first} implies {n} entries, header holds fewer")
    domains = struct.unpack_from(f"!{n}I", buf, RH_MIN_LEN)
    return DlsrHeader(
        next_header=nh,
        domains_left=left,
        domain_list=tuple(domains),
        original_destination=IPv6Address(buf[8:24]),
        options=_decode_options(buf[RH_MIN_LEN + 4 * n:total]),
    )


def encode_dbd(header: DbdHeader) -> bytes:
    opts = _encode_options(header.options, RH_MIN_LEN)
    total = RH_MIN_LEN + len(opts)
    hdr_len = _check_total(total)
    return (
        struct.pack("!BBB5x", header.next_header, hdr_len, RT_DBD)
        + header.original_destination.packed
        + opts
    )


def decode_dbd(buf: bytes) -> DbdHeader:
    buf = bytes(buf)
    total = _read_fixed(buf, RT_DBD)
    return DbdHeader(
        next_header=buf[0],
        original_destination=IPv6Address(buf[8:24]),
        options=_decode_options(buf[RH_MIN_LEN:total]),
    )


def encode_routing_header(header: RoutingHeader) -> bytes:
    if isinstance(header, DlsrHeader):
        return encode_dlsr(header)
    if isinstance(header, DbdHeader):
        return encode_dbd(header)
    return header.raw


def decode_routing_header(buf: bytes) -> RoutingHeader:
    if len(buf) < RH_FIXED_LEN:
        raise Truncated(f"routing header needs at least {RH_FIXED_LEN} bytes, got {len(buf)}")
    rtype = buf[2]
    if rtype == RT_DLSR:
        return decode_dlsr(buf)
    if rtype == RT_DBD:
        return decode_dbd(buf)
    total = (buf[1] + 1) * 8
    if len(buf) != total:
        raise Truncated(f"length field claims {total} bytes, buffer has {len(buf)}")
    return OpaqueRoutingHeader(bytes(buf))


def dlsr_overhead(n_domains: int, options=()) -> int:
    """Encoded DLSR header size: 24 + 4n + options, rounded up to 8 octets."""
    if n_domains < 1:
        raise ValueError("a DLSR path has at least one domain")
    raw = RH_MIN_LEN + 4 * n_domains + sum(opt.encoded_size for opt in options)
    return -(-raw // 8) * 8


def srv6_comparison_length(n_segments: int) -> int:
    """Size of an SRv6 SRH carrying ``n_segments`` SIDs and no TLVs."""
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    return 8 + 16 * n_segments


@dataclass(frozen=True)
class Packet:
    base: Ipv6BaseHeader
    routing_header: RoutingHeader | None = None
    payload: bytes = field(default=b"", repr=False)

    @property
    def destination(self) -> IPv6Address:
        return self.base.destination

    @property
    def upper_protocol(self) -> int:
        if self.routing_header is not None:
            return self.routing_header.next_header
        return self.base.next_header

    def with_destination(self, dst: IPv6Address) -> Packet:
        return replace(self, base=replace(self.base, destination=dst))

    def with_routing_header(self, rh: RoutingHeader) -> Packet:
        return replace(self, routing_header=rh)

    def encode(self) -> bytes:
        rh = b""
        if self.routing_header is not None:
            if self.base.next_header != NH_ROUTING:
                raise WireError("base header must announce next header 43 when a routing header follows")
            rh = encode_routing_header(self.routing_header)
        plen = len(rh) + len(self.payload)
        if plen > 0xFFFF:
            raise WireError(f"payload length {plen} needs a jumbogram")
        return replace(self.base, payload_length=plen).encode() + rh + self.payload

    @classmethod
    def decode(cls, buf: bytes) -> Packet:
        buf = bytes(buf)
        base = Ipv6BaseHeader.decode(buf)
        if base.payload_length != len(buf) - IPV6_HEADER_LEN:
            raise Truncated(f"payload length {base.payload_length} != {len(buf) - IPV6_HEADER_LEN} bytes present")
        base = replace(base, payload_length=0)
        rest = buf[IPV6_HEADER_LEN:]
        if base.next_header != NH_ROUTING:
            return cls(base, None, rest)
        if len(rest) < RH_FIXED_LEN:
            raise Truncated("routing header announced but missing")
        rh_len = (rest[1] + 1) * 8
        if len(rest) < rh_len:
            raise Truncated(f"routing header claims {rh_len} bytes, {len(rest)} present")
        return cls(base, decode_routing_header(rest[:rh_len]), rest[rh_len:])


def to_hex(data: bytes) -> str:
    return data.hex()


def from_hex(text: str) -> bytes:
    return bytes.fromhex("".join(text.split()))
