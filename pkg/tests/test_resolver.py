from ipaddress import IPv6Address

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlr.forwarding import EmptyPath
from dlr.options import DeadlineOption
from dlr.resolver import InvalidPath, NameNotFound, PathRecord, PathStore, build_packet, query, register
from dlr.wire import DlsrHeader, Packet, decode_dlsr, encode_dlsr

DST = IPv6Address("2001:db8:5::9")


def owner(addr):
    return (int(addr) >> 80) & 0xFFFF if str(addr).startswith("2001:db8:") else None


def test_register_and_query():
    store = PathStore(owner)
    rec = PathRecord("render", (0, 1, 2, 5), DST)
    assert query(register(store, rec), "render") == rec


def test_replace():
    store = PathStore(owner)
    store.register(PathRecord("render", (0, 1, 2, 5), DST))
    store.register(PathRecord("render", (0, 3, 4, 5), DST))
    assert store.query("render").domain_path == (0, 3, 4, 5)
    assert store.names() == ["render"]


def test_path_must_end_at_owner():
    with pytest.raises(InvalidPath):
        PathStore(owner).register(PathRecord("bad", (0, 1, 2), DST))


def test_unknown_name():
    with pytest.raises(NameNotFound):
        PathStore().query("nope")


def test_build_packet():
    rec = PathRecord("render", (0, 1, 2, 5), DST, (DeadlineOption(900).to_tlv(),))
    pkt = build_packet(rec, IPv6Address("2001:db8::10"), b"hi", 17)
    rh = pkt.routing_header
    assert isinstance(rh, DlsrHeader)
    assert rh.path == (0, 1, 2, 5) and rh.domains_left == 3 and rh.original_destination == DST
    assert rh.next_header == 17 and rh.options == rec.options
    assert Packet.decode(pkt.encode()).routing_header == rh


def test_empty_record_path():
    with pytest.raises(InvalidPath):
        PathStore().register(PathRecord("x", (), DST))
    with pytest.raises(EmptyPath):
        build_packet(PathRecord("x", (), DST), DST)


@given(st.text(min_size=1, max_size=8), st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=30))
def test_roundtrip_and_sound_packets(name, path):
    store = PathStore()
    rec = PathRecord(name, tuple(path), DST)
    assert store.register(rec).query(name) == rec
    rh = build_packet(rec, IPv6Address("::1")).routing_header
    assert rh.domains_left == rh.first_domain == len(path) - 1
    assert decode_dlsr(encode_dlsr(rh)) == rh
