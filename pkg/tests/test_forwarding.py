from dataclasses import replace
from ipaddress import IPv6Address

import pytest

from dlr.forwarding import (
    Deliver,
    Drop,
    DropReason,
    EmptyPath,
    ForwardTo,
    dbd_process,
    dlsr_process,
    encapsulate_dbd,
    encapsulate_dlsr,
    interior_forward,
    process,
)
from dlr.tables import DomainEntryTable
from dlr.wire import NH_ROUTING, DbdHeader, Ipv6BaseHeader, OpaqueRoutingHeader, Packet

DST = IPv6Address("2001:db8:5::9")
SRC = IPv6Address("2001:db8:0::10")


def inner(dst=DST, hop_limit=64):
    return Packet(Ipv6BaseHeader(SRC, dst, 17, hop_limit), None, b"data")


@pytest.fixture(scope="module")
def net(request):
    from dlr import scenario_path
    from dlr.sim import build, load_scenario
    sim = build(load_scenario(scenario_path("six_domain")))
    nodes = sim.converged.nodes

    def at(node_id):
        st = nodes[node_id]
        return st.identity, st.det, st.fib

    at.addr = lambda n: sim.topology.nodes[n].address
    return at


class TestEncapsulation:
    def test_reference_path(self):
        pkt = encapsulate_dlsr(inner(), [0, 1, 2, 5])
        rh = pkt.routing_header
        assert rh.domain_list == (5, 2, 1, 0)
        assert rh.first_domain == 3 and rh.domains_left == 3
        assert rh.next_header == 17 and pkt.base.next_header == NH_ROUTING
        assert rh.original_destination == DST and pkt.destination == DST

    def test_single_domain(self):
        rh = encapsulate_dlsr(inner(), [5]).routing_header
        assert rh.domains_left == 0 and rh.domain_list == (5,)

    def test_empty_path(self):
        with pytest.raises(EmptyPath):
            encapsulate_dlsr(inner(), [])

    def test_dbd(self):
        pkt = encapsulate_dbd(inner())
        assert pkt.routing_header == DbdHeader(17, DST)


class TestDlsr:
    def test_first_domain_egress(self, net):
        x, det, fib = net("x")
        pkt, action = dlsr_process(x, det, fib, encapsulate_dlsr(inner(), [0, 1, 2, 5]))
        assert pkt.routing_header.domains_left == 2
        assert pkt.destination == net.addr("a")
        assert action == ForwardTo(net.addr("a"))
        assert pkt.payload == b"data"

    def test_transit_ingress(self, net):
        a, det, fib = net("a")
        pkt = encapsulate_dlsr(inner(), [0, 1, 2, 5])
        pkt = replace(pkt, base=replace(pkt.base, destination=net.addr("a")),
                      routing_header=replace(pkt.routing_header, domains_left=2))
        out, action = dlsr_process(a, det, fib, pkt)
        assert out.destination == net.addr("d") and out.routing_header.domains_left == 1
        assert isinstance(action, ForwardTo) and action.next_hop == net.addr("r1")

    def test_last_domain_restores(self, net):
        y, det, fib = net("y")
        pkt = encapsulate_dlsr(inner(), [0, 1, 2, 5])
        pkt = replace(pkt, base=replace(pkt.base, destination=net.addr("y")),
                      routing_header=replace(pkt.routing_header, domains_left=0))
        out, action = dlsr_process(y, det, fib, pkt)
        assert out.destination == DST
        assert action == ForwardTo(net.addr("r5"))

    def test_missing_det_entry(self, net):
        a, _, fib = net("a")
        pkt = encapsulate_dlsr(inner(), [0, 1, 2, 5])
        pkt = replace(pkt, base=replace(pkt.base, destination=net.addr("a")),
                      routing_header=replace(pkt.routing_header, domains_left=2))
        _, action = dlsr_process(a, DomainEntryTable(), fib, pkt)
        assert action == Drop(DropReason.NO_ROUTE_TO_NEXT_DOMAIN)

    def test_addressed_to_wrong_domain(self, net):
        a, det, fib = net("a")
        pkt = encapsulate_dlsr(inner(net.addr("a")), [0, 3, 4, 5])
        pkt = replace(pkt, routing_header=replace(pkt.routing_header, domains_left=2))
        _, action = dlsr_process(a, det, fib, pkt)
        assert action == Drop(DropReason.MALFORMED)

    def test_passing_through_unrelated(self, net):
        b, det, fib = net("b")
        pkt = encapsulate_dlsr(inner(net.addr("d")), [0, 1, 2, 5])
        pkt = replace(pkt, routing_header=replace(pkt.routing_header, domains_left=1))
        out, action = dlsr_process(b, det, fib, pkt)
        assert out.routing_header == pkt.routing_header
        assert action == ForwardTo(net.addr("d"))


class TestDbd:
    def test_source_egress(self, net):
        x, det, fib = net("x")
        out, action = dbd_process(x, det, fib, encapsulate_dbd(inner()))
        assert out.destination == net.addr("a")
        assert action == ForwardTo(net.addr("a"))

    def test_destination_domain_restores(self, net):
        y, det, fib = net("y")
        pkt = encapsulate_dbd(inner())
        pkt = pkt.with_destination(net.addr("y"))
        out, action = dbd_process(y, det, fib, pkt)
        assert out.destination == DST and action == ForwardTo(net.addr("r5"))

    def test_unreachable(self, net):
        x, det, fib = net("x")
        _, action = dbd_process(x, det, fib, encapsulate_dbd(inner(IPv6Address("2001:db9::1"))))
        assert action == Drop(DropReason.NO_ROUTE)


class TestInterior:
    def test_fabric(self, net):
        r1, _, fib = net("r1")
        out, action = interior_forward(fib, inner(net.addr("d")), r1.addresses)
        assert action == ForwardTo(net.addr("b"))
        assert out.base.hop_limit == 63

    def test_hop_limit(self, net):
        r1, _, fib = net("r1")
        _, action = interior_forward(fib, inner(net.addr("d"), hop_limit=1), r1.addresses)
        assert action == Drop(DropReason.HOP_LIMIT_EXCEEDED)

    def test_local(self, net):
        r1, _, fib = net("r1")
        _, action = interior_forward(fib, inner(net.addr("r1")), r1.addresses)
        assert action == Deliver()

    def test_interior_ignores_routing_header(self, net):
        r1, det, fib = net("r1")
        pkt = encapsulate_dlsr(inner(net.addr("b")), [0, 1, 2, 5])
        out, _ = process(r1, det, fib, pkt)
        assert out.routing_header == pkt.routing_header


def test_unknown_routing_type_passes_border(net):
    x, det, fib = net("x")
    opaque = OpaqueRoutingHeader(bytes([17, 1, 4, 0]) + bytes(12))
    pkt = Packet(Ipv6BaseHeader(SRC, DST, NH_ROUTING), opaque, b"")
    out, action = process(x, det, fib, pkt)
    assert out.routing_header == opaque
    assert action == ForwardTo(net.addr("a"))
