"""Deterministic discrete-event simulation of a multi-domain DLR network.

Packets cross links as encoded bytes, so every hop exercises the codecs.
Time is kept in integer nanoseconds; scenario files speak microseconds.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field, replace
from ipaddress import AddressValueError, IPv6Address, IPv6Network
from pathlib import Path

import yaml

from . import forwarding
from .control import Converged, converge
from .forwarding import Deliver, Drop, DropReason
from .options import (
    Boundary,
    DeadlineOption,
    MismatchedEgress,
    ServiceChainOption,
    TelemetryOption,
    deadline_check,
    deadline_debit,
    find_option,
    put_option,
    service_chain_step,
    telemetry_stamp,
)
from .resolver import InvalidPath, PathRecord, PathStore
from .topology import Domain, Link, NodeIdentity, NodeKind, Topology, TopologyError
from .wire import (
    DbdHeader,
    DlsrHeader,
    Ipv6BaseHeader,
    Packet,
    WireError,
    encode_routing_header,
    to_hex,
)

TRACE_SCHEMA = 1
UDP = 17
MODES = ("dlsr", "dbd", "plain")
US = 1000


class ValidationError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NotDelivered(LookupError):
    pass


@dataclass(frozen=True)
class NodeClock:
    offset_ns: int = 0
    egress_forgery_ns: int = 0


@dataclass
class FlowSpec:
    flow_id: str
    src: str
    mode: str
    dst: IPv6Address | None = None
    name: str | None = None
    path: tuple[int, ...] | str | None = None
    start_us: int = 0
    count: int = 1
    interval_us: int = 1000
    hop_limit: int = 64
    deadline_us: int | None = None
    telemetry: int | None = None
    service_chain: tuple[int, int] | None = None
    expect: dict = field(default_factory=dict)


@dataclass
class Scenario:
    topology: Topology
    flows: list[FlowSpec] = field(default_factory=list)
    records: list[PathRecord] = field(default_factory=list)
    sla_us: dict[int, int] = field(default_factory=dict)
    feasibility: dict[str, list[tuple[IPv6Network, int]]] = field(default_factory=dict)
    services: dict[int, frozenset[int]] = field(default_factory=dict)
    clocks: dict[str, NodeClock] = field(default_factory=dict)
    processing_delay_us: dict[NodeKind, int] = field(default_factory=dict)
    seed: int = 0
    name: str = ""


# --------------------------------------------------------------------------
# scenario files


def _get(d, key, path, kind=None, default=...):
    if not isinstance(d, dict):
        raise ValidationError(path, "expected a mapping")
    if key not in d:
        if default is ...:
            raise ValidationError(f"{path}.{key}", "missing")
        return default
    val = d[key]
    if kind is not None and not isinstance(val, kind):
        raise ValidationError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return val


def _int(d, key, path, default=..., minimum=None):
    val = _get(d, key, path, default=default)
    if val is default and default is not ...:
        return val
    if isinstance(val, bool) or not isinstance(val, int):
        raise ValidationError(f"{path}.{key}", f"expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ValidationError(f"{path}.{key}", f"must be >= {minimum}")
    return val


def _addr(val, path) -> IPv6Address:
    try:
        return IPv6Address(str(val))
    except (AddressValueError, ValueError):
        raise ValidationError(path, f"not an IPv6 address: {val!r}") from None


def _net(val, path) -> IPv6Network:
    try:
        return IPv6Network(str(val))
    except (AddressValueError, ValueError):
        raise ValidationError(path, f"not an IPv6 prefix: {val!r}") from None


def _domain_list(val, path) -> tuple[int, ...]:
    if isinstance(val, str):
        val = [x for x in val.replace(",", " ").split()]
    if not isinstance(val, list):
        raise ValidationError(path, "expected a list of AS numbers")
    out = []
    for i, x in enumerate(val):
        try:
            out.append(int(str(x).upper().removeprefix("AS")))
        except ValueError:
            raise ValidationError(f"{path}[{i}]", f"not an AS number: {x!r}") from None
    return tuple(out)


def parse_topology(doc: dict, path: str = "") -> Topology:
    topo = Topology()
    p = path or "$"
    for i, d in enumerate(_get(doc, "domains", p, list)):
        where = f"{p}.domains[{i}]"
        asn = _int(d, "id", where, minimum=0)
        if asn in topo.domains:
            raise ValidationError(f"{where}.id", f"duplicate domain {asn}")
        pfx = _get(d, "prefixes", where, list)
        topo.add_domain(Domain(asn, tuple(_net(x, f"{where}.prefixes[{j}]") for j, x in enumerate(pfx)),
                               str(d.get("name", ""))))
    for i, n in enumerate(_get(doc, "nodes", p, list)):
        where = f"{p}.nodes[{i}]"
        nid = str(_get(n, "id", where))
        if nid in topo.nodes:
            raise ValidationError(f"{where}.id", f"duplicate node {nid!r}")
        try:
            kind = NodeKind(_get(n, "kind", where))
        except ValueError:
            raise ValidationError(f"{where}.kind", "expected host, interior or border") from None
        raw = n.get("addresses", [n["address"]] if "address" in n else None)
        if not raw:
            raise ValidationError(f"{where}.address", "missing")
        addrs = tuple(_addr(a, f"{where}.address") for a in raw)
        dom = _int(n, "domain", where)
        if dom not in topo.domains:
            raise ValidationError(f"{where}.domain", f"unknown domain {dom}")
        topo.add_node(NodeIdentity(nid, kind, dom, addrs))
    links = list(_get(doc, "links", p, list, default=[])) + list(_get(doc, "peerings", p, list, default=[]))
    for i, l in enumerate(links):
        where = f"{p}.links[{i}]"
        a, b = str(_get(l, "a", where)), str(_get(l, "b", where))
        for end, key in ((a, "a"), (b, "b")):
            if end not in topo.nodes:
                raise ValidationError(f"{where}.{key}", f"unknown node {end!r}")
        topo.add_link(Link(a, b, _int(l, "latency_us", where, minimum=1), _int(l, "jitter_us", where, default=0, minimum=0)))
    try:
        topo.validate()
    except TopologyError as exc:
        raise ValidationError(f"{p}.{exc.path}", str(exc).split(": ", 1)[-1]) from None
    return topo


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError("$", "scenario must be a mapping")
    topo = parse_topology(doc)
    sc = Scenario(topology=topo, seed=_int(doc, "seed", "$", default=0), name=str(doc.get("name", "")))

    delays = _get(doc, "processing_delay_us", "$", dict, default={})
    for key, val in delays.items():
        try:
            kind = NodeKind(key)
        except ValueError:
            raise ValidationError(f"$.processing_delay_us.{key}", "unknown node kind") from None
        sc.processing_delay_us[kind] = _int(delays, key, "$.processing_delay_us", minimum=0)

    for key, val in _get(doc, "sla_us", "$", dict, default={}).items():
        sc.sla_us[_domain_list([key], "$.sla_us")[0]] = _int({"v": val}, "v", f"$.sla_us.{key}", minimum=0)

    for nid, table in _get(doc, "feasibility", "$", dict, default={}).items():
        where = f"$.feasibility.{nid}"
        if str(nid) not in topo.nodes or topo.nodes[str(nid)].kind is not NodeKind.BORDER:
            raise ValidationError(where, "feasibility tables belong to border routers")
        if not isinstance(table, dict):
            raise ValidationError(where, "expected prefix -> microseconds")
        sc.feasibility[str(nid)] = [(_net(pfx, where), _int(table, pfx, where, minimum=0)) for pfx in table]

    for key, chains in _get(doc, "services", "$", dict, default={}).items():
        dom = _domain_list([key], "$.services")[0]
        sc.services[dom] = frozenset(int(c) for c in (chains or []))

    for nid, spec in _get(doc, "clocks", "$", dict, default={}).items():
        where = f"$.clocks.{nid}"
        if str(nid) not in topo.nodes:
            raise ValidationError(where, f"unknown node {nid!r}")
        sc.clocks[str(nid)] = NodeClock(_int(spec, "offset_ns", where, default=0),
                                        _int(spec, "egress_forgery_ns", where, default=0))

    for i, r in enumerate(_get(doc, "records", "$", list, default=[])):
        where = f"$.records[{i}]"
        sc.records.append(PathRecord(str(_get(r, "name", where)),
                                     _domain_list(_get(r, "path", where), f"{where}.path"),
                                     _addr(_get(r, "destination", where), f"{where}.destination")))

    for i, f in enumerate(_get(doc, "flows", "$", list, default=[])):
        sc.flows.append(_parse_flow(f, f"$.flows[{i}]", sc))
    ids = [f.flow_id for f in sc.flows]
    if len(set(ids)) != len(ids):
        raise ValidationError("$.flows", "flow ids must be unique")
    return sc


def _parse_flow(f, where, sc: Scenario) -> FlowSpec:
    topo = sc.topology
    flow = FlowSpec(flow_id=str(_get(f, "id", where)), src=str(_get(f, "src", where)),
                    mode=str(_get(f, "mode", where, default="plain")))
    if flow.src not in topo.nodes:
        raise ValidationError(f"{where}.src", f"unknown node {flow.src!r}")
    if flow.mode not in MODES:
        raise ValidationError(f"{where}.mode", f"expected one of {', '.join(MODES)}")
    names = {r.name: r for r in sc.records}
    if "name" in f:
        flow.name = str(f["name"])
        if flow.name not in names:
            raise ValidationError(f"{where}.name", f"no path record named {flow.name!r}")
        flow.dst = names[flow.name].destination
    if "dst" in f:
        raw = str(f["dst"])
        flow.dst = topo.nodes[raw].address if raw in topo.nodes else _addr(raw, f"{where}.dst")
    if flow.dst is None:
        raise ValidationError(f"{where}.dst", "missing (give dst or name)")
    if "path" in f:
        flow.path = "auto" if f["path"] == "auto" else _domain_list(f["path"], f"{where}.path")
        if flow.path != "auto":
            if not flow.path:
                raise ValidationError(f"{where}.path", "empty path")
            for d in flow.path:
                if d not in topo.domains:
                    raise ValidationError(f"{where}.path", f"unknown domain {d}")
    if flow.mode == "dlsr" and flow.path is None and flow.name is None:
        raise ValidationError(where, "dlsr flows need a path source (path, 'auto' or name)")
    flow.start_us = _int(f, "start_us", where, default=0, minimum=0)
    flow.count = _int(f, "count", where, default=1, minimum=0)
    flow.interval_us = _int(f, "interval_us", where, default=1000, minimum=0)
    flow.hop_limit = _int(f, "hop_limit", where, default=64, minimum=1)
    opts = _get(f, "options", where, dict, default={})
    ow = f"{where}.options"
    if "deadline_us" in opts:
        flow.deadline_us = _int(opts, "deadline_us", ow, minimum=0)
    if "telemetry" in opts:
        flow.telemetry = _int(opts, "telemetry", ow, minimum=1)
        if flow.telemetry > 12:
            raise ValidationError(f"{ow}.telemetry", "at most 12 telemetry slots fit in one option")
    if "service_chain" in opts:
        sfc = opts["service_chain"]
        flow.service_chain = (_int(sfc, "chain_id", f"{ow}.service_chain", minimum=0),
                              _int(sfc, "index", f"{ow}.service_chain", minimum=0))
    flow.expect = dict(_get(f, "expect", where, dict, default={}))
    return flow


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError("$", f"unparseable scenario: {exc}") from None
    return parse_scenario(doc)


# --------------------------------------------------------------------------
# run-time state


@dataclass
class PacketOutcome:
    flow: str
    seq: int
    injected_at: int
    status: str = "in-flight"
    time: int | None = None
    reason: str | None = None
    node: str | None = None
    nodes: list[str] = field(default_factory=list)
    domains: list[int] = field(default_factory=list)
    final_packet: Packet | None = None
    debits_us: list[int] = field(default_factory=list)
    payload_intact: bool | None = None

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"

    @property
    def domain_sequence(self) -> list[int]:
        seq: list[int] = []
        for d in self.domains:
            if not seq or seq[-1] != d:
                seq.append(d)
        return seq


@dataclass
class TraceLog:
    records: list[dict] = field(default_factory=list)
    outcomes: dict[tuple[str, int], PacketOutcome] = field(default_factory=dict)

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)

    def steps(self, flow: str, seq: int = 0) -> list[dict]:
        return [r for r in self.records if r["flow"] == flow and r["seq"] == seq]

    def outcome(self, flow: str, seq: int = 0) -> PacketOutcome:
        return self.outcomes[(flow, seq)]


def end_to_end_delay(trace: TraceLog, flow: str, seq: int = 0) -> int:
    out = trace.outcomes.get((flow, seq))
    if out is None or not out.delivered:
        raise NotDelivered(f"{flow}/{seq} was not delivered")
    return out.time - out.injected_at


@dataclass
class _InFlight:
    outcome: PacketOutcome
    data: bytes
    payload: bytes
    upper: int
    domain_entry: int
    ingress_domain: int | None = None


class Simulation:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.topology = scenario.topology
        self.converged: Converged = converge(self.topology)
        self.paths = PathStore(self.topology.domain_of_address)
        for i, rec in enumerate(scenario.records):
            try:
                self.paths.register(rec)
            except InvalidPath as exc:
                raise ValidationError(f"$.records[{i}]", str(exc)) from None
        self._links = {}
        for link in self.topology.links:
            self._links[(link.a, link.b)] = link
            self._links[(link.b, link.a)] = link
        self._rngs = {link.link_id: random.Random(f"{scenario.seed}:{link.link_id}") for link in self.topology.links}
        self._queue: list = []
        self._counter = 0
        self.trace = TraceLog()
        for fi, flow in enumerate(scenario.flows):
            for seq in range(flow.count):
                t = (flow.start_us + seq * flow.interval_us) * US
                self._push(t, ("inject", fi, seq))

    def _push(self, t, event):
        heapq.heappush(self._queue, (t, self._counter, event))
        self._counter += 1

    # -- helpers ------------------------------------------------------------

    def _clock(self, node_id: str, t: int, egress: bool = False) -> int:
        c = self.scenario.clocks.get(node_id)
        if c is None:
            return t
        return max(0, t + c.offset_ns + (c.egress_forgery_ns if egress else 0))

    def _residual_bound_us(self, node_id: str, dst: IPv6Address) -> int:
        best = None
        for pfx, bound in self.scenario.feasibility.get(node_id, ()):
            if dst in pfx and (best is None or pfx.prefixlen > best[0]):
                best = (pfx.prefixlen, bound)
        return 0 if best is None else best[1]

    def resolve_path(self, flow: FlowSpec) -> tuple[int, ...]:
        if flow.name is not None and flow.path is None:
            return self.paths.query(flow.name).domain_path
        if flow.path != "auto":
            return flow.path
        src_dom = self.topology.nodes[flow.src].domain
        dst_dom = self.topology.domain_of_address(flow.dst)
        if dst_dom == src_dom:
            return (src_dom,)
        for pfx, path in self.converged.domains[src_dom].loc_rib.items():
            if flow.dst in pfx and path:
                return (src_dom,) + path
        return (src_dom,)

    def _options(self, flow: FlowSpec):
        opts = []
        if flow.deadline_us is not None:
            opts.append(DeadlineOption(flow.deadline_us).to_tlv())
        if flow.telemetry is not None:
            opts.append(TelemetryOption(flow.telemetry).to_tlv())
        if flow.service_chain is not None:
            opts.append(ServiceChainOption(*flow.service_chain).to_tlv())
        return tuple(opts)

    # -- event handling -----------------------------------------------------

    def run(self, until: int | None = None) -> TraceLog:
        while self._queue:
            if until is not None and self._queue[0][0] > until:
                break
            t, _, event = heapq.heappop(self._queue)
            if event[0] == "inject":
                self._inject(t, *event[1:])
            else:
                _, node_id, fl, prev = event
                self._visit(node_id, fl, t, prev)
        return self.trace

    def _inject(self, t: int, fi: int, seq: int):
        flow = self.scenario.flows[fi]
        src = self.topology.nodes[flow.src]
        payload = f"{flow.flow_id}/{seq}".encode()
        pkt = Packet(Ipv6BaseHeader(src.address, flow.dst, UDP, flow.hop_limit), None, payload)
        if flow.mode == "dlsr":
            pkt = forwarding.encapsulate_dlsr(pkt, self.resolve_path(flow), self._options(flow))
        elif flow.mode == "dbd":
            pkt = forwarding.encapsulate_dbd(pkt, self._options(flow))
        out = PacketOutcome(flow.flow_id, seq, t)
        self.trace.outcomes[(flow.flow_id, seq)] = out
        fl = _InFlight(out, pkt.encode(), payload, UDP, domain_entry=t)
        self._visit(src.node_id, fl, t, None)

    def _visit(self, node_id: str, fl: _InFlight, t: int, prev: str | None):
        topo = self.topology
        node = topo.nodes[node_id]
        state = self.converged.nodes[node_id]
        out = fl.outcome
        events: list[str] = []
        rec = {"v": TRACE_SCHEMA, "t": t, "flow": out.flow, "seq": out.seq, "node": node_id,
               "domain": node.domain, "kind": node.kind.value}
        if prev is None:
            events.append("inject")
        elif topo.nodes[prev].domain != node.domain:
            fl.domain_entry = t
            if node.domain in out.domains:
                events.append("revisit")
        out.nodes.append(node_id)
        out.domains.append(node.domain)

        try:
            packet = Packet.decode(fl.data)
        except WireError as exc:
            self._finish_drop(rec, events, out, t, node_id, DropReason.MALFORMED, detail=str(exc))
            return
        rh = packet.routing_header
        rec["rh"] = _rh_kind(rh)
        rec["dst_before"] = str(packet.destination)
        rec["dl_before"] = rh.domains_left if isinstance(rh, DlsrHeader) else None

        action = None
        dlr = isinstance(rh, (DlsrHeader, DbdHeader))
        if node.kind is NodeKind.BORDER and dlr and fl.ingress_domain != node.domain:
            fl.ingress_domain = node.domain
            events.append("ingress")
            packet, action = self._ingress_duties(node, packet, t, events, rec)
        if action is None:
            before = encode_routing_header(rh) if (rh is not None and node.kind is not NodeKind.BORDER) else None
            packet, action = forwarding.process(node, state.det, state.fib, packet)
            if before is not None and encode_routing_header(packet.routing_header) != before:
                events.append("rh-touched")

        rh = packet.routing_header
        rec["dst_after"] = str(packet.destination)
        rec["dl_after"] = rh.domains_left if isinstance(rh, DlsrHeader) else None

        if isinstance(action, Drop):
            self._finish_drop(rec, events, out, t, node_id, action.reason)
            return
        if isinstance(action, Deliver):
            packet = self._delivery_duties(node, packet, t, fl, events, rec)
            rec["action"] = "deliver"
            rec["injected"] = out.injected_at
            rec["e2e_ns"] = t - out.injected_at
            if packet.routing_header is not None:
                rec["rh_hex"] = to_hex(encode_routing_header(packet.routing_header))
            out.status, out.time, out.node, out.final_packet = "delivered", t, node_id, packet
            out.payload_intact = packet.payload == fl.payload and packet.upper_protocol == fl.upper
            self._emit(rec, events)
            return

        nh = topo.node_at(action.next_hop)
        link = None if nh is None else self._links.get((node_id, nh.node_id))
        if link is None:
            self._finish_drop(rec, events, out, t, node_id, DropReason.NO_ROUTE,
                              detail=f"next hop {action.next_hop} is not adjacent")
            return
        t_dep = t + self.scenario.processing_delay_us.get(node.kind, 0) * US
        if nh.domain != node.domain and dlr:
            events.append("egress")
            packet = self._egress_duties(node, packet, t_dep, fl, events, rec)
        rec["action"] = "forward"
        rec["next_hop"] = nh.node_id
        try:
            fl.data = packet.encode()
        except WireError as exc:
            self._finish_drop(rec, events, out, t, node_id, DropReason.MALFORMED, detail=str(exc))
            return
        delay = link.latency_us * US
        if link.jitter_us:
            delay += self._rngs[link.link_id].randint(0, link.jitter_us * US)
        self._emit(rec, events)
        self._push(t_dep + delay, ("arrive", nh.node_id, fl, node_id))

    def _emit(self, rec, events):
        rec["events"] = events
        self.trace.records.append(rec)

    def _finish_drop(self, rec, events, out, t, node_id, reason: DropReason, detail: str | None = None):
        rec["action"] = "drop"
        rec["reason"] = reason.value
        if detail:
            rec["detail"] = detail
        out.status, out.time, out.node, out.reason = "dropped", t, node_id, reason.value
        self._emit(rec, events)

    # -- option duties ------------------------------------------------------

    def _ingress_duties(self, node, packet, t, events, rec):
        rh = packet.routing_header
        opts = rh.options
        try:
            tel = find_option(opts, TelemetryOption)
            if tel is not None:
                new = telemetry_stamp(tel, node.domain, self._clock(node.node_id, t), Boundary.INGRESS)
                if not tel.overflow:
                    events.append("telemetry-overflow" if new.overflow else "telemetry-in")
                opts = put_option(opts, new)
            sfc = find_option(opts, ServiceChainOption)
            if sfc is not None:
                hosts = sfc.chain_id in self.scenario.services.get(node.domain, ())
                new = service_chain_step(sfc, hosts)
                if hosts:
                    events.append("sfc-complete" if new.complete else "sfc-step")
                opts = put_option(opts, new)
            dl = find_option(opts, DeadlineOption)
        except WireError:
            return packet, Drop(DropReason.MALFORMED)
        packet = packet.with_routing_header(replace(rh, options=opts))
        if dl is not None:
            bound = self._residual_bound_us(node.node_id, rh.original_destination)
            ok = deadline_check(dl, bound)
            rec["deadline_check"] = {"budget_us": dl.budget_remaining, "bound_us": bound, "pass": ok}
            if not ok:
                return packet, Drop(DropReason.DEADLINE_INFEASIBLE)
        return packet, None

    def _close_domain(self, node, packet, t_ts, residence_ns, fl, events, rec):
        rh = packet.routing_header
        opts = rh.options
        try:
            tel = find_option(opts, TelemetryOption)
            if tel is not None and tel.records:
                try:
                    opts = put_option(opts, telemetry_stamp(tel, node.domain, t_ts, Boundary.EGRESS))
                    if not tel.overflow:
                        events.append("telemetry-out")
                except MismatchedEgress:
                    events.append("telemetry-mismatch")
            dl = find_option(opts, DeadlineOption)
            if dl is not None:
                debit = -(-residence_ns // US)
                new = deadline_debit(dl, debit)
                rec["debit_us"] = debit
                fl.outcome.debits_us.append(debit)
                if new.overrun > dl.overrun:
                    events.append("deadline-overrun")
                opts = put_option(opts, new)
        except WireError:
            events.append("option-malformed")
            return packet
        return packet.with_routing_header(replace(rh, options=opts))

    def _egress_duties(self, node, packet, t_dep, fl, events, rec):
        ts = self._clock(node.node_id, t_dep, egress=True)
        return self._close_domain(node, packet, ts, t_dep - fl.domain_entry, fl, events, rec)

    def _delivery_duties(self, node, packet, t, fl, events, rec):
        if not isinstance(packet.routing_header, (DlsrHeader, DbdHeader)):
            return packet
        return self._close_domain(node, packet, self._clock(node.node_id, t), t - fl.domain_entry, fl, events, rec)

    # -- reporting ----------------------------------------------------------

    def expectations(self) -> list[tuple[str, int, bool, str]]:
        return check_expectations(self.scenario, self.trace)


def _rh_kind(rh) -> str | None:
    if rh is None:
        return None
    if isinstance(rh, DlsrHeader):
        return "dlsr"
    if isinstance(rh, DbdHeader):
        return "dbd"
    return "opaque"


def build(scenario: Scenario) -> Simulation:
    """Validate, converge routing, load path records and queue injections."""
    return Simulation(scenario)


def run(state: Simulation, until: int | None = None) -> TraceLog:
    return state.run(until)


def final_deadline(out: PacketOutcome) -> DeadlineOption | None:
    if out.final_packet is None or out.final_packet.routing_header is None:
        return None
    return find_option(out.final_packet.routing_header.options, DeadlineOption)


def final_telemetry(out: PacketOutcome) -> TelemetryOption | None:
    if out.final_packet is None or out.final_packet.routing_header is None:
        return None
    return find_option(out.final_packet.routing_header.options, TelemetryOption)


def check_expectations(scenario: Scenario, trace: TraceLog) -> list[tuple[str, int, bool, str]]:
    results = []
    for flow in scenario.flows:
        exp = flow.expect
        if not exp:
            continue
        for seq in range(flow.count):
            out = trace.outcomes.get((flow.flow_id, seq))
            problems = []
            if out is None:
                problems.append("never injected")
            else:
                if "outcome" in exp and out.status != exp["outcome"]:
                    problems.append(f"outcome {out.status} != {exp['outcome']}")
                if "reason" in exp and out.reason != exp["reason"]:
                    problems.append(f"reason {out.reason} != {exp['reason']}")
                if "at" in exp and out.node != str(exp["at"]):
                    problems.append(f"ended at {out.node} not {exp['at']}")
                if "domains" in exp:
                    want = list(_domain_list(exp["domains"], "expect.domains"))
                    if out.domain_sequence != want:
                        problems.append(f"domains {out.domain_sequence} != {want}")
                if "final_budget_us" in exp:
                    dl = final_deadline(out)
                    got = None if dl is None else dl.budget_remaining
                    if got != exp["final_budget_us"]:
                        problems.append(f"final budget {got} != {exp['final_budget_us']}")
            results.append((flow.flow_id, seq, not problems, "; ".join(problems) or "ok"))
    return results
