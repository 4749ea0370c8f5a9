"""Path-vector route dissemination between domains.

The border routers of one domain share a single control-plane state (full
iBGP mesh), so the domain acts as one virtual router.  Convergence runs in
synchronous rounds in a fixed order, which makes the result a pure function
of the topology.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from ipaddress import IPv6Address, IPv6Network

import networkx as nx

from .tables import DomainEntryTable, Fib, RouteEntry
from .topology import NodeIdentity, NodeKind, Topology

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class RouteUpdate:
    prefix: IPv6Network
    as_path: tuple[int, ...]
    advertiser_address: IPv6Address


@dataclass(frozen=True)
class PeeringSession:
    """One direction of an eBGP session, seen from ``local_dbr``."""

    local_dbr: str
    local_domain: int
    local_address: IPv6Address
    remote_dbr: str
    remote_domain: int
    remote_ingress_address: IPv6Address


@dataclass
class RoutingState:
    domain: int
    sessions: list[PeeringSession] = field(default_factory=list)
    det: DomainEntryTable = field(default_factory=DomainEntryTable)
    loc_rib: dict[IPv6Network, tuple[int, ...]] = field(default_factory=dict)

    def best_path(self, prefix: IPv6Network) -> tuple[int, ...] | None:
        return self.loc_rib.get(prefix)


def _rank(as_path):
    return len(as_path), tuple(as_path)


def originate(dbr: NodeIdentity, prefix: IPv6Network, owned_prefixes=None) -> RouteUpdate:
    if owned_prefixes is not None and not any(prefix.subnet_of(p) for p in owned_prefixes):
        raise ValueError(f"{prefix} does not belong to AS{dbr.domain}")
    return RouteUpdate(prefix, (dbr.domain,), dbr.address)


def process_update(state: RoutingState, session: PeeringSession, update: RouteUpdate):
    """Apply one received update; return the state and the updates to send on."""
    path = update.as_path
    if not path or len(set(path)) != len(path):
        log.warning("ignoring malformed update for %s with AS path %s", update.prefix, path)
        return state, []
    if state.domain in path:
        return state, []
    current = state.loc_rib.get(update.prefix)
    if current is not None and _rank(current) <= _rank(path):
        return state, []
    state.loc_rib[update.prefix] = path
    state.det.add(path[0], update.advertiser_address)
    new_path = (state.domain,) + path
    out = [
        (s, RouteUpdate(update.prefix, new_path, s.local_address))
        for s in state.sessions
        if s.remote_domain not in new_path
    ]
    return state, out


@dataclass
class NodeState:
    identity: NodeIdentity
    fib: Fib
    det: DomainEntryTable | None


@dataclass
class Converged:
    domains: dict[int, RoutingState]
    nodes: dict[str, NodeState]
    det_sessions: dict[int, dict[int, PeeringSession]]
    rounds: int

    def as_path(self, domain: int, prefix: IPv6Network) -> tuple[int, ...] | None:
        return self.domains[domain].best_path(prefix)


def build_sessions(topology: Topology) -> dict[int, list[PeeringSession]]:
    out: dict[int, list[PeeringSession]] = {asn: [] for asn in topology.domains}
    for link in topology.inter_domain_links():
        a, b = topology.nodes[link.a], topology.nodes[link.b]
        out[a.domain].append(PeeringSession(a.node_id, a.domain, a.address, b.node_id, b.domain, b.address))
        out[b.domain].append(PeeringSession(b.node_id, b.domain, b.address, a.node_id, a.domain, a.address))
    return out


def converge(topology: Topology, originations: dict[int, list[IPv6Network]] | None = None,
             max_rounds: int | None = None) -> Converged:
    if originations is None:
        originations = {asn: list(d.prefixes) for asn, d in topology.domains.items()}
    if max_rounds is None:
        max_rounds = 4 * len(topology.domains) + 8

    sessions = build_sessions(topology)
    reverse = {(s.local_dbr, s.remote_dbr): s for ss in sessions.values() for s in ss}
    states: dict[int, RoutingState] = {}
    det_sessions: dict[int, dict[int, PeeringSession]] = {}
    for asn in sorted(topology.domains):
        own = {a for n in topology.nodes_in(asn) for a in n.addresses}
        st = RoutingState(asn, sessions[asn], DomainEntryTable(own))
        chosen: dict[int, PeeringSession] = {}
        for s in sessions[asn]:
            # static peering config; the first session towards a domain wins
            if st.det.add(s.remote_domain, s.remote_ingress_address):
                chosen[s.remote_domain] = s
        states[asn] = st
        det_sessions[asn] = chosen

    pending = []
    for asn in sorted(originations):
        st = states[asn]
        for prefix in originations[asn]:
            owned = topology.domains[asn].prefixes
            if not any(prefix.subnet_of(p) for p in owned):
                raise ValueError(f"AS{asn} cannot originate foreign prefix {prefix}")
            st.loc_rib[prefix] = ()
            for s in st.sessions:
                upd = originate(topology.nodes[s.local_dbr], prefix)
                pending.append((reverse[(s.remote_dbr, s.local_dbr)], upd))

    rounds = 0
    while pending:
        rounds += 1
        if rounds > max_rounds:
            raise NonConvergence(f"still {len(pending)} updates in flight after {max_rounds} rounds")
        pending.sort(key=lambda item: (
            item[0].local_domain, item[0].local_dbr, item[0].remote_dbr,
            int(item[1].prefix.network_address), item[1].prefix.prefixlen, item[1].as_path,
        ))
        nxt = []
        for sess, upd in pending:
            _, out = process_update(states[sess.local_domain], sess, upd)
            nxt.extend((reverse[(s.remote_dbr, s.local_dbr)], u) for s, u in out)
        pending = nxt

    nodes = _install(topology, states, det_sessions)
    return Converged(states, nodes, det_sessions, rounds)


def _install(topology, states, det_sessions) -> dict[str, NodeState]:
    out: dict[str, NodeState] = {}
    for asn in sorted(topology.domains):
        members = topology.nodes_in(asn)
        g = topology.intra_graph(asn)
        st = states[asn]
        for u in members:
            paths = nx.single_source_dijkstra_path(g, u.node_id, weight="weight")

            def hop_toward(target: str) -> IPv6Address | None:
                p = paths.get(target)
                return None if p is None or len(p) < 2 else topology.nodes[p[1]].address

            fib = Fib()
            for v in members:
                if v.node_id == u.node_id:
                    continue
                nh = hop_toward(v.node_id)
                if nh is None:
                    continue
                for addr in v.addresses:
                    fib.install(RouteEntry(IPv6Network(f"{addr}/128"), nh))
            for prefix, path in sorted(st.loc_rib.items(), key=lambda kv: (int(kv[0].network_address), kv[0].prefixlen)):
                if not path:
                    continue
                sess = det_sessions[asn][path[0]]
                if sess.local_dbr == u.node_id:
                    nh = sess.remote_ingress_address
                else:
                    nh = hop_toward(sess.local_dbr)
                    if nh is None:
                        continue
                fib.install(RouteEntry(prefix, nh, path[0], path))
            det = st.det if u.kind is NodeKind.BORDER else None
            out[u.node_id] = NodeState(u, fib, det)
    return out
