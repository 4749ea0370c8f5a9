"""Domains, nodes and links: each domain behaves as one virtual router whose
interfaces are its border routers and whose fabric is its interior network."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv6Address, IPv6Network

import networkx as nx


class NodeKind(str, Enum):
    HOST = "host"
    INTERIOR = "interior"
    BORDER = "border"


@dataclass(frozen=True)
class NodeIdentity:
    node_id: str
    kind: NodeKind
    domain: int
    addresses: tuple[IPv6Address, ...]

    @property
    def address(self) -> IPv6Address:
        return self.addresses[0]

    def owns(self, addr: IPv6Address) -> bool:
        return addr in self.addresses


@dataclass(frozen=True)
class Domain:
    asn: int
    prefixes: tuple[IPv6Network, ...]
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or f"AS{self.asn}"


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    latency_us: int
    jitter_us: int = 0

    @property
    def link_id(self) -> str:
        return f"{self.a}--{self.b}"

    def other(self, node_id: str) -> str:
        return self.b if node_id == self.a else self.a


class TopologyError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Topology:
    domains: dict[int, Domain] = field(default_factory=dict)
    nodes: dict[str, NodeIdentity] = field(default_factory=dict)
    links: list[Link] = field(default_factory=list)

    def __post_init__(self):
        self._adj: dict[str, list[tuple[str, Link]]] = {}
        self._by_addr: dict[IPv6Address, str] = {}
        self._reindex()

    def _reindex(self):
        self._adj = {nid: [] for nid in self.nodes}
        for link in self.links:
            if link.a in self._adj:
                self._adj[link.a].append((link.b, link))
            if link.b in self._adj:
                self._adj[link.b].append((link.a, link))
        self._by_addr = {addr: n.node_id for n in self.nodes.values() for addr in n.addresses}

    def add_domain(self, domain: Domain):
        self.domains[domain.asn] = domain

    def add_node(self, node: NodeIdentity):
        self.nodes[node.node_id] = node
        self._adj.setdefault(node.node_id, [])
        for addr in node.addresses:
            self._by_addr[addr] = node.node_id

    def add_link(self, link: Link):
        self.links.append(link)
        self._adj.setdefault(link.a, []).append((link.b, link))
        self._adj.setdefault(link.b, []).append((link.a, link))

    def neighbors(self, node_id: str) -> list[tuple[str, Link]]:
        return self._adj[node_id]

    def node_at(self, addr: IPv6Address) -> NodeIdentity | None:
        nid = self._by_addr.get(addr)
        return None if nid is None else self.nodes[nid]

    def domain_of_address(self, addr: IPv6Address) -> int | None:
        """Domain whose prefixes cover ``addr`` (longest match)."""
        best = None
        for dom in self.domains.values():
            for pfx in dom.prefixes:
                if addr in pfx and (best is None or pfx.prefixlen > best[0]):
                    best = (pfx.prefixlen, dom.asn)
        return None if best is None else best[1]

    def nodes_in(self, domain: int) -> list[NodeIdentity]:
        return sorted((n for n in self.nodes.values() if n.domain == domain), key=lambda n: n.node_id)

    def inter_domain_links(self) -> list[Link]:
        return [l for l in self.links if self.nodes[l.a].domain != self.nodes[l.b].domain]

    def domain_graph(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {d: set() for d in self.domains}
        for link in self.inter_domain_links():
            da, db = self.nodes[link.a].domain, self.nodes[link.b].domain
            adj[da].add(db)
            adj[db].add(da)
        return adj

    def intra_graph(self, domain: int) -> nx.Graph:
        g = nx.Graph()
        for n in self.nodes_in(domain):
            g.add_node(n.node_id)
        for link in sorted(self.links, key=lambda l: (l.a, l.b)):
            na, nb = self.nodes[link.a], self.nodes[link.b]
            if na.domain == nb.domain == domain:
                g.add_edge(link.a, link.b, weight=link.latency_us)
        return g

    def validate(self):
        """Raise TopologyError on the first structural problem found."""
        prefixes = []
        for asn, dom in self.domains.items():
            if not 0 <= asn <= 0xFFFFFFFF:
                raise TopologyError(f"domains[{asn}]", "AS number does not fit 32 bits")
            for pfx in dom.prefixes:
                for other_asn, other in prefixes:
                    if other_asn != asn and pfx.overlaps(other):
                        raise TopologyError(f"domains[{asn}].prefixes", f"{pfx} overlaps {other} of AS{other_asn}")
                prefixes.append((asn, pfx))
        seen_addr: dict[IPv6Address, str] = {}
        for nid, node in self.nodes.items():
            where = f"nodes[{nid}]"
            if node.domain not in self.domains:
                raise TopologyError(f"{where}.domain", f"unknown domain {node.domain}")
            if not node.addresses:
                raise TopologyError(f"{where}.addresses", "node has no address")
            for addr in node.addresses:
                if addr in seen_addr:
                    raise TopologyError(f"{where}.addresses", f"{addr} already used by {seen_addr[addr]}")
                seen_addr[addr] = nid
                if self.domain_of_address(addr) != node.domain:
                    raise TopologyError(f"{where}.addresses", f"{addr} is outside the prefixes of AS{node.domain}")
        pairs = set()
        for i, link in enumerate(self.links):
            where = f"links[{i}]"
            for end in (link.a, link.b):
                if end not in self.nodes:
                    raise TopologyError(where, f"unknown node {end!r}")
            if link.a == link.b:
                raise TopologyError(where, "self loop")
            key = frozenset((link.a, link.b))
            if key in pairs:
                raise TopologyError(where, f"duplicate link {link.a}--{link.b}")
            pairs.add(key)
            if link.latency_us <= 0:
                raise TopologyError(f"{where}.latency_us", "latency must be positive")
            if link.jitter_us < 0:
                raise TopologyError(f"{where}.jitter_us", "jitter bound must be >= 0")
            na, nb = self.nodes[link.a], self.nodes[link.b]
            if na.domain != nb.domain and not (na.kind is NodeKind.BORDER and nb.kind is NodeKind.BORDER):
                raise TopologyError(where, "inter-domain links must join two border routers")
        for asn in self.domains:
            g = self.intra_graph(asn)
            if g.number_of_nodes() > 1 and not nx.is_connected(g):
                raise TopologyError(f"domains[{asn}]", "intra-domain network is disconnected")
