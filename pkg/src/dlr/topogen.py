"""Seeded random multi-domain topologies for property checks."""

from __future__ import annotations

import random
from ipaddress import IPv6Address, IPv6Network

from .topology import Domain, Link, NodeIdentity, NodeKind, Topology


def random_topology(seed: int, max_domains: int = 20, max_dbrs: int = 4,
                    peer_probability: float | None = None, parallel_probability: float = 0.2) -> Topology:
    """A random topology with one host per domain.

    Peering is random, so some draws are partitioned; that is intended.
    Some domain pairs get a second peering link to exercise DET selection.
    """
    rng = random.Random(seed)
    n = rng.randint(2, max_domains)
    asns = sorted(rng.sample(range(1, 0xFFFF), n))
    topo = Topology()
    dbrs: dict[int, list[str]] = {}
    for asn in asns:
        net = IPv6Network(f"2001:db8:{asn:x}::/48")
        topo.add_domain(Domain(asn, (net,)))
        base = int(net.network_address)
        routers = []
        borders = []
        for i in range(rng.randint(1, max_dbrs)):
            nid = f"as{asn}-b{i}"
            topo.add_node(NodeIdentity(nid, NodeKind.BORDER, asn, (IPv6Address(base + 0x100 + i),)))
            routers.append(nid)
            borders.append(nid)
        for i in range(rng.randint(0, 2)):
            nid = f"as{asn}-r{i}"
            topo.add_node(NodeIdentity(nid, NodeKind.INTERIOR, asn, (IPv6Address(base + 0x200 + i),)))
            routers.append(nid)
        rng.shuffle(routers)
        for i in range(1, len(routers)):
            topo.add_link(Link(routers[i], routers[rng.randrange(i)], rng.randint(10, 500)))
        existing = {frozenset((l.a, l.b)) for l in topo.links}
        for _ in range(rng.randint(0, 2)):
            if len(routers) < 3:
                break
            u, v = rng.sample(routers, 2)
            if frozenset((u, v)) not in existing:
                existing.add(frozenset((u, v)))
                topo.add_link(Link(u, v, rng.randint(10, 500)))
        host = f"as{asn}-h"
        topo.add_node(NodeIdentity(host, NodeKind.HOST, asn, (IPv6Address(base + 0x10),)))
        topo.add_link(Link(host, rng.choice(routers), rng.randint(10, 200)))
        dbrs[asn] = borders

    if peer_probability is None:
        peer_probability = min(1.0, 2.5 / (n - 1))
    used = set()
    for i, da in enumerate(asns):
        for db in asns[i + 1:]:
            if rng.random() >= peer_probability:
                continue
            copies = 2 if rng.random() < parallel_probability else 1
            for _ in range(copies):
                a, b = rng.choice(dbrs[da]), rng.choice(dbrs[db])
                if (a, b) in used:
                    continue
                used.add((a, b))
                topo.add_link(Link(a, b, rng.randint(500, 5000)))
    topo.validate()
    return topo


def host_of(topo: Topology, asn: int) -> NodeIdentity:
    return next(n for n in topo.nodes_in(asn) if n.kind is NodeKind.HOST)
