"""Command-line front end.

Exit codes: 0 expectations met / clean, 1 expectations failed / problems
found, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from ipaddress import IPv6Address, IPv6Network
from pathlib import Path

import networkx as nx

from . import oam
from .options import (
    DeadlineOption,
    ServiceChainOption,
    TelemetryOption,
    decode_typed,
    find_option,
)
from .sim import (
    Simulation,
    ValidationError,
    build,
    check_expectations,
    final_deadline,
    final_telemetry,
    load_scenario,
)
from .control import NonConvergence
from .wire import (
    NH_NONE,
    DbdHeader,
    DlsrHeader,
    OpaqueRoutingHeader,
    TlvOption,
    WireError,
    decode_routing_header,
    encode_dbd,
    encode_dlsr,
    from_hex,
    to_hex,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parse_domain(text: str) -> int:
    try:
        return int(str(text).upper().removeprefix("AS"))
    except ValueError:
        raise UsageError(f"not an AS number: {text!r}") from None


def _options_from_args(args) -> tuple[TlvOption, ...]:
    opts = []
    if args.deadline is not None:
        opts.append(DeadlineOption(args.deadline).to_tlv())
    if args.telemetry is not None:
        try:
            opts.append(TelemetryOption(args.telemetry).to_tlv())
        except WireError as exc:
            raise UsageError(str(exc)) from None
    if args.sfc is not None:
        try:
            cid, idx = (int(x) for x in args.sfc.split(":"))
        except ValueError:
            raise UsageError("--sfc expects CHAIN_ID:INDEX") from None
        opts.append(ServiceChainOption(cid, idx).to_tlv())
    for raw in args.option or ():
        try:
            otype, hexval = raw.split(":", 1)
            opts.append(TlvOption(int(otype), from_hex(hexval)))
        except ValueError:
            raise UsageError(f"--option expects TYPE:HEX, got {raw!r}") from None
    return tuple(opts)


def cmd_encode(args, out) -> int:
    try:
        dest = IPv6Address(args.dest)
    except ValueError:
        raise UsageError(f"--dest is not an IPv6 address: {args.dest!r}") from None
    opts = _options_from_args(args)
    try:
        if args.type == "dlsr":
            if not args.path or not args.path.strip():
                raise UsageError("--path is required for dlsr and must name at least one domain")
            path = tuple(_parse_domain(x) for x in args.path.split(",") if x.strip())
            left = len(path) - 1 if args.domains_left is None else args.domains_left
            data = encode_dlsr(DlsrHeader(args.next_header, left, path[::-1], dest, opts))
        else:
            data = encode_dbd(DbdHeader(args.next_header, dest, opts))
    except WireError as exc:
        raise UsageError(str(exc)) from None
    print(to_hex(data), file=out)
    return EXIT_OK


def describe_option(opt: TlvOption) -> str:
    typed = decode_typed(opt)
    if isinstance(typed, DeadlineOption):
        return (f"option type={opt.option_type} deadline budget_us={typed.budget_remaining} "
                f"accumulated_us={typed.accumulated} overrun_us={typed.overrun}")
    if isinstance(typed, TelemetryOption):
        recs = ";".join(f"{r.domain}:{r.ingress_ts}:{r.egress_ts}" for r in typed.records) or "-"
        return (f"option type={opt.option_type} telemetry capacity={typed.capacity} next_free={typed.next_free} "
                f"overflow={int(typed.overflow)} records={recs}")
    if isinstance(typed, ServiceChainOption):
        return (f"option type={opt.option_type} service_chain chain_id={typed.chain_id} "
                f"index={typed.service_index} complete={int(typed.complete)}")
    return f"option type={opt.option_type} raw={opt.value.hex() or '-'}"


def cmd_decode(args, out) -> int:
    text = args.hex if args.hex is not None else sys.stdin.read()
    try:
        data = from_hex(text)
        rh = decode_routing_header(data)
        lines = [f"next_header={rh.next_header}", f"len={data[1]}", f"routing_type={rh.routing_type}"]
        if isinstance(rh, DlsrHeader):
            lines.insert(0, "type=dlsr")
            lines += [f"domains_left={rh.domains_left}", f"first_domain={rh.first_domain}",
                      f"dest={rh.original_destination}",
                      f"path={','.join(map(str, rh.path))}",
                      f"domain_list={','.join(map(str, rh.domain_list))}"]
        elif isinstance(rh, DbdHeader):
            lines.insert(0, "type=dbd")
            lines.append(f"dest={rh.original_destination}")
        else:
            lines.insert(0, "type=opaque")
        for opt in rh.options:
            lines.append(describe_option(opt))
    except (ValueError, WireError) as exc:
        raise UsageError(f"cannot decode: {exc}") from None
    print("\n".join(lines), file=out)
    return EXIT_OK


def render_report(sim: Simulation) -> tuple[str, bool]:
    """The run report and whether every declared expectation held."""
    sc, trace = sim.scenario, sim.trace
    lines = [f"# dlr-report v1 scenario={sc.name or '-'} seed={sc.seed}"]
    sla_ns = {d: us * 1000 for d, us in sc.sla_us.items()}
    delivered = dropped = 0
    for key in sorted(trace.outcomes, key=lambda k: (k[0], k[1])):
        o = trace.outcomes[key]
        tag = f"flow={o.flow} seq={o.seq}"
        e2e = "-" if o.time is None or not o.delivered else o.time - o.injected_at
        delivered += o.delivered
        dropped += o.status == "dropped"
        lines.append(f"packet {tag} status={o.status} at={o.node or '-'} e2e_ns={e2e} "
                     f"domains={','.join(map(str, o.domain_sequence))} reason={o.reason or '-'}")
        dl = final_deadline(o)
        if dl is not None:
            lines.append(f"deadline {tag} budget_us={dl.original_budget} remaining_us={dl.budget_remaining} "
                         f"accumulated_us={dl.accumulated} overrun_us={dl.overrun} "
                         f"debits_us={','.join(map(str, o.debits_us)) or '-'}")
        tel = final_telemetry(o)
        if tel is None:
            continue
        try:
            reports = oam.analyze(tel, sla_ns)
        except oam.MalformedTrace as exc:
            lines.append(f"oam {tag} malformed detail={json.dumps(str(exc))}")
            continue
        lines += oam.format_reports(reports, prefix=f"oam {tag} ")
        for a in oam.cross_examine(tel):
            lines.append(f"anomaly {tag} kind={a.kind} domain={a.domain} detail={json.dumps(a.detail)}")
        budget = dl.original_budget * 1000 if dl is not None else sum(
            r.sla_limit for r in reports if r.sla_limit is not None)
        att = oam.attribute(reports, budget)
        credits = ",".join(f"{d}:{v}" for d, v in att.credits.items()) or "-"
        lines.append(f"attribution {tag} total_ns={att.total} link_ns={att.link_delay} budget_ns={att.budget} "
                     f"overrun_ns={att.overrun} culprits={','.join(map(str, att.culprits)) or '-'} credits={credits}")
    results = check_expectations(sc, trace)
    for flow, seq, ok, detail in results:
        lines.append(f"expect flow={flow} seq={seq} {'ok' if ok else 'FAIL'} detail={json.dumps(detail)}")
    all_ok = all(ok for *_, ok, _ in results)
    lines.append(f"summary injected={len(trace.outcomes)} delivered={delivered} dropped={dropped} "
                 f"expectations={'ok' if all_ok else 'failed'}")
    return "\n".join(lines) + "\n", all_ok


def _load(path, seed=None):
    try:
        sc = load_scenario(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValidationError as exc:
        raise UsageError(f"invalid scenario: {exc}") from None
    if seed is not None:
        sc.seed = seed
    try:
        return build(sc)
    except (ValidationError, NonConvergence) as exc:
        raise UsageError(f"invalid scenario: {exc}") from None


def cmd_run(args, out) -> int:
    sim = _load(args.scenario, args.seed)
    trace = sim.run()
    report, ok = render_report(sim)
    if args.trace:
        Path(args.trace).write_text(trace.dumps())
    if args.report:
        Path(args.report).write_text(report)
    else:
        out.write(report)
    return EXIT_OK if ok else EXIT_FAILED


def simple_domain_paths(graph: dict[int, set[int]], src: int, dst: int, max_len: int) -> list[tuple[int, ...]]:
    """All loop-free domain paths from src to dst with at most ``max_len`` domains."""
    found = []
    stack = [(src,)]
    while stack:
        path = stack.pop()
        if path[-1] == dst:
            found.append(path)
            continue
        if len(path) >= max_len:
            continue
        for nxt in sorted(graph[path[-1]], reverse=True):
            if nxt not in path:
                stack.append(path + (nxt,))
    return sorted(found, key=lambda p: (len(p), p))


def estimate_latency_us(sim: Simulation, path: tuple[int, ...]) -> int | None:
    """Peering links plus transit-domain crossings along the DET-selected border routers."""
    topo, det = sim.topology, sim.converged.det_sessions
    total = 0
    ingress = None
    for here, nxt in zip(path, path[1:]):
        sess = det[here].get(nxt)
        if sess is None:
            return None
        if ingress is not None and ingress != sess.local_dbr:
            total += nx.dijkstra_path_length(topo.intra_graph(here), ingress, sess.local_dbr)
        total += sim._links[(sess.local_dbr, sess.remote_dbr)].latency_us
        ingress = sess.remote_dbr
    return total


def cmd_paths(args, out) -> int:
    sim = _load(args.topology)
    topo = sim.topology
    src = _parse_domain(args.src)
    if src not in topo.domains:
        raise UsageError(f"unknown source domain {args.src}")
    try:
        dst_net = IPv6Network(args.dst, strict=False)
    except ValueError:
        raise UsageError(f"--dst is not an IPv6 prefix or address: {args.dst!r}") from None
    dst_dom = topo.domain_of_address(dst_net.network_address)
    lines = [f"src={src} dst={args.dst} dst_domain={'-' if dst_dom is None else dst_dom}"]
    if dst_dom is None:
        lines.append("best unreachable")
        print("\n".join(lines), file=out)
        return EXIT_OK
    state = sim.converged.domains[src]
    route = None
    for pfx, p in state.loc_rib.items():
        if dst_net.network_address in pfx and (route is None or pfx.prefixlen > route[0].prefixlen):
            route = (pfx, p)
    for node in topo.nodes_in(src):
        if node.kind.value != "border":
            continue
        entry = None
        try:
            entry = sim.converged.nodes[node.node_id].fib.lookup(dst_net.network_address)
        except LookupError:
            pass
        path = "-" if entry is None or entry.next_domain is None else ",".join(map(str, entry.as_path))
        lines.append(f"dbr {node.node_id} as_path={'-' if dst_dom == src else path}")
    if dst_dom == src:
        lines.append(f"best path={src} inter_domain=-")
    elif route is None:
        lines.append("best unreachable")
    else:
        best = (src,) + route[1]
        lines.append(f"best path={','.join(map(str, best))}")
        for p in simple_domain_paths(topo.domain_graph(), src, dst_dom, args.max_len):
            lat = estimate_latency_us(sim, p)
            mark = " *" if p == best else ""
            lines.append(f"alt path={','.join(map(str, p))} hops={len(p) - 1} "
                         f"est_latency_us={'-' if lat is None else lat}{mark}")
    print("\n".join(lines), file=out)
    return EXIT_OK


def _parse_sla(text: str) -> dict[int, int]:
    out = {}
    for item in filter(None, (x.strip() for x in text.split(","))):
        try:
            dom, us = item.split("=")
            out[_parse_domain(dom)] = int(us) * 1000
        except ValueError:
            raise UsageError(f"--sla expects AS=MICROSECONDS pairs, got {item!r}") from None
    return out


def cmd_verify(args, out) -> int:
    sla: dict[int, int] = {}
    if args.scenario:
        try:
            sla = {d: us * 1000 for d, us in load_scenario(args.scenario).sla_us.items()}
        except (OSError, ValidationError) as exc:
            raise UsageError(f"cannot load scenario: {exc}") from None
    if args.sla:
        sla.update(_parse_sla(args.sla))
    try:
        text = Path(args.trace).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.trace}: {exc.strerror}") from None
    lines = []
    problems = 0
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            raise UsageError(f"{args.trace}:{n}: not a trace record") from None
        if rec.get("action") != "deliver" or "rh_hex" not in rec:
            continue
        tag = f"flow={rec['flow']} seq={rec['seq']}"
        try:
            rh = decode_routing_header(from_hex(rec["rh_hex"]))
            tel = None if isinstance(rh, OpaqueRoutingHeader) else find_option(rh.options, TelemetryOption)
        except WireError as exc:
            lines.append(f"malformed {tag} detail={json.dumps(str(exc))}")
            problems += 1
            continue
        if tel is None:
            continue
        try:
            reports = oam.analyze(tel, sla)
        except oam.MalformedTrace as exc:
            lines.append(f"malformed {tag} detail={json.dumps(str(exc))}")
            problems += 1
            continue
        lines += oam.format_reports(reports, prefix=f"oam {tag} ")
        problems += sum(r.verdict is oam.Verdict.VIOLATED for r in reports)
        dec = oam.decompose(tel, rec["injected"])
        lines.append(f"decomposition {tag} pre_stamp_ns={dec['pre_stamp']} residence_ns={dec['residence']} "
                     f"gaps_ns={dec['gaps']} e2e_ns={rec['e2e_ns']}")
        for a in oam.cross_examine(tel):
            lines.append(f"anomaly {tag} kind={a.kind} domain={a.domain} detail={json.dumps(a.detail)}")
            problems += 1
    lines.append(f"summary problems={problems}")
    print("\n".join(lines), file=out)
    return EXIT_FAILED if problems else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dlr", description="Domain-level routing toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="encode a DLSR or DBD routing header as hex")
    enc.add_argument("--type", choices=("dlsr", "dbd"), required=True)
    enc.add_argument("--path", help="comma-separated AS numbers in travel order (dlsr)")
    enc.add_argument("--dest", required=True, help="original destination address")
    enc.add_argument("--next-header", type=int, default=NH_NONE)
    enc.add_argument("--domains-left", type=int)
    enc.add_argument("--deadline", type=int, metavar="US", help="deadline budget in microseconds")
    enc.add_argument("--telemetry", type=int, metavar="SLOTS", help="pre-allocated telemetry records")
    enc.add_argument("--sfc", metavar="CHAIN:INDEX")
    enc.add_argument("--option", action="append", metavar="TYPE:HEX", help="raw TLV option")

    dec = sub.add_parser("decode", help="decode a hex routing header (argument or stdin)")
    dec.add_argument("hex", nargs="?")

    run = sub.add_parser("run", help="simulate a scenario")
    run.add_argument("scenario")
    run.add_argument("--trace", help="write the line-delimited trace here")
    run.add_argument("--report", help="write the report here instead of stdout")
    run.add_argument("--seed", type=int)

    paths = sub.add_parser("paths", help="show converged and alternative domain paths")
    paths.add_argument("topology", help="scenario file")
    paths.add_argument("--src", required=True, help="source domain")
    paths.add_argument("--dst", required=True, help="destination prefix or address")
    paths.add_argument("--max-len", type=int, default=6, help="longest alternative path, in domains")

    ver = sub.add_parser("verify", help="per-domain OAM verification of a trace")
    ver.add_argument("trace")
    ver.add_argument("--scenario", help="take SLA limits from this scenario")
    ver.add_argument("--sla", help="AS=MICROSECONDS,... (overrides the scenario)")
    return p


COMMANDS = {"encode": cmd_encode, "decode": cmd_decode, "run": cmd_run, "paths": cmd_paths, "verify": cmd_verify}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"dlr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
