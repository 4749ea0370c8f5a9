"""Per-domain accountability from the telemetry option.

Every domain is treated as one virtual router: its residence time is the gap
between the ingress and egress stamps its border routers wrote.  Adjacent
records check each other, since a domain's egress stamp can never be later
than the next domain's ingress stamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .options import TelemetryOption


class MalformedTrace(ValueError):
    pass


class Verdict(str, Enum):
    COMPLIANT = "compliant"
    VIOLATED = "violated"
    UNVERIFIABLE = "unverifiable"


@dataclass(frozen=True)
class DomainReport:
    domain: int | None
    residence: int | None
    inter_domain_gap: int | None
    sla_limit: int | None
    verdict: Verdict

    @property
    def is_tail_marker(self) -> bool:
        return self.domain is None


@dataclass(frozen=True)
class Anomaly:
    kind: str  # "intra" | "inter"
    domain: int
    index: int
    detail: str


def analyze(option: TelemetryOption, sla: dict[int, int]) -> list[DomainReport]:
    """One report per record, in visit order; SLA limits and times in ns."""
    recs = option.records
    for i, r in enumerate(recs):
        if not r.complete:
            raise MalformedTrace(f"record {i} (AS{r.domain}) has no egress stamp")
    reports = []
    for i, r in enumerate(recs):
        residence = r.egress_ts - r.ingress_ts
        gap = recs[i + 1].ingress_ts - r.egress_ts if i + 1 < len(recs) else None
        limit = sla.get(r.domain)
        if residence < 0 or limit is None:
            verdict = Verdict.UNVERIFIABLE
        elif residence > limit:
            verdict = Verdict.VIOLATED
        else:
            verdict = Verdict.COMPLIANT
        reports.append(DomainReport(r.domain, residence, gap, limit, verdict))
    if option.overflow:
        reports.append(DomainReport(None, None, None, None, Verdict.UNVERIFIABLE))
    return reports


def cross_examine(option: TelemetryOption) -> list[Anomaly]:
    out = []
    recs = option.records
    for i, r in enumerate(recs):
        if r.complete and r.egress_ts < r.ingress_ts:
            out.append(Anomaly("intra", r.domain, i,
                               f"AS{r.domain} egress {r.egress_ts} precedes its ingress {r.ingress_ts}"))
        if i + 1 < len(recs) and r.complete and r.egress_ts > recs[i + 1].ingress_ts:
            nxt = recs[i + 1]
            out.append(Anomaly("inter", r.domain, i,
                               f"AS{r.domain} egress {r.egress_ts} is after AS{nxt.domain} ingress {nxt.ingress_ts}"))
    return out


@dataclass
class Attribution:
    domain_delay: dict[int, int] = field(default_factory=dict)
    link_delay: int = 0
    total: int = 0
    budget: int = 0
    overrun: int = 0
    culprits: list[int] = field(default_factory=list)
    credits: dict[int, int] = field(default_factory=dict)


def attribute(reports: list[DomainReport], total_budget: int) -> Attribution:
    """Split delay between domains and links and name who is to blame.

    Overrun is measured against the domains' combined residence, since that
    is what the budget covers.  Culprits are domains over their SLA;
    compliant domains are credited with their unused SLA slack.
    """
    att = Attribution(budget=total_budget)
    for r in reports:
        if r.domain is None or r.residence is None:
            continue
        att.domain_delay[r.domain] = att.domain_delay.get(r.domain, 0) + r.residence
        att.link_delay += r.inter_domain_gap or 0
        if r.verdict is Verdict.VIOLATED:
            if r.domain not in att.culprits:
                att.culprits.append(r.domain)
        elif r.verdict is Verdict.COMPLIANT and r.residence < r.sla_limit:
            att.credits[r.domain] = att.credits.get(r.domain, 0) + r.sla_limit - r.residence
    spent = sum(att.domain_delay.values())
    att.total = spent + att.link_delay
    att.overrun = max(0, spent - total_budget)
    return att


def decompose(option: TelemetryOption, injected_at: int) -> dict[str, int]:
    """Split an end-to-end delay into pre-stamp, residence and gap segments."""
    recs = option.records
    if not recs:
        return {"pre_stamp": 0, "residence": 0, "gaps": 0}
    reports = analyze(option, {})
    return {
        "pre_stamp": recs[0].ingress_ts - injected_at,
        "residence": sum(r.residence for r in reports if r.residence is not None),
        "gaps": sum(r.inter_domain_gap or 0 for r in reports),
    }


def format_reports(reports: list[DomainReport], prefix: str = "") -> list[str]:
    lines = []
    for r in reports:
        if r.is_tail_marker:
            lines.append(f"{prefix}domain=- residence_ns=- gap_ns=- sla_ns=- verdict={r.verdict.value} note=overflow")
            continue
        gap = "-" if r.inter_domain_gap is None else r.inter_domain_gap
        sla = "-" if r.sla_limit is None else r.sla_limit
        lines.append(f"{prefix}domain={r.domain} residence_ns={r.residence} gap_ns={gap} sla_ns={sla} verdict={r.verdict.value}")
    return lines
