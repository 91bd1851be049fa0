"""Run statistics: per-transmission outcome shares, cooperative round
accounting, relay candidate geometry, and delivery/throughput figures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MetricsReport", "mean_report", "relay_distance_cdf"]

OUTCOMES = ("success_direct", "lost_header", "coop_requested")
COOP_FAILURES = ("empty_contention", "failure_wo_tx", "failure_with_tx")
GIVEUPS = ("cs_busy", "rate_too_low", "nav")


@dataclass
class MetricsReport:
    seed: int = 0
    duration: float = 0.0             # measured window, seconds
    aggregate_throughput: float = 0.0  # delivered payload bits per second
    pdr: float = 0.0                  # delivered / terminated payloads
    outcome_shares: dict = field(default_factory=lambda: {k: 0.0 for k in OUTCOMES})
    coop_success_share: float = 0.0   # successful relay rounds / transmissions
    coop_failure_breakdown: dict = field(
        default_factory=lambda: {k: 0.0 for k in COOP_FAILURES})
    giveup_breakdown: dict = field(default_factory=lambda: {k: 0.0 for k in GIVEUPS})
    relay_distance_samples: list = field(default_factory=list)  # (dist_to_d, delta_sd)
    # raw counters behind the fractions
    payloads_enqueued: int = 0
    payloads_delivered: int = 0
    payloads_dropped: int = 0
    payloads_in_flight: int = 0
    data_tx_count: int = 0
    nack_rounds: int = 0
    relay_tx_count: int = 0

    def validate(self):
        total = sum(self.outcome_shares.values())
        if self.data_tx_count and abs(total - 1.0) > 1e-9:
            raise AssertionError(f"outcome shares sum to {total}")
        for name, d in (("coop failure", self.coop_failure_breakdown),
                        ("give-up", self.giveup_breakdown)):
            s = sum(d.values())
            if s and abs(s - 1.0) > 1e-9:
                raise AssertionError(f"{name} breakdown sums to {s}")

    def csv_fields(self) -> dict:
        out = {
            "seed": self.seed,
            "duration_s": self.duration,
            "throughput_bps": self.aggregate_throughput,
            "pdr": self.pdr,
        }
        for k in OUTCOMES:
            out[f"share_{k}"] = self.outcome_shares[k]
        out["coop_success_share"] = self.coop_success_share
        for k in COOP_FAILURES:
            out[f"coopfail_{k}"] = self.coop_failure_breakdown[k]
        for k in GIVEUPS:
            out[f"giveup_{k}"] = self.giveup_breakdown[k]
        if self.relay_distance_samples:
            d = np.array([s[0] for s in self.relay_distance_samples])
            dsd = np.array([s[1] for s in self.relay_distance_samples])
            out["relay_candidates"] = len(d)
            out["relay_adv_frac"] = float(np.mean(d < dsd))
            out["relay_dist_mean_m"] = float(d.mean())
        else:
            out["relay_candidates"] = 0
            out["relay_adv_frac"] = float("nan")
            out["relay_dist_mean_m"] = float("nan")
        out.update({
            "payloads_enqueued": self.payloads_enqueued,
            "payloads_delivered": self.payloads_delivered,
            "payloads_dropped": self.payloads_dropped,
            "payloads_in_flight": self.payloads_in_flight,
            "data_tx_count": self.data_tx_count,
            "nack_rounds": self.nack_rounds,
            "relay_tx_count": self.relay_tx_count,
        })
        return out


def mean_report(reports) -> MetricsReport:
    """Replication average: scalar fields averaged, samples concatenated."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    out = MetricsReport(seed=-1)
    n = len(reports)
    out.duration = sum(r.duration for r in reports) / n
    out.aggregate_throughput = sum(r.aggregate_throughput for r in reports) / n
    out.pdr = sum(r.pdr for r in reports) / n
    for k in OUTCOMES:
        out.outcome_shares[k] = sum(r.outcome_shares[k] for r in reports) / n
    out.coop_success_share = sum(r.coop_success_share for r in reports) / n
    for k in COOP_FAILURES:
        out.coop_failure_breakdown[k] = sum(
            r.coop_failure_breakdown[k] for r in reports) / n
    for k in GIVEUPS:
        out.giveup_breakdown[k] = sum(r.giveup_breakdown[k] for r in reports) / n
    for r in reports:
        out.relay_distance_samples.extend(r.relay_distance_samples)
    for attr in ("payloads_enqueued", "payloads_delivered", "payloads_dropped",
                 "payloads_in_flight", "data_tx_count", "nack_rounds",
                 "relay_tx_count"):
        setattr(out, attr, sum(getattr(r, attr) for r in reports))
    return out


def relay_distance_cdf(report: MetricsReport):
    """(distances, cumulative fraction) over relay-candidate distances to the
    destination, collected at cooperation requests."""
    if not report.relay_distance_samples:
        raise ValueError("no relay candidate samples in this report")
    d = np.sort(np.array([s[0] for s in report.relay_distance_samples]))
    frac = np.arange(1, len(d) + 1) / len(d)
    return d, frac
