"""Delay accounting and Monte Carlo aggregation of the headline metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig

CI_Z = 1.959963984540054  # two-sided 95% normal quantile

CACHE_SOURCES = frozenset({"SH-cache", "eRRH-cache", "relay-cache"})
# a two-hop delivery sourced from an eRRH cache still avoids the core fetch
HIT_SOURCES = CACHE_SOURCES | {"relay-2hop-eRRH"}


def user_delay(served_from: str, rate: float, cfg: SimConfig) -> float:
    """Delivery delay of one served user: transmission time, plus the
    fronthaul fetch time when the content came from the core network."""
    if rate <= 0:
        raise ValueError("rate must be positive for a served user")
    delay = cfg.segment_bits / rate
    if served_from not in CACHE_SOURCES:
        delay += cfg.segment_bits / cfg.fronthaul_rate
    return delay


@dataclass
class SlotMetrics:
    """Everything recorded about one transmission slot."""

    delays: list[float] = field(default_factory=list)
    served_from: list[str] = field(default_factory=list)
    fronthaul_bits: float = 0.0
    hits: int = 0
    popular_served: int = 0
    served: int = 0
    unserved: int = 0


def slot_metrics_from_deliveries(deliveries, cfg: SimConfig) -> SlotMetrics:
    m = SlotMetrics()
    for d in deliveries:
        if not d.served:
            m.unserved += 1
            continue
        m.served += 1
        m.delays.append(d.delay)
        m.served_from.append(d.served_from)
        m.fronthaul_bits += d.fronthaul_bits
        if d.popular:
            m.popular_served += 1
            if d.served_from in HIT_SOURCES:
                m.hits += 1
    return m


def average_delay(slots: list[SlotMetrics], num_rrb: int) -> float:
    """Frame delay: per-slot served-delay sum over the RRB count (idle RRBs
    contribute zero), averaged across slots."""
    if not slots:
        return 0.0
    return float(np.mean([sum(s.delays) / num_rrb for s in slots]))


@dataclass
class RunSummary:
    """Headline metrics of one Monte Carlo run (one frame)."""

    avg_delay_s: float
    fronthaul_bps: float
    hit_rate: float
    service_rate: float
    cache_refresh_bits: float = 0.0


def summarize_frame(slots: list[SlotMetrics], cfg: SimConfig,
                    cache_refresh_bits: float = 0.0) -> RunSummary:
    popular = sum(s.popular_served for s in slots)
    hits = sum(s.hits for s in slots)
    served = sum(s.served for s in slots)
    requests = cfg.num_users * len(slots)
    return RunSummary(
        avg_delay_s=average_delay(slots, cfg.num_rrb),
        fronthaul_bps=(float(np.mean([s.fronthaul_bits for s in slots])) / cfg.slot_duration
                       if slots else 0.0),
        hit_rate=hits / popular if popular else 0.0,
        service_rate=served / requests if requests else 0.0,
        cache_refresh_bits=cache_refresh_bits,
    )


METRIC_FIELDS = ("avg_delay_s", "fronthaul_bps", "hit_rate", "service_rate")


def aggregate_runs(runs: list[RunSummary]) -> dict[str, tuple[float, float]]:
    """Mean and 95% normal-approximation CI half-width for each metric."""
    out = {}
    n = len(runs)
    for name in METRIC_FIELDS:
        vals = np.array([getattr(r, name) for r in runs], dtype=float)
        mean = float(vals.mean())
        half = float(CI_Z * vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        out[name] = (mean, half)
    return out
