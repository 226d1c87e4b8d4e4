"""Comparison caching schemes and the cache-enabled relay network variant.

The relay network swaps the smart helpers for relays that cannot overhear:
a relay serves directly only what it already caches, may carry a two-hop
eRRH-to-relay-to-user delivery when that beats every direct eRRH option,
and only ever caches segments it has itself relayed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cache import CacheState
from .channel import ChannelState, rate_bps, sample_channel
from .config import ConfigError, SimConfig
from .metrics import SlotMetrics, slot_metrics_from_deliveries, summarize_frame
from .scheduler import (Delivery, Schedule, greedy_scan_indices, nominal_sh_power,
                        realize_deliveries, schedule_slot, water_fill,
                        SERVED_ERRH, SERVED_MBS)
from .topology import Topology
from .traffic import Catalog, RequestBatch, draw_requests

SERVED_RELAY = "relay-cache"
SERVED_2HOP_ERRH = "relay-2hop-eRRH"
SERVED_2HOP_MBS = "relay-2hop-MBS"

SCHEMES = ("learned", "random", "mpc", "hybrid20", "hybrid50", "uniform")
HYBRID_FRACTION = {"hybrid20": 0.2, "hybrid50": 0.5}


def fill_cache_baseline(scheme: str, catalog: Catalog, cache: CacheState,
                        kind: str, node: int, cap: int,
                        rng: np.random.Generator) -> None:
    """Fill one node's cache row according to a static scheme.

    random: cap distinct segments uniformly; mpc: the cap most popular;
    hybridXX: the ceil(frac*cap) most popular plus uniform picks from the
    rest; uniform: helper node h takes the popularity block h*cap..(h+1)*cap-1
    (wrapping at F) so helpers do not overlap, while eRRHs fall back to mpc.
    """
    F = catalog.num_segments
    if cap > F:
        raise ConfigError(f"cache capacity {cap} exceeds catalog size {F}")
    row = np.zeros(F, dtype=bool)
    if scheme == "random":
        row[rng.choice(F, size=cap, replace=False)] = True
    elif scheme == "mpc":
        row[:cap] = True
    elif scheme in HYBRID_FRACTION:
        n_top = int(np.ceil(HYBRID_FRACTION[scheme] * cap))
        row[:n_top] = True
        rest = rng.choice(F - n_top, size=cap - n_top, replace=False) + n_top
        row[rest] = True
    elif scheme == "uniform":
        if kind == "sh":
            row[(node * cap + np.arange(cap)) % F] = True
        else:
            row[:cap] = True
    else:
        raise ValueError(f"unknown caching scheme {scheme!r}")
    rows = cache.errh if kind == "errh" else cache.sh
    rows[node] = row


def fill_all_caches(scheme: str, catalog: Catalog, cache: CacheState,
                    cfg: SimConfig, rng: np.random.Generator,
                    include_helpers: bool = True) -> None:
    for s in range(cfg.num_errh):
        fill_cache_baseline(scheme, catalog, cache, "errh", s,
                            cfg.cache_cap_errh, rng)
    if include_helpers:
        for h in range(cfg.num_sh):
            fill_cache_baseline(scheme, catalog, cache, "sh", h,
                                cfg.cache_cap_sh, rng)


# ---------------------------------------------------------------------------
# CE-relay network
# ---------------------------------------------------------------------------

@dataclass
class RelayGraph:
    """Relay-network conflict graph. Direct relay vertices take priority;
    the second class mixes direct eRRH vertices with two-hop options, which
    exist only where they beat the best direct eRRH weight for that
    (user, RRB)."""

    d_user: np.ndarray
    d_rrb: np.ndarray
    d_node: np.ndarray
    d_weight: np.ndarray
    e_user: np.ndarray
    e_rrb: np.ndarray
    e_node: np.ndarray       # serving eRRH, or feeder eRRH for two-hop rows
    e_relay: np.ndarray      # -1 for direct eRRH rows, relay id for two-hop
    e_weight: np.ndarray


def build_relay_graph(topo: Topology, cache: CacheState, channel: ChannelState,
                      requests: RequestBatch, cfg: SimConfig) -> RelayGraph:
    B = cfg.segment_bits
    seg = requests.segment
    popular = requests.is_popular
    noise_rate = lambda g, p: rate_bps(g, p, cfg)

    # direct relay service on cache hits, like helper vertices
    if cfg.num_sh:
        hit = np.zeros((cfg.num_users, cfg.num_sh), dtype=bool)
        hit[popular] = cache.sh[:, seg[popular]].T
        pair_u, pair_k = np.nonzero(topo.member_sh & hit)
    else:
        pair_u = pair_k = np.empty(0, dtype=np.int64)
    R = cfg.num_rrb
    d_user = np.repeat(pair_u, R)
    d_node = np.repeat(pair_k, R)
    d_rrb = np.tile(np.arange(R, dtype=np.int64), pair_u.shape[0])
    d_weight = B / noise_rate(channel.gain_sh[d_user, d_rrb, d_node],
                              nominal_sh_power(cfg))

    # direct eRRH vertices (same construction as the helper network)
    pair_u, pair_s = np.nonzero(topo.member_errh)
    e_user = np.repeat(pair_u, R)
    e_node = np.repeat(pair_s, R)
    e_rrb = np.tile(np.arange(R, dtype=np.int64), pair_u.shape[0])
    e_hit = np.zeros(e_user.shape[0], dtype=bool)
    pop_v = popular[e_user]
    e_hit[pop_v] = cache.errh[e_node[pop_v], seg[e_user[pop_v]]]
    e_weight = (B / noise_rate(channel.gain_errh[e_user, e_rrb, e_node], cfg.p_errh_per_rrb)
                + np.where(e_hit, 0.0, B / cfg.fronthaul_rate))
    e_relay = np.full(e_user.shape[0], -1, dtype=np.int64)

    if cfg.num_sh and popular.any():
        two = _two_hop_vertices(topo, cache, channel, requests, cfg,
                                e_user, e_rrb, e_weight)
        if two is not None:
            t_user, t_rrb, t_feeder, t_relay, t_weight = two
            e_user = np.concatenate([e_user, t_user])
            e_rrb = np.concatenate([e_rrb, t_rrb])
            e_node = np.concatenate([e_node, t_feeder])
            e_relay = np.concatenate([e_relay, t_relay])
            e_weight = np.concatenate([e_weight, t_weight])

    return RelayGraph(d_user=d_user, d_rrb=d_rrb, d_node=d_node, d_weight=d_weight,
                      e_user=e_user, e_rrb=e_rrb, e_node=e_node, e_relay=e_relay,
                      e_weight=e_weight)


def _two_hop_vertices(topo, cache, channel, requests, cfg,
                      e_user, e_rrb, e_weight):
    """Two-hop options for popular requests of users inside a relay's range.

    weight = feeder hop + relay hop (+ fronthaul when the feeder misses),
    offered only where it undercuts the best direct eRRH weight for the same
    (user, RRB)."""
    B = cfg.segment_bits
    seg = requests.segment
    cand_users = np.flatnonzero(requests.is_popular & topo.member_sh.any(axis=1))
    if cand_users.size == 0:
        return None
    R, H, S = cfg.num_rrb, cfg.num_sh, cfg.num_errh

    # feeder leg: (H, R, S) rates, plus the per-user fronthaul term
    feed_rate = rate_bps(channel.gain_errh_sh, cfg.p_errh_per_rrb, cfg)
    feed_delay = B / feed_rate                                   # (H, R, S)
    miss = ~cache.errh[:, seg[cand_users]].T                     # (n, S)
    feed_total = (feed_delay[None, ...]
                  + (miss[:, None, None, :] * (B / cfg.fronthaul_rate)))  # (n,H,R,S)
    best_feed = feed_total.min(axis=3)                           # (n, H, R)
    best_feeder = feed_total.argmin(axis=3)

    relay_rate = rate_bps(channel.gain_sh[cand_users], nominal_sh_power(cfg), cfg)
    relay_delay = B / relay_rate                                 # (n, R, H)
    total = best_feed + np.transpose(relay_delay, (0, 2, 1))     # (n, H, R)
    total = np.where(topo.member_sh[cand_users][:, :, None], total, np.inf)
    best_total = total.min(axis=1)                               # (n, R)
    best_relay = total.argmin(axis=1)

    # best direct eRRH weight per (user, rrb), for the "only when better" rule
    direct_best = np.full((cfg.num_users, R), np.inf)
    np.minimum.at(direct_best, (e_user, e_rrb), e_weight)
    better = best_total < direct_best[cand_users]
    if not better.any():
        return None
    n_idx, r_idx = np.nonzero(better)
    users = cand_users[n_idx]
    relays = best_relay[n_idx, r_idx]
    feeders = best_feeder[n_idx, relays, r_idx]
    weights = best_total[n_idx, r_idx]
    return users, r_idx.astype(np.int64), feeders, relays, weights


@dataclass
class RelaySchedule:
    direct: np.ndarray        # (n, 3) rows (user, rrb, relay)
    errh: np.ndarray          # (m, 3) rows (user, rrb, errh)
    twohop: np.ndarray        # (k, 4) rows (user, rrb, feeder, relay)
    power_errh: np.ndarray
    power_relay: np.ndarray


def relay_mwis(graph: RelayGraph, cfg: SimConfig) -> RelaySchedule:
    user_taken = np.zeros(cfg.num_users, dtype=bool)
    rrb_taken = np.zeros(cfg.num_rrb, dtype=bool)
    d_idx = greedy_scan_indices(graph.d_user, graph.d_rrb, graph.d_weight,
                                graph.d_node, user_taken, rrb_taken)
    tie = np.where(graph.e_relay >= 0, cfg.num_errh + graph.e_relay, graph.e_node)
    e_idx = greedy_scan_indices(graph.e_user, graph.e_rrb, graph.e_weight,
                                tie, user_taken, rrb_taken)
    e_idx = np.asarray(e_idx, dtype=np.int64)
    is_two = graph.e_relay[e_idx] >= 0 if e_idx.size else np.zeros(0, dtype=bool)
    direct = np.column_stack((graph.d_user[d_idx], graph.d_rrb[d_idx],
                              graph.d_node[d_idx])).reshape(-1, 3).astype(np.int64)
    de = e_idx[~is_two]
    te = e_idx[is_two]
    errh = np.column_stack((graph.e_user[de], graph.e_rrb[de],
                            graph.e_node[de])).reshape(-1, 3).astype(np.int64)
    twohop = np.column_stack((graph.e_user[te], graph.e_rrb[te], graph.e_node[te],
                              graph.e_relay[te])).reshape(-1, 4).astype(np.int64)
    return RelaySchedule(direct=direct, errh=errh, twohop=twohop,
                         power_errh=np.zeros((cfg.num_errh, cfg.num_rrb)),
                         power_relay=np.zeros((cfg.num_sh, cfg.num_rrb)))


def allocate_relay_power(sched: RelaySchedule, channel: ChannelState,
                         cfg: SimConfig) -> None:
    """eRRHs spend the fixed level on every RRB they transmit on (serving a
    user or feeding a relay); each relay water-fills its budget over all RRBs
    it transmits on, direct serves and second hops alike."""
    if sched.errh.shape[0]:
        sched.power_errh[sched.errh[:, 2], sched.errh[:, 1]] = cfg.p_errh_per_rrb
    if sched.twohop.shape[0]:
        sched.power_errh[sched.twohop[:, 2], sched.twohop[:, 1]] = cfg.p_errh_per_rrb
    if not cfg.num_sh:
        return
    noise = cfg.noise_power_watts()
    tx_user = np.concatenate([sched.direct[:, 0], sched.twohop[:, 0]])
    tx_rrb = np.concatenate([sched.direct[:, 1], sched.twohop[:, 1]])
    tx_relay = np.concatenate([sched.direct[:, 2], sched.twohop[:, 3]])
    for k in np.unique(tx_relay):
        rows = tx_relay == k
        gains = channel.gain_sh[tx_user[rows], tx_rrb[rows], k]
        sched.power_relay[k, tx_rrb[rows]] = water_fill(gains, noise, cfg.p_sh_total)


def realize_relay_deliveries(sched: RelaySchedule, channel: ChannelState,
                             cache: CacheState, requests: RequestBatch,
                             cfg: SimConfig) -> list[Delivery]:
    B = cfg.segment_bits
    out: list[Delivery] = []
    for u, r, k in sched.direct.tolist():
        p = sched.power_relay[k, r]
        rate = float(rate_bps(channel.gain_sh[u, r, k], p, cfg))
        delay = B / rate if rate > 0 else np.inf
        out.append(Delivery(user=u, rrb=r, node_kind="relay", node=k,
                            segment=int(requests.segment[u]), popular=True,
                            rate=rate, delay=delay, served_from=SERVED_RELAY,
                            power=float(p)))
    for u, r, s in sched.errh.tolist():
        rate = float(rate_bps(channel.gain_errh[u, r, s], cfg.p_errh_per_rrb, cfg))
        seg = int(requests.segment[u])
        popular = bool(requests.is_popular[u])
        hit = popular and bool(cache.errh[s, seg])
        delay = (B / rate + (0.0 if hit else B / cfg.fronthaul_rate)
                 if rate > 0 else np.inf)
        out.append(Delivery(user=u, rrb=r, node_kind="errh", node=s,
                            segment=seg, popular=popular, rate=rate, delay=delay,
                            served_from=SERVED_ERRH if hit else SERVED_MBS,
                            power=cfg.p_errh_per_rrb,
                            fronthaul_bits=0.0 if hit else B))
    for u, r, s, k in sched.twohop.tolist():
        seg = int(requests.segment[u])
        hit = bool(cache.errh[s, seg])
        p2 = sched.power_relay[k, r]
        rate1 = float(rate_bps(channel.gain_errh_sh[k, r, s], cfg.p_errh_per_rrb, cfg))
        rate2 = float(rate_bps(channel.gain_sh[u, r, k], p2, cfg))
        if rate2 > 0:
            delay = B / rate1 + B / rate2 + (0.0 if hit else B / cfg.fronthaul_rate)
        else:
            delay = np.inf
        out.append(Delivery(user=u, rrb=r, node_kind="relay", node=k,
                            segment=seg, popular=True, rate=rate2, delay=delay,
                            served_from=SERVED_2HOP_ERRH if hit else SERVED_2HOP_MBS,
                            power=float(p2), fronthaul_bits=0.0 if hit else B))
    return out


def relayed_events(deliveries: list[Delivery], cfg: SimConfig) -> np.ndarray:
    """(H, F) mask of segments each relay carried over a two-hop this slot."""
    events = np.zeros((cfg.num_sh, cfg.num_segments), dtype=bool)
    for d in deliveries:
        if d.node_kind == "relay" and d.served and d.served_from != SERVED_RELAY:
            events[d.node, d.segment] = True
    return events


class RelaySlotEngine:
    """Slot mechanics of the relay network, presenting the relay caches
    through the helper rows of CacheState so the learner is reused as is."""

    helper_kind = "ce_relay"

    def __init__(self, topo: Topology, catalog: Catalog, cfg: SimConfig):
        self.topo = topo
        self.catalog = catalog
        self.cfg = cfg

    def simulate(self, cache: CacheState, rng: np.random.Generator,
                 slot_index: int):
        cfg = self.cfg
        requests = draw_requests(self.catalog, cfg.num_users, cfg.popular_prob,
                                 rng, slot_index)
        channel = sample_channel(self.topo, cfg, rng, slot_index, with_errh_sh=True)
        graph = build_relay_graph(self.topo, cache, channel, requests, cfg)
        sched = relay_mwis(graph, cfg)
        allocate_relay_power(sched, channel, cfg)
        deliveries = realize_relay_deliveries(sched, channel, cache, requests, cfg)
        return deliveries, relayed_events(deliveries, cfg), requests


# ---------------------------------------------------------------------------
# Baseline frame runners (no learning)
# ---------------------------------------------------------------------------

@dataclass
class RelayState:
    """Relay cache plus the recency bookkeeping for least-recently-hit
    eviction. Only segments a relay has itself transmitted may appear."""

    cache: np.ndarray       # (H, F) bool
    last_hit: np.ndarray    # (H, F) slot index of the last hit, -1 when absent

    @classmethod
    def empty(cls, cfg: SimConfig) -> "RelayState":
        return cls(cache=np.zeros((cfg.num_sh, cfg.num_segments), dtype=bool),
                   last_hit=np.full((cfg.num_sh, cfg.num_segments), -1, dtype=np.int64))


def relay_step(state: RelayState, deliveries: list[Delivery], slot: int,
               cap: int) -> None:
    """Post-slot relay cache update: refresh recency on direct hits, then
    insert every segment just relayed, evicting the least-recently-hit entry
    when a relay is at capacity."""
    for d in deliveries:
        if d.node_kind != "relay" or not d.served:
            continue
        if d.served_from == SERVED_RELAY:
            state.last_hit[d.node, d.segment] = slot
    for d in deliveries:
        if d.node_kind != "relay" or not d.served or d.served_from == SERVED_RELAY:
            continue
        k, f = d.node, d.segment
        if state.cache[k, f]:
            state.last_hit[k, f] = max(state.last_hit[k, f], slot)
            continue
        if int(state.cache[k].sum()) >= cap:
            held = np.flatnonzero(state.cache[k])
            evict = held[np.argmin(state.last_hit[k, held])]
            state.cache[k, evict] = False
            state.last_hit[k, evict] = -1
        state.cache[k, f] = True
        state.last_hit[k, f] = slot


def run_static_frame(scheme: str, topo: Topology, catalog: Catalog,
                     cfg: SimConfig, rng: np.random.Generator,
                     helper_kind: str = "sh",
                     keep_slots: bool = False,
                     collect_deliveries: bool = False):
    """Serve one frame under a fixed caching scheme (no learning stage).

    helper_kind 'sh' serves from scheme-filled helper caches; 'ce_relay'
    starts relays empty and lets them fill through the relaying rule;
    'none' ignores helpers entirely.
    """
    from .rl import FrameResult, snapshot_cache  # runtime import, keeps deps one-way

    cache = CacheState.empty(cfg)
    fill_all_caches(scheme, catalog, cache, cfg, rng,
                    include_helpers=(helper_kind == "sh"))
    refresh_bits = cfg.segment_bits * float(cache.errh.sum())
    relay_state = RelayState.empty(cfg) if helper_kind == "ce_relay" else None
    if relay_state is not None:
        cache.sh = relay_state.cache   # alias: relay_step mutations show through

    slots: list[SlotMetrics] = []
    delivery_log: list = []
    cache_log: list = []
    for t in range(cfg.tx_slots_per_frame):
        requests = draw_requests(catalog, cfg.num_users, cfg.popular_prob, rng, t)
        if helper_kind == "ce_relay":
            channel = sample_channel(topo, cfg, rng, t, with_errh_sh=True)
            graph = build_relay_graph(topo, cache, channel, requests, cfg)
            sched = relay_mwis(graph, cfg)
            allocate_relay_power(sched, channel, cfg)
            deliveries = realize_relay_deliveries(sched, channel, cache, requests, cfg)
            relay_step(relay_state, deliveries, t, cfg.cache_cap_sh)
        else:
            channel = sample_channel(topo, cfg, rng, t)
            schedule = schedule_slot(topo, cache, channel, requests, cfg)
            deliveries = realize_deliveries(schedule, channel, cache, requests, cfg)
        slots.append(slot_metrics_from_deliveries(deliveries, cfg))
        if collect_deliveries:
            delivery_log.extend((t, d) for d in deliveries)
            snapshot_cache(cache, t, cache_log)
    return FrameResult(summary=summarize_frame(slots, cfg, refresh_bits),
                       cache=cache, trace=None,
                       slots=slots if keep_slots else [],
                       delivery_log=delivery_log, cache_log=cache_log)
