"""Per-slot user scheduling: conflict graph, helper-first greedy selection of
minimum-weight vertices, and power allocation (fixed per-RRB at eRRHs,
water-filling at helpers)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cache import CacheState
from .channel import ChannelState, rate_bps
from .config import SimConfig
from .metrics import user_delay
from .topology import Topology
from .traffic import RequestBatch

SERVED_SH = "SH-cache"
SERVED_ERRH = "eRRH-cache"
SERVED_MBS = "MBS"


@dataclass
class ConflictGraph:
    """Vertex arrays for one slot. Two vertices conflict when they share a
    user or an RRB; edges stay implicit. Helper vertices exist only for
    in-area users whose requested segment the helper holds."""

    sh_user: np.ndarray
    sh_rrb: np.ndarray
    sh_node: np.ndarray
    sh_weight: np.ndarray
    errh_user: np.ndarray
    errh_rrb: np.ndarray
    errh_node: np.ndarray
    errh_weight: np.ndarray

    @classmethod
    def empty(cls) -> "ConflictGraph":
        z = np.empty(0, dtype=np.int64)
        w = np.empty(0, dtype=float)
        return cls(z, z, z, w, z.copy(), z.copy(), z.copy(), w.copy())


@dataclass
class Schedule:
    """Committed one-to-one user/RRB assignments plus transmit powers."""

    errh_assign: np.ndarray          # (n, 3) rows (user, rrb, errh)
    sh_assign: np.ndarray            # (m, 3) rows (user, rrb, sh)
    power_errh: np.ndarray           # (S, R)
    power_sh: np.ndarray             # (H, R)

    @classmethod
    def empty(cls, cfg: SimConfig) -> "Schedule":
        return cls(errh_assign=np.empty((0, 3), dtype=np.int64),
                   sh_assign=np.empty((0, 3), dtype=np.int64),
                   power_errh=np.zeros((cfg.num_errh, cfg.num_rrb)),
                   power_sh=np.zeros((cfg.num_sh, cfg.num_rrb)))


def nominal_sh_power(cfg: SimConfig) -> float:
    """Pre-allocation power assumed when weighting helper vertices; the real
    water-filled powers are only known after assignment."""
    return cfg.p_sh_total / cfg.nominal_sh_users


def _expand_pairs(pair_user: np.ndarray, pair_node: np.ndarray, num_rrb: int):
    """Cross each (user, node) pair with every RRB."""
    n = pair_user.shape[0]
    user = np.repeat(pair_user, num_rrb)
    node = np.repeat(pair_node, num_rrb)
    rrb = np.tile(np.arange(num_rrb, dtype=np.int64), n)
    return user, rrb, node


def build_graph(topo: Topology, cache: CacheState, channel: ChannelState,
                requests: RequestBatch, cfg: SimConfig) -> ConflictGraph:
    """Enumerate serving options and weight each by its delivery delay.

    eRRH vertices carry the fronthaul fetch term when the segment is not
    cached (and always for unpopular requests); helper vertices exist only
    on cache hits, so they never carry it.
    """
    B = cfg.segment_bits
    seg = requests.segment
    popular = requests.is_popular

    # helper vertices: in service area and segment cached there
    if cfg.num_sh:
        sh_hit = np.zeros((cfg.num_users, cfg.num_sh), dtype=bool)
        sh_hit[popular] = cache.sh[:, seg[popular]].T
        pair_u, pair_h = np.nonzero(topo.member_sh & sh_hit)
    else:
        pair_u = pair_h = np.empty(0, dtype=np.int64)
    su, sr, sn = _expand_pairs(pair_u, pair_h, cfg.num_rrb)
    s_rate = rate_bps(channel.gain_sh[su, sr, sn], nominal_sh_power(cfg), cfg)
    s_w = B / s_rate

    # eRRH vertices: every request, with the core-fetch term on misses
    pair_u, pair_s = np.nonzero(topo.member_errh)
    eu, er, en = _expand_pairs(pair_u, pair_s, cfg.num_rrb)
    e_rate = rate_bps(channel.gain_errh[eu, er, en], cfg.p_errh_per_rrb, cfg)
    hit = np.zeros(eu.shape[0], dtype=bool)
    pop_v = popular[eu]
    hit[pop_v] = cache.errh[en[pop_v], seg[eu[pop_v]]]
    e_w = B / e_rate + np.where(hit, 0.0, B / cfg.fronthaul_rate)

    return ConflictGraph(sh_user=su, sh_rrb=sr, sh_node=sn, sh_weight=s_w,
                         errh_user=eu, errh_rrb=er, errh_node=en, errh_weight=e_w)


def greedy_scan_indices(user, rrb, weight, tie_node, user_taken, rrb_taken) -> list[int]:
    """Commit vertices in (weight, user, rrb, node) order, skipping any that
    share a user or RRB with an earlier commitment. Equivalent to repeatedly
    extracting the minimum-weight vertex and deleting its conflicts. Returns
    the committed vertex indices; the taken masks are updated in place."""
    order = np.lexsort((tie_node, rrb, user, weight))
    picks: list[int] = []
    user_list = user.tolist()
    rrb_list = rrb.tolist()
    for i in order.tolist():
        u = user_list[i]
        r = rrb_list[i]
        if user_taken[u] or rrb_taken[r]:
            continue
        user_taken[u] = True
        rrb_taken[r] = True
        picks.append(i)
    return picks


def greedy_mwis(graph: ConflictGraph, num_users: int, num_rrb: int) -> Schedule:
    """Helper-first greedy independent set: exhaust helper vertices by
    ascending weight, then eRRH vertices over whatever users/RRBs remain."""
    user_taken = np.zeros(num_users, dtype=bool)
    rrb_taken = np.zeros(num_rrb, dtype=bool)
    sh_idx = greedy_scan_indices(graph.sh_user, graph.sh_rrb, graph.sh_weight,
                                 graph.sh_node, user_taken, rrb_taken)
    errh_idx = greedy_scan_indices(graph.errh_user, graph.errh_rrb, graph.errh_weight,
                                   graph.errh_node, user_taken, rrb_taken)
    sh_assign = np.column_stack((graph.sh_user[sh_idx], graph.sh_rrb[sh_idx],
                                 graph.sh_node[sh_idx])).astype(np.int64)
    errh_assign = np.column_stack((graph.errh_user[errh_idx], graph.errh_rrb[errh_idx],
                                   graph.errh_node[errh_idx])).astype(np.int64)
    return Schedule(errh_assign=errh_assign.reshape(-1, 3),
                    sh_assign=sh_assign.reshape(-1, 3),
                    power_errh=np.empty((0, 0)), power_sh=np.empty((0, 0)))


def water_fill(gains: np.ndarray, noise: float, total: float,
               rel_tol: float = 1e-9, max_iter: int = 200) -> np.ndarray:
    """Split a power budget over parallel channels to maximize sum log-rate.

    Bisection on the water level mu with p_i = max(0, mu - noise/g_i) until
    the spent power matches the budget within rel_tol * total.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.size == 0:
        return np.zeros(0)
    floors = noise / gains
    lo = float(floors.min())
    hi = float(floors.max()) + total
    mid = hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        spent = float(np.maximum(mid - floors, 0.0).sum())
        if abs(spent - total) <= rel_tol * total:
            break
        if spent > total:
            hi = mid
        else:
            lo = mid
    return np.maximum(mid - floors, 0.0)


def allocate_power(schedule: Schedule, channel: ChannelState,
                   cfg: SimConfig) -> Schedule:
    """Fill the power matrices: the fixed per-RRB level on every assigned eRRH
    RRB, and a water-filled split of each helper's budget over its RRBs."""
    power_errh = np.zeros((cfg.num_errh, cfg.num_rrb))
    if schedule.errh_assign.shape[0]:
        _, er, en = schedule.errh_assign.T
        power_errh[en, er] = cfg.p_errh_per_rrb
    power_sh = np.zeros((cfg.num_sh, cfg.num_rrb))
    if schedule.sh_assign.shape[0]:
        su, sr, sn = schedule.sh_assign.T
        noise = cfg.noise_power_watts()
        for h in np.unique(sn):
            rows = sn == h
            gains = channel.gain_sh[su[rows], sr[rows], h]
            power_sh[h, sr[rows]] = water_fill(gains, noise, cfg.p_sh_total)
    schedule.power_errh = power_errh
    schedule.power_sh = power_sh
    return schedule


def schedule_slot(topo: Topology, cache: CacheState, channel: ChannelState,
                  requests: RequestBatch, cfg: SimConfig) -> Schedule:
    """Algorithm pipeline for one slot: graph, greedy selection, power."""
    graph = build_graph(topo, cache, channel, requests, cfg)
    schedule = greedy_mwis(graph, cfg.num_users, cfg.num_rrb)
    return allocate_power(schedule, channel, cfg)


@dataclass
class Delivery:
    """One realized transmission, with the delay recomputed at actual power."""

    user: int
    rrb: int
    node_kind: str            # "sh" | "errh" | "relay"
    node: int
    segment: int              # UNPOPULAR for off-catalog requests
    popular: bool
    rate: float               # bits/sec at realized power
    delay: float              # seconds; inf when rate is 0 (unserved)
    served_from: str
    power: float
    fronthaul_bits: float = 0.0

    @property
    def served(self) -> bool:
        return np.isfinite(self.delay)


def realize_deliveries(schedule: Schedule, channel: ChannelState,
                       cache: CacheState, requests: RequestBatch,
                       cfg: SimConfig) -> list[Delivery]:
    """Turn committed assignments into delivery records using the allocated
    (post water-filling) powers. A helper RRB that the water-filler shut off
    leaves its user unserved this slot."""
    B = cfg.segment_bits
    out: list[Delivery] = []
    for u, r, h in schedule.sh_assign.tolist():
        p = schedule.power_sh[h, r]
        rate = float(rate_bps(channel.gain_sh[u, r, h], p, cfg))
        delay = user_delay(SERVED_SH, rate, cfg) if rate > 0 else np.inf
        out.append(Delivery(user=u, rrb=r, node_kind="sh", node=h,
                            segment=int(requests.segment[u]), popular=True,
                            rate=rate, delay=delay, served_from=SERVED_SH,
                            power=float(p)))
    for u, r, s in schedule.errh_assign.tolist():
        p = cfg.p_errh_per_rrb
        rate = float(rate_bps(channel.gain_errh[u, r, s], p, cfg))
        seg = int(requests.segment[u])
        popular = bool(requests.is_popular[u])
        hit = popular and bool(cache.errh[s, seg])
        src = SERVED_ERRH if hit else SERVED_MBS
        delay = user_delay(src, rate, cfg) if rate > 0 else np.inf
        out.append(Delivery(user=u, rrb=r, node_kind="errh", node=s,
                            segment=seg, popular=popular, rate=rate, delay=delay,
                            served_from=src, power=p,
                            fronthaul_bits=0.0 if hit else B))
    return out
