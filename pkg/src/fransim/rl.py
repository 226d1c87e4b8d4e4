"""Actor-critic cache learning: one binary virtual agent per (node, segment).

Each agent keeps a utility estimate per action (cache / don't) and a policy
pair that relaxes toward the softmax of the utilities. Learning happens in a
per-frame stage of shadow-traffic iterations; eRRH caches are then committed
from the final policies, while helpers keep refreshing their caches from what
they overhear during the transmission stage.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cache import CacheState, eligible_mask, overheard_from_deliveries, select_within_cap
from .channel import sample_channel
from .config import SimConfig
from .metrics import RunSummary, SlotMetrics, slot_metrics_from_deliveries, summarize_frame
from .scheduler import Delivery, realize_deliveries, schedule_slot
from .topology import Topology
from .traffic import Catalog, RequestBatch, draw_requests


@dataclass
class LearnSchedule:
    """Power-law step sizes n**-exp for the utility (critic) and policy
    (actor) updates. Constructor enforces the usual stochastic-approximation
    conditions: sums diverge (exp <= 1), squared sums converge (exp > 0.5),
    and the policy step vanishes relative to the utility step."""

    utility_exp: float = 0.6
    policy_exp: float = 0.85

    def __post_init__(self):
        if not 0.5 < self.utility_exp <= 1.0:
            raise ValueError("utility_exp must lie in (0.5, 1]")
        if not 0.5 < self.policy_exp <= 1.0:
            raise ValueError("policy_exp must lie in (0.5, 1]")
        if self.policy_exp <= self.utility_exp:
            raise ValueError("policy step must decay faster than utility step")

    def alpha_utility(self, n: int) -> float:
        return float(n) ** -self.utility_exp

    def alpha_policy(self, n: int) -> float:
        return float(n) ** -self.policy_exp

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "LearnSchedule":
        return cls(utility_exp=cfg.lr_utility_exp, policy_exp=cfg.lr_policy_exp)


def softmax_pairs(utilities: np.ndarray, lambda_p: float) -> np.ndarray:
    """Row-wise two-action softmax with max-subtraction for overflow safety."""
    scaled = lambda_p * np.asarray(utilities, dtype=float)
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(scaled)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_policy(u0: float, u1: float, lambda_p: float) -> tuple[float, float]:
    p = softmax_pairs(np.array([u0, u1]), lambda_p)
    return float(p[0]), float(p[1])


def compute_reward(cached, legitimacy, c_l: float, alpha_scale: float = 1.0):
    """alpha * [(1 - 2c) + c_l * l]: a per-iteration cost of occupying a cache
    slot plus the weighted hit/miss signal."""
    cached = np.asarray(cached, dtype=float)
    return alpha_scale * ((1.0 - 2.0 * cached) + c_l * np.asarray(legitimacy, dtype=float))


def update_pairs(utility: np.ndarray, policy: np.ndarray, actions: np.ndarray,
                 rewards: np.ndarray, alpha_u: float, alpha_pi: float,
                 lambda_p: float) -> None:
    """In-place bank update. Only the taken action's utility moves; the policy
    then relaxes toward the softmax of the updated utilities and is
    renormalized so each pair sums to exactly one."""
    flat_u = utility.reshape(-1, 2)
    flat_p = policy.reshape(-1, 2)
    acts = actions.reshape(-1).astype(np.int64)
    rws = rewards.reshape(-1)
    rows = np.arange(flat_u.shape[0])
    flat_u[rows, acts] += alpha_u * (rws - flat_u[rows, acts])
    beta = softmax_pairs(flat_u, lambda_p)
    flat_p += alpha_pi * (beta - flat_p)
    flat_p /= flat_p.sum(axis=1, keepdims=True)


def update_agent(utility: tuple[float, float], policy: tuple[float, float],
                 action: int, reward: float, schedule: LearnSchedule, n: int,
                 lambda_p: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Single-agent form of the bank update (same arithmetic)."""
    u = np.array([utility], dtype=float)
    p = np.array([policy], dtype=float)
    update_pairs(u, p, np.array([action]), np.array([reward]),
                 schedule.alpha_utility(n), schedule.alpha_policy(n), lambda_p)
    return (float(u[0, 0]), float(u[0, 1])), (float(p[0, 0]), float(p[0, 1]))


@dataclass
class AgentBank:
    """Utilities and policies for every (node, segment) agent; index 1 of the
    trailing axis is the cache action."""

    errh_utility: np.ndarray   # (S, F, 2)
    errh_policy: np.ndarray    # (S, F, 2)
    sh_utility: np.ndarray     # (H, F, 2)
    sh_policy: np.ndarray      # (H, F, 2)
    iteration: int = 0

    @classmethod
    def initial(cls, cfg: SimConfig) -> "AgentBank":
        S, H, F = cfg.num_errh, cfg.num_sh, cfg.num_segments
        return cls(errh_utility=np.zeros((S, F, 2)),
                   errh_policy=np.full((S, F, 2), 0.5),
                   sh_utility=np.zeros((H, F, 2)),
                   sh_policy=np.full((H, F, 2), 0.5))


def area_demand(requests: RequestBatch, member: np.ndarray,
                num_nodes: int, num_segments: int) -> np.ndarray:
    """(nodes, F) mask: segment f was requested this slot by some user inside
    the node's service area."""
    demanded = np.zeros((num_nodes, num_segments), dtype=bool)
    for u in np.flatnonzero(requests.is_popular).tolist():
        demanded[member[u], requests.segment[u]] = True
    return demanded


def legitimacy_from_slot(deliveries: list[Delivery], requests: RequestBatch,
                         topo: Topology, cache: CacheState,
                         cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-(node, segment) hit/miss signal for one scheduled slot.

    +1 when the node served the segment from its cache, -1 when the segment
    was in demand under the node's service area but the node did not hold it,
    0 otherwise. Helpers can only score +1 through an actual serve, so the
    miss side is what teaches them which segments are worth holding.
    """
    l_errh = np.where(
        area_demand(requests, topo.member_errh, cfg.num_errh, cfg.num_segments)
        & ~cache.errh, -1.0, 0.0)
    l_sh = np.where(
        area_demand(requests, topo.member_sh, cfg.num_sh, cfg.num_segments)
        & ~cache.sh, -1.0, 0.0)
    for d in deliveries:
        if not (d.popular and d.served):
            continue
        if d.node_kind == "errh" and d.served_from == "eRRH-cache":
            l_errh[d.node, d.segment] = 1.0
        elif d.node_kind in ("sh", "relay") and d.served_from in ("SH-cache", "relay-cache"):
            l_sh[d.node, d.segment] = 1.0
    return l_errh, l_sh


class ShSlotEngine:
    """Slot mechanics of the smart-helper network (also covers helper-free
    runs, where the helper arrays are just empty)."""

    helper_kind = "sh"

    def __init__(self, topo: Topology, catalog: Catalog, cfg: SimConfig):
        self.topo = topo
        self.catalog = catalog
        self.cfg = cfg

    def simulate(self, cache: CacheState, rng: np.random.Generator,
                 slot_index: int) -> tuple[list[Delivery], np.ndarray, RequestBatch]:
        cfg = self.cfg
        requests = draw_requests(self.catalog, cfg.num_users, cfg.popular_prob,
                                 rng, slot_index)
        channel = sample_channel(self.topo, cfg, rng, slot_index)
        schedule = schedule_slot(self.topo, cache, channel, requests, cfg)
        deliveries = realize_deliveries(schedule, channel, cache, requests, cfg)
        heard = overheard_from_deliveries(
            [(d.user, d.segment, d.node) for d in deliveries
             if d.node_kind == "errh" and d.popular and d.served],
            self.topo, cfg)
        return deliveries, heard, requests


def sample_actions(bank: AgentBank, eligible: np.ndarray,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw one binary action per agent; helper agents are forced to 0 for
    segments they are not eligible to cache."""
    b_errh = rng.random(bank.errh_policy.shape[:2]) < bank.errh_policy[..., 1]
    b_sh = rng.random(bank.sh_policy.shape[:2]) < bank.sh_policy[..., 1]
    b_sh &= eligible
    return b_errh, b_sh


def learning_iteration(bank: AgentBank, cache: CacheState, engine,
                       cfg: SimConfig, rng: np.random.Generator,
                       overheard: np.ndarray,
                       schedule: LearnSchedule) -> tuple[np.ndarray, float, float]:
    """One shadow-traffic learning step: act, recache, schedule, reward,
    update. Returns the new overheard mask and the mean agent rewards."""
    n = bank.iteration + 1
    b_errh, b_sh = sample_actions(bank, eligible_mask(overheard, cache), rng)
    for s in range(cfg.num_errh):
        cache.apply_decision("errh", s, b_errh[s], cfg.cache_cap_errh,
                             bank.errh_policy[s, :, 1])
    for h in range(cfg.num_sh):
        cache.apply_decision("sh", h, b_sh[h], cfg.cache_cap_sh,
                             bank.sh_policy[h, :, 1])
    deliveries, heard, requests = engine.simulate(cache, rng, n)
    l_errh, l_sh = legitimacy_from_slot(deliveries, requests, engine.topo, cache, cfg)
    r_errh = compute_reward(cache.errh, l_errh, cfg.c_l, cfg.alpha_mu)
    r_sh = compute_reward(cache.sh, l_sh, cfg.c_l, cfg.alpha_nu)
    a_u, a_pi = schedule.alpha_utility(n), schedule.alpha_policy(n)
    update_pairs(bank.errh_utility, bank.errh_policy,
                 b_errh.astype(np.int64), r_errh, a_u, a_pi, cfg.lambda_p)
    if cfg.num_sh:
        update_pairs(bank.sh_utility, bank.sh_policy,
                     b_sh.astype(np.int64), r_sh, a_u, a_pi, cfg.lambda_p)
    bank.iteration = n
    return heard, float(r_errh.mean()), float(r_sh.mean()) if cfg.num_sh else 0.0


def demand_scores(utility: np.ndarray) -> np.ndarray:
    """Per-segment demand statistic learned by the critic: the idle action
    collects a miss penalty whenever local users wanted an uncached segment,
    so a low idle-action utility marks a segment worth holding. The cache
    action's estimate is built from far fewer samples (exploration of it
    vanishes), which makes this the reliable side of the learned state."""
    return -utility[..., 0]


def commit_errh_caches(bank: AgentBank, cache: CacheState, cfg: SimConfig) -> float:
    """Frame commit: each eRRH fetches the cap segments with the strongest
    learned demand. Returns the fronthaul bits spent on the refresh."""
    before = cache.errh.copy()
    everything = np.ones(cfg.num_segments, dtype=bool)
    scores = demand_scores(bank.errh_utility)
    for s in range(cfg.num_errh):
        cache.apply_decision("errh", s, everything, cfg.cache_cap_errh, scores[s])
    new_entries = int(np.count_nonzero(cache.errh & ~before))
    return cfg.segment_bits * new_entries


def refresh_helper_caches(bank: AgentBank, cache: CacheState,
                          overheard: np.ndarray, cfg: SimConfig) -> None:
    """Opportunistic helper recache: among what a helper holds or just
    overheard, keep the cap segments with the strongest learned demand."""
    eligible = eligible_mask(overheard, cache)
    scores = demand_scores(bank.sh_utility)
    for h in range(cfg.num_sh):
        cache.apply_decision("sh", h, eligible[h], cfg.cache_cap_sh, scores[h])


@dataclass
class FrameResult:
    summary: RunSummary
    cache: CacheState
    trace: dict[str, np.ndarray] | None = None
    slots: list[SlotMetrics] = field(default_factory=list, repr=False)
    delivery_log: list = field(default_factory=list, repr=False)
    cache_log: list = field(default_factory=list, repr=False)


def snapshot_cache(cache: CacheState, slot: int, log: list) -> None:
    """Append (node label, slot, cached segment tuple) rows for the trace."""
    for s in range(cache.errh.shape[0]):
        log.append((f"errh{s}", slot, tuple(np.flatnonzero(cache.errh[s]).tolist())))
    for h in range(cache.sh.shape[0]):
        log.append((f"helper{h}", slot, tuple(np.flatnonzero(cache.sh[h]).tolist())))


def run_frame(bank: AgentBank, cache: CacheState, topo: Topology,
              catalog: Catalog, cfg: SimConfig, rng: np.random.Generator,
              engine=None, collect_trace: bool = False,
              keep_slots: bool = False,
              collect_deliveries: bool = False) -> FrameResult:
    """One two-timescale frame: learn for learn_iters shadow iterations,
    commit the eRRH caches, then serve tx_slots_per_frame real slots while
    helpers keep integrating what they overhear."""
    if engine is None:
        engine = ShSlotEngine(topo, catalog, cfg)
    steps = LearnSchedule.from_config(cfg)
    overheard = np.zeros((cfg.num_sh, cfg.num_segments), dtype=bool)

    trace_errh = np.empty(cfg.learn_iters) if collect_trace else None
    trace_sh = np.empty(cfg.learn_iters) if collect_trace else None
    trace_top = np.empty(cfg.learn_iters) if collect_trace else None
    top_k = min(cfg.cache_cap_errh, cfg.num_segments)

    for it in range(cfg.learn_iters):
        overheard, mean_errh, mean_sh = learning_iteration(
            bank, cache, engine, cfg, rng, overheard, steps)
        if collect_trace:
            trace_errh[it] = mean_errh
            trace_sh[it] = mean_sh
            trace_top[it] = float(bank.errh_policy[:, :top_k, 1].mean())

    refresh_bits = commit_errh_caches(bank, cache, cfg)

    slots: list[SlotMetrics] = []
    delivery_log: list = []
    cache_log: list = []
    overheard = np.zeros((cfg.num_sh, cfg.num_segments), dtype=bool)
    for t in range(cfg.tx_slots_per_frame):
        if cfg.num_sh:
            refresh_helper_caches(bank, cache, overheard, cfg)
        deliveries, overheard, _ = engine.simulate(cache, rng, t)
        slots.append(slot_metrics_from_deliveries(deliveries, cfg))
        if collect_deliveries:
            delivery_log.extend((t, d) for d in deliveries)
            snapshot_cache(cache, t, cache_log)

    trace = None
    if collect_trace:
        trace = {"mean_reward_errh": trace_errh, "mean_reward_helper": trace_sh,
                 "mean_top_policy": trace_top}
    return FrameResult(summary=summarize_frame(slots, cfg, refresh_bits),
                       cache=cache, trace=trace,
                       slots=slots if keep_slots else [],
                       delivery_log=delivery_log, cache_log=cache_log)
