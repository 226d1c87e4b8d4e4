"""Binary caching state for eRRHs and smart helpers, with capacity control."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .topology import Topology

ERRH = "errh"
SH = "sh"


def select_within_cap(decisions: np.ndarray, cap: int,
                      tie_break: np.ndarray) -> np.ndarray:
    """Trim a binary decision row to at most cap ones.

    Keeps the cap entries with the highest tie_break value; equal values keep
    the lower segment index. Rows already within cap pass through unchanged.
    """
    decisions = np.asarray(decisions, dtype=bool)
    if int(decisions.sum()) <= cap:
        return decisions.copy()
    chosen_from = np.flatnonzero(decisions)
    order = np.lexsort((chosen_from, -np.asarray(tie_break, dtype=float)[chosen_from]))
    row = np.zeros(decisions.shape[0], dtype=bool)
    row[chosen_from[order[:cap]]] = True
    return row


@dataclass
class CacheState:
    """Per-node binary cache rows; every row respects its capacity bound."""

    errh: np.ndarray   # (S, F) bool
    sh: np.ndarray     # (H, F) bool

    @classmethod
    def empty(cls, cfg: SimConfig) -> "CacheState":
        return cls(errh=np.zeros((cfg.num_errh, cfg.num_segments), dtype=bool),
                   sh=np.zeros((cfg.num_sh, cfg.num_segments), dtype=bool))

    def _rows(self, kind: str) -> np.ndarray:
        if kind == ERRH:
            return self.errh
        if kind == SH:
            return self.sh
        raise ValueError(f"unknown node kind {kind!r}")

    def is_hit(self, kind: str, node: int, segment: int) -> bool:
        rows = self._rows(kind)
        if not (0 <= node < rows.shape[0] and 0 <= segment < rows.shape[1]):
            raise IndexError(f"{kind}[{node}], segment {segment} out of range")
        return bool(rows[node, segment])

    def apply_decision(self, kind: str, node: int, decisions: np.ndarray,
                       cap: int, tie_break: np.ndarray) -> None:
        self._rows(kind)[node] = select_within_cap(decisions, cap, tie_break)

    def copy(self) -> "CacheState":
        return CacheState(errh=self.errh.copy(), sh=self.sh.copy())


def sh_eligible(segment: int, sh: int, overheard: np.ndarray,
                cache: CacheState) -> bool:
    """A helper may only decide to cache what it holds or just overheard."""
    return bool(cache.sh[sh, segment]) or bool(overheard[sh, segment])


def eligible_mask(overheard: np.ndarray, cache: CacheState) -> np.ndarray:
    """(H, F) mask of segments each helper is allowed to cache right now."""
    return cache.sh | overheard


def overheard_from_deliveries(errh_user_segment: list[tuple[int, int, int]],
                              topo: Topology, cfg: SimConfig) -> np.ndarray:
    """(H, F) mask of segments helpers overheard in one slot.

    A helper overhears an eRRH transmission when the communication happens in
    its vicinity: the receiving user or the transmitting eRRH lies within
    overhear_radius of the helper.
    """
    heard = np.zeros((cfg.num_sh, cfg.num_segments), dtype=bool)
    if not cfg.num_sh:
        return heard
    for user, segment, errh in errh_user_segment:
        near = ((topo.dist_user_sh[user] <= cfg.overhear_radius)
                | (topo.dist_sh_errh[:, errh] <= cfg.overhear_radius))
        heard[near, segment] = True
    return heard
