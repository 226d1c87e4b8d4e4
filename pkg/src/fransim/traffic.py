"""Zipf popularity catalog and per-slot request generation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNPOPULAR = -1  # sentinel segment id for uncacheable one-off requests


@dataclass
class Catalog:
    """Rank-ordered popularity distribution over the popular segments."""

    z: np.ndarray                 # (F,) probabilities, non-increasing
    gamma: float
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.cdf = np.cumsum(self.z)

    @property
    def num_segments(self) -> int:
        return self.z.shape[0]


def build_catalog(num_segments: int, gamma: float) -> Catalog:
    """z_f proportional to f**-gamma over ranks f = 1..F."""
    if num_segments < 1:
        raise ValueError("num_segments must be >= 1")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    ranks = np.arange(1, num_segments + 1, dtype=float)
    weights = ranks ** (-gamma)
    return Catalog(z=weights / weights.sum(), gamma=gamma)


@dataclass
class RequestBatch:
    """One request per user for one slot. segment == UNPOPULAR marks requests
    outside the popular catalog; those are always fetched from the core."""

    is_popular: np.ndarray    # (U,) bool
    segment: np.ndarray       # (U,) int, UNPOPULAR where not popular
    slot_index: int = 0


def draw_requests(catalog: Catalog, num_users: int, popular_prob: float,
                  rng: np.random.Generator, slot_index: int = 0) -> RequestBatch:
    """i.i.d. requests: popular with popular_prob, segment id drawn from z."""
    popular = rng.random(num_users) < popular_prob
    segment = np.full(num_users, UNPOPULAR, dtype=np.int64)
    n_pop = int(popular.sum())
    if n_pop:
        draws = np.searchsorted(catalog.cdf, rng.random(n_pop), side="right")
        # float cdf may top out a hair below 1.0
        segment[popular] = np.minimum(draws, catalog.num_segments - 1)
    return RequestBatch(is_popular=popular, segment=segment, slot_index=slot_index)
