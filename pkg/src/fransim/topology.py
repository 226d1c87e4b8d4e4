"""Static network geometry: node placement and service-area membership."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, SimConfig

PLACEMENT_RETRY_CAP = 100_000


@dataclass
class Topology:
    """Immutable node layout for one simulation run.

    ``member_errh[u, s]`` is True when user u may be served by eRRH s
    (inside its service radius, or s is u's nearest eRRH so nobody is
    unservable). ``member_sh[u, h]`` requires the helper service radius.
    """

    errh_pos: np.ndarray        # (S, 2)
    sh_pos: np.ndarray          # (H, 2)
    user_pos: np.ndarray        # (U, 2)
    mbs_pos: np.ndarray         # (2,)
    member_errh: np.ndarray     # (U, S) bool
    member_sh: np.ndarray       # (U, H) bool
    dist_user_errh: np.ndarray = field(repr=False, default=None)   # (U, S)
    dist_user_sh: np.ndarray = field(repr=False, default=None)     # (U, H)
    dist_sh_errh: np.ndarray = field(repr=False, default=None)     # (H, S)

    @property
    def users_of_errh(self) -> list[set[int]]:
        return [set(np.flatnonzero(self.member_errh[:, s])) for s in range(self.errh_pos.shape[0])]

    @property
    def users_of_sh(self) -> list[set[int]]:
        return [set(np.flatnonzero(self.member_sh[:, h])) for h in range(self.sh_pos.shape[0])]


def _uniform_disc(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def _place_spaced(n: int, radius: float, min_spacing: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Place n points uniformly in the disc, resampling any point closer than
    min_spacing to an already placed one. Retries are capped so a geometrically
    infeasible request fails loudly instead of spinning."""
    points = np.empty((n, 2))
    placed = 0
    attempts = 0
    while placed < n:
        candidate = _uniform_disc(1, radius, rng)[0]
        attempts += 1
        if attempts > PLACEMENT_RETRY_CAP:
            raise ConfigError(
                f"could not place {n} nodes with spacing {min_spacing} m in a "
                f"{radius} m cell after {PLACEMENT_RETRY_CAP} samples")
        if placed and np.min(np.linalg.norm(points[:placed] - candidate, axis=1)) < min_spacing:
            continue
        points[placed] = candidate
        placed += 1
    return points


def generate_topology(cfg: SimConfig, rng: np.random.Generator) -> Topology:
    """Draw one network layout; deterministic given the generator state."""
    cfg.require_valid()
    mbs = np.zeros(2)
    errh = _place_spaced(cfg.num_errh, cfg.cell_radius, cfg.min_errh_spacing, rng)
    sh = (_place_spaced(cfg.num_sh, cfg.cell_radius, cfg.min_sh_spacing, rng)
          if cfg.num_sh else np.empty((0, 2)))
    users = _uniform_disc(cfg.num_users, cfg.cell_radius, rng)

    d_ue = np.linalg.norm(users[:, None, :] - errh[None, :, :], axis=2)
    member_errh = d_ue <= cfg.errh_service_radius
    # nearest-eRRH fallback keeps every user servable
    nearest = np.argmin(d_ue, axis=1)
    member_errh[np.arange(cfg.num_users), nearest] = True

    if cfg.num_sh:
        d_uh = np.linalg.norm(users[:, None, :] - sh[None, :, :], axis=2)
        member_sh = d_uh <= cfg.sh_service_radius
        d_hs = np.linalg.norm(sh[:, None, :] - errh[None, :, :], axis=2)
    else:
        d_uh = np.empty((cfg.num_users, 0))
        member_sh = np.zeros((cfg.num_users, 0), dtype=bool)
        d_hs = np.empty((0, cfg.num_errh))

    return Topology(errh_pos=errh, sh_pos=sh, user_pos=users, mbs_pos=mbs,
                    member_errh=member_errh, member_sh=member_sh,
                    dist_user_errh=d_ue, dist_user_sh=d_uh, dist_sh_errh=d_hs)
