"""Wireless channel model: path loss, shadowed/faded gains, Shannon rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .topology import Topology

SHADOWING_STD_DB = 4.0
LOG2 = np.log(2.0)


def path_loss_db(distance_m):
    """128.1 + 37.6 log10(d[km]) urban macro path loss."""
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0):
        raise ValueError("distance must be positive")
    return 128.1 + 37.6 * np.log10(distance_m / 1000.0)


def sample_gain(distance_m, rng: np.random.Generator, size=None):
    """Linear power gain: path loss, log-normal shadowing (4 dB), and the
    squared magnitude of unit-variance Rayleigh fading (exponential, mean 1)."""
    pl = path_loss_db(distance_m)
    shape = np.broadcast_shapes(pl.shape, size or ())
    shadow_db = rng.normal(0.0, SHADOWING_STD_DB, shape)
    fading = rng.exponential(1.0, shape)
    return 10.0 ** (-(pl + shadow_db) / 10.0) * fading


def rate_bps(gain, power_watts, cfg: SimConfig):
    """Shannon rate of one RRB: W log2(1 + g p / N) in bits/sec."""
    snr = np.asarray(gain) * np.asarray(power_watts) / cfg.noise_power_watts()
    return cfg.rrb_bandwidth * np.log1p(snr) / LOG2


@dataclass
class ChannelState:
    """Per-slot gain tensors; resampled every slot, constant within one.

    gain_errh_sh is only populated for helper-relay runs, where the first
    hop of a two-hop delivery needs eRRH-to-helper gains.
    """

    gain_errh: np.ndarray               # (U, R, S)
    gain_sh: np.ndarray                 # (U, R, H)
    slot_index: int
    gain_errh_sh: np.ndarray | None = None  # (H, R, S)


def sample_channel(topo: Topology, cfg: SimConfig, rng: np.random.Generator,
                   slot_index: int = 0, with_errh_sh: bool = False) -> ChannelState:
    """Draw all gains for one slot. Every (link, RRB) entry fades independently."""
    R = cfg.num_rrb
    g_errh = sample_gain(topo.dist_user_errh[:, None, :], rng,
                         (cfg.num_users, R, cfg.num_errh))
    if cfg.num_sh:
        g_sh = sample_gain(topo.dist_user_sh[:, None, :], rng,
                           (cfg.num_users, R, cfg.num_sh))
    else:
        g_sh = np.empty((cfg.num_users, R, 0))
    g_es = None
    if with_errh_sh and cfg.num_sh:
        d_hs = np.linalg.norm(topo.sh_pos[:, None, :] - topo.errh_pos[None, :, :], axis=2)
        d_hs = np.maximum(d_hs, 1.0)  # co-located draw guard
        g_es = sample_gain(d_hs[:, None, :], rng, (cfg.num_sh, R, cfg.num_errh))
    return ChannelState(gain_errh=g_errh, gain_sh=g_sh, slot_index=slot_index,
                        gain_errh_sh=g_es)
