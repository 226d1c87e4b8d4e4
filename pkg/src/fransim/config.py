"""Simulation configuration: every tunable of the network, traffic, and learner."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Raised when a configuration file or value set is invalid."""


@dataclass
class SimConfig:
    """All simulation parameters for one network instance.

    Power values are watts, distances meters, rates bits/sec. The defaults
    are a desk-scale network that runs in seconds; ``configs/full_scale.yaml``
    holds the large reference setup.
    """

    # Network size
    num_errh: int = 2          # cache-equipped access nodes with fronthaul
    num_sh: int = 2            # fronthaul-less smart helpers (0 = plain F-RAN)
    num_users: int = 60
    num_rrb: int = 20          # orthogonal resource blocks, one user each
    num_segments: int = 200    # popular catalog size

    # Content and traffic
    segment_bits: float = 1e7          # 1.25 MBytes
    zipf_gamma: float = 1.0
    popular_prob: float = 0.3          # P(request is for a popular segment)

    # Caching capacity (in segments)
    cache_cap_errh: int = 20
    cache_cap_sh: int = 10

    # Radio
    p_errh_per_rrb: float = 0.007      # fixed per-RRB power at an eRRH, 7 mW
    p_sh_total: float = 0.2            # helper power budget, water-filled, 200 mW
    rrb_bandwidth: float = 180e3       # Hz per RRB
    noise_density_dbm: float = -174.0  # thermal noise density, dBm/Hz
    fronthaul_rate: float = 1e8        # bits/sec per eRRH-to-core link

    # Geometry
    cell_radius: float = 1500.0
    min_errh_spacing: float = 300.0
    min_sh_spacing: float = 150.0
    errh_service_radius: float = 800.0
    sh_service_radius: float = 600.0
    overhear_radius: float = 1500.0

    # Frame structure
    learn_iters: int = 2000            # cache-policy learning iterations per frame
    tx_slots_per_frame: int = 200
    slot_duration: float = 1.0         # seconds, for fronthaul-load accounting

    # Learner
    alpha_mu: float = 1.0              # eRRH reward scale
    alpha_nu: float = 1.0              # helper reward scale
    c_l: float = 2.0                   # weight of the hit/miss signal in rewards
    lambda_p: float = 5.0              # softmax inverse temperature
    lr_utility_exp: float = 0.6        # utility step size n**-exp
    lr_policy_exp: float = 0.85        # policy step size n**-exp, must decay faster
    nominal_sh_users: int = 4          # power split assumed when weighting helper vertices

    rng_seed: int = 0

    def noise_power_watts(self) -> float:
        """AWGN power over one RRB: density (dBm/Hz) integrated over the RRB."""
        return 10.0 ** (self.noise_density_dbm / 10.0) * 1e-3 * self.rrb_bandwidth

    def validate(self) -> list[tuple[str, str]]:
        """Return a list of (field, violation) diagnostics, empty when valid."""
        diags: list[tuple[str, str]] = []
        c = self

        def bad(field: str, msg: str) -> None:
            diags.append((field, msg))

        for field in ("num_errh", "num_users", "num_rrb", "num_segments"):
            if getattr(c, field) < 1:
                bad(field, "must be >= 1")
        for field in ("num_sh", "learn_iters", "tx_slots_per_frame"):
            if getattr(c, field) < 0:
                bad(field, "must be >= 0")
        for field in (
            "segment_bits", "p_errh_per_rrb", "p_sh_total", "rrb_bandwidth",
            "fronthaul_rate", "cell_radius", "min_errh_spacing", "min_sh_spacing",
            "errh_service_radius", "sh_service_radius", "overhear_radius",
            "slot_duration",
        ):
            if getattr(c, field) <= 0:
                bad(field, "must be > 0")
        if c.zipf_gamma < 0:
            bad("zipf_gamma", "must be >= 0")
        if not 0.0 <= c.popular_prob <= 1.0:
            bad("popular_prob", "must be in [0, 1]")
        if c.cache_cap_errh < 1 or c.cache_cap_errh > c.num_segments:
            bad("cache_cap_errh", "exceeds num_segments" if c.cache_cap_errh > c.num_segments
                else "must be >= 1")
        if c.cache_cap_sh < 1 or c.cache_cap_sh > c.num_segments:
            bad("cache_cap_sh", "exceeds num_segments" if c.cache_cap_sh > c.num_segments
                else "must be >= 1")
        if c.min_sh_spacing > c.min_errh_spacing:
            bad("min_sh_spacing", "must not exceed min_errh_spacing")
        if c.lambda_p < 0:
            bad("lambda_p", "must be >= 0")
        if c.nominal_sh_users < 1:
            bad("nominal_sh_users", "must be >= 1")
        # Step-size conditions: sums diverge, squared sums converge, and the
        # policy timescale vanishes relative to the utility timescale.
        if not 0.5 < c.lr_utility_exp <= 1.0:
            bad("lr_utility_exp", "must satisfy 0.5 < exp <= 1")
        if not 0.5 < c.lr_policy_exp <= 1.0:
            bad("lr_policy_exp", "must satisfy 0.5 < exp <= 1")
        if c.lr_policy_exp <= c.lr_utility_exp:
            bad("lr_policy_exp", "must exceed lr_utility_exp (two-timescale condition)")
        return diags

    def require_valid(self) -> "SimConfig":
        diags = self.validate()
        if diags:
            lines = "; ".join(f"{k}: {v}" for k, v in diags)
            raise ConfigError(f"invalid configuration: {lines}")
        return self

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_NAMES = {f.name for f in dataclasses.fields(SimConfig)}
_INT_FIELDS = {f.name for f in dataclasses.fields(SimConfig) if f.type == "int"}


def config_from_dict(data: dict) -> SimConfig:
    """Build a SimConfig from a plain mapping, rejecting unknown keys."""
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    coerced = {}
    for key, value in data.items():
        if key in _INT_FIELDS:
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
            coerced[key] = int(value)
        else:
            coerced[key] = float(value)
    return SimConfig(**coerced)


def load_config(path: str | Path) -> SimConfig:
    """Parse a YAML key-value file into a validated SimConfig.

    Raises ConfigError with per-key diagnostics on any violation.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse failure: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping of config keys")
    cfg = config_from_dict(raw)
    diags = cfg.validate()
    if diags:
        lines = "; ".join(f"{k}: {v}" for k, v in diags)
        raise ConfigError(f"{path}: {lines}")
    return cfg


def save_config(cfg: SimConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
