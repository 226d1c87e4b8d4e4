"""Monte Carlo simulator of a smart-helper-aided fog radio access network:
conflict-graph user scheduling, water-filled helper power, and multi-agent
actor-critic edge caching, with baseline schemes and a relay network variant."""

from .cache import CacheState, select_within_cap, sh_eligible
from .channel import ChannelState, path_loss_db, rate_bps, sample_channel, sample_gain
from .config import ConfigError, SimConfig, load_config, save_config
from .harness import Experiment, build_preset, run_experiment, run_single
from .metrics import RunSummary, aggregate_runs, average_delay, user_delay
from .rl import (AgentBank, LearnSchedule, compute_reward, run_frame,
                 softmax_policy, update_agent)
from .scheduler import (ConflictGraph, Schedule, build_graph, greedy_mwis,
                        schedule_slot, water_fill)
from .topology import Topology, generate_topology
from .traffic import UNPOPULAR, Catalog, RequestBatch, build_catalog, draw_requests

__version__ = "0.1.0"
