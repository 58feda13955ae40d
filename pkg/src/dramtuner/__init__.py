"""Trace-driven DRAM memory-controller simulator with an explainable
multi-agent SARSA autotuner."""

from .controller import (ACTION_ARITIES, ACTION_SPACE, METRIC_NAMES,
                         ControllerConfig, MemoryRequest, MetricsSnapshot,
                         SimulationState, TuningEnvironment,
                         config_from_action, simulate_partition)
from .dram import (DramTopology, EnergyParams, SystemParams, TimingParams,
                   background_energy, peak_bandwidth_bps)
from .explain import Explanation, explain_decision
from .rl import (LearnerConfig, RewardTargets, compute_reward,
                 default_reward_targets, run_episode, total_reward)

__version__ = "0.1.0"
