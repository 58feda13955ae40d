"""Multi-agent decomposed-reward SARSA tuner.

One independent agent per controller parameter. Each agent keeps a dense
Q-table over (local state, local action, reward component), where its local
state is its own component of the previously applied joint action vector.
Rewards are computed per metric as target / |target - observed| and summed
across the seven components for action selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .controller import (ACTION_ARITIES, HIGHER_IS_BETTER, METRIC_NAMES,
                         MetricsSnapshot)
from .dram import SystemParams, background_energy, peak_bandwidth_bps
from . import explain as explain_mod

NUM_COMPONENTS = len(METRIC_NAMES)

# Guards around the reward singularity at observed == target: the
# denominator is floored at 1e-9 * |target| and the reward magnitude capped
# at 1e9, which preserves the ordering of all non-degenerate comparisons.
REWARD_DENOM_FLOOR = 1e-9
REWARD_CAP = 1e9


@dataclass(frozen=True)
class RewardTargets:
    """Ideal value per metric, in canonical metric order.

    Targets must be nonzero (a zero target collapses every reward to zero).
    Direction tags are reporting metadata only; the reward formula is
    symmetric around the target.
    """

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != NUM_COMPONENTS:
            raise ValueError(f"targets: expected {NUM_COMPONENTS} values, got {len(self.values)}")
        for name, v in zip(METRIC_NAMES, self.values):
            if v == 0:
                raise ValueError(f"targets.{name}: must be nonzero")
            if not np.isfinite(v):
                raise ValueError(f"targets.{name}: must be finite")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(METRIC_NAMES, self.values))

    @staticmethod
    def direction(metric: str) -> str:
        return "HigherIsBetter" if metric in HIGHER_IS_BETTER else "LowerIsBetter"


def default_reward_targets(system: SystemParams, trace_split: int) -> RewardTargets:
    """Physically ideal per-partition values derived from the device constants.

    Latency: the minimum service path (activate, column access, burst).
    Bandwidth: the theoretical bus peak. Energy: one read per request plus
    standby power over a fully utilized bus. Power: that energy over that
    time. Switch counts target 1 and the row hit rate targets 1.0.
    """
    t = system.timing
    e = system.energy
    latency = (t.tRCD + t.tCL + t.tBURST) * e.clock_period_ps
    bandwidth = peak_bandwidth_bps(system)
    ideal_cycles = trace_split * t.tBURST
    energy = e.e_rd * trace_split + background_energy(ideal_cycles, e)
    power = energy / (ideal_cycles * e.clock_period_ps) * 1e3
    return RewardTargets((latency, power, energy, bandwidth, 1.0, 1.0, 1.0))


def compute_reward(target: float, observed: float) -> float:
    """target / |target - observed|, floored and capped (see module notes)."""
    if target == 0:
        raise ValueError("compute_reward: target must be nonzero")
    denom = abs(target - observed)
    floor = REWARD_DENOM_FLOOR * abs(target)
    if denom < floor:
        denom = floor
    r = target / denom
    if r > REWARD_CAP:
        return REWARD_CAP
    if r < -REWARD_CAP:
        return -REWARD_CAP
    return r


def reward_vector(targets: RewardTargets,
                  metrics: MetricsSnapshot) -> tuple[float, ...]:
    observed = metrics.as_tuple()
    return tuple(compute_reward(t, o) for t, o in zip(targets.values, observed))


def total_reward(rewards: Sequence[float]) -> float:
    return float(sum(rewards))


@dataclass(frozen=True)
class AgentSpec:
    """Identity of one agent: which parameter it owns, how many actions that
    parameter has, and its private seed (base seed plus its index)."""

    parameter_index: int
    action_arity: int
    seed: int

    @classmethod
    def roster(cls, base_seed: int,
               arities: Sequence[int] = ACTION_ARITIES) -> list["AgentSpec"]:
        return [cls(i, arity, base_seed + i) for i, arity in enumerate(arities)]


def new_qtable(arity: int, components: int = NUM_COMPONENTS) -> np.ndarray:
    """Zero-initialized dense table over (state, action, component)."""
    return np.zeros((arity, arity, components), dtype=np.float64)


def select_action(qtable: np.ndarray, local_state: int, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the component-summed Q values.

    With probability epsilon a uniformly random action is drawn from the
    agent's own generator; otherwise the argmax of the summed components,
    ties broken by the lowest action index.
    """
    arity = qtable.shape[1]
    if rng.random() < epsilon:
        return int(rng.integers(arity))
    summed = qtable[local_state].sum(axis=1)
    return int(np.argmax(summed))


def sarsa_update(qtable: np.ndarray, state: int, action: int, component: int,
                 reward: float, next_state: int, next_action: int,
                 alpha: float, gamma: float) -> None:
    """One on-policy temporal-difference step on a single table cell."""
    current = qtable[state, action, component]
    target = reward + gamma * qtable[next_state, next_action, component]
    qtable[state, action, component] = current + alpha * (target - current)


@dataclass(frozen=True)
class LearnerConfig:
    timesteps: int = 300
    warmup: int = 200
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_old: float = 1.0
    epsilon_new: float = 0.001
    base_seed: int = 42
    targets: RewardTargets = field(
        default_factory=lambda: default_reward_targets(SystemParams(), 30000))

    def __post_init__(self):
        if self.timesteps < 1:
            raise ValueError("learner.timesteps: must be >= 1")
        if not 0 < self.warmup <= self.timesteps:
            raise ValueError("learner.warmup: must satisfy 0 < warmup <= timesteps")
        if not 0 <= self.alpha <= 1:
            # 0 disables learning entirely; useful for inertness checks.
            raise ValueError("learner.alpha: must be in [0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("learner.gamma: must be in [0, 1]")
        for name in ("epsilon_old", "epsilon_new"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"learner.{name}: must be in [0, 1]")


@dataclass(frozen=True)
class StepRecord:
    step: int                      # 1-based
    epsilon: float
    action: tuple[int, ...]        # the joint action applied this step
    metrics: MetricsSnapshot
    rewards: tuple[float, ...]
    reward_total: float
    reward_cumulative: float       # running post-warmup sum


@dataclass
class EpisodeResult:
    qtables: list[np.ndarray]
    cumulative_reward: float
    steps: list[StepRecord]
    final_state: tuple[int, ...]
    explanations: list[tuple[int, int, explain_mod.Explanation]]

    def final_greedy_action(self) -> tuple[int, ...]:
        """Per-agent argmax at the final state; what the tuner recommends."""
        return tuple(int(np.argmax(q[s].sum(axis=1)))
                     for q, s in zip(self.qtables, self.final_state))


def run_episode(env, config: LearnerConfig, *,
                record_explanations: bool = False,
                agent_order: Sequence[int] | None = None) -> EpisodeResult:
    """Run the tuning loop for `config.timesteps` steps against `env`.

    Each step applies the current joint action (one partition of the trace),
    observes the seven metrics, computes per-metric rewards, lets every agent
    pick its next action epsilon-greedily from its own seeded generator
    (epsilon_old before the warmup threshold, epsilon_new at and beyond it,
    1-based), and applies the per-component SARSA update. The cumulative
    reward accumulates the summed reward from the warmup step onward.

    `agent_order` permutes the processing order of the independent agents;
    results are invariant to it. When `record_explanations` is set, every
    post-warmup greedy selection is explained against the agent's alternative
    actions.
    """
    arities = tuple(env.action_arities)
    n_agents = len(arities)
    order = list(range(n_agents)) if agent_order is None else list(agent_order)
    if sorted(order) != list(range(n_agents)):
        raise ValueError("agent_order must be a permutation of the agents")
    rngs = [np.random.default_rng(config.base_seed + i) for i in range(n_agents)]
    qtables = [new_qtable(k) for k in arities]

    state = [0] * n_agents
    action = [0] * n_agents
    for i in order:
        action[i] = select_action(qtables[i], state[i], config.epsilon_old, rngs[i])

    cumulative = 0.0
    steps: list[StepRecord] = []
    explanations: list[tuple[int, int, explain_mod.Explanation]] = []

    for t in range(1, config.timesteps + 1):
        metrics = env.step(tuple(action))
        rewards = reward_vector(config.targets, metrics)
        r_total = total_reward(rewards)
        if t < config.warmup:
            epsilon = config.epsilon_old
        else:
            epsilon = config.epsilon_new
            cumulative += r_total

        next_action = [0] * n_agents
        for i in order:
            rng = rngs[i]
            if rng.random() < epsilon:
                next_action[i] = int(rng.integers(arities[i]))
            else:
                summed = qtables[i][state[i]].sum(axis=1)
                choice = int(np.argmax(summed))
                next_action[i] = choice
                if record_explanations and t >= config.warmup:
                    alts = [a for a in range(arities[i]) if a != choice]
                    for expl in explain_mod.explain_decision(
                            qtables[i], state[i], choice, alts):
                        explanations.append((t, i, expl))

        new_state = list(action)
        for i in order:
            for j in range(NUM_COMPONENTS):
                sarsa_update(qtables[i], state[i], action[i], j, rewards[j],
                             new_state[i], next_action[i],
                             config.alpha, config.gamma)

        steps.append(StepRecord(t, epsilon, tuple(action), metrics, rewards,
                                r_total, cumulative))
        state = new_state
        action = next_action

    return EpisodeResult(qtables, cumulative, steps, tuple(state), explanations)


def decomposed_matches_scalar(trajectory: Sequence[tuple], arity: int,
                              alpha: float, gamma: float,
                              rel_tol: float = 1e-9) -> bool:
    """Check that component-summed decomposed SARSA equals scalar SARSA.

    `trajectory` holds (state, action, reward_vector, next_state, next_action)
    tuples. Both learners are replayed from zero tables over the same
    transitions; by linearity of the update the sum over components of the
    decomposed tables must match the scalar table trained on the summed
    reward, within `rel_tol` relative error.
    """
    decomposed = new_qtable(arity)
    scalar = np.zeros((arity, arity), dtype=np.float64)
    for s, a, rvec, s2, a2 in trajectory:
        for j, r in enumerate(rvec):
            sarsa_update(decomposed, s, a, j, r, s2, a2, alpha, gamma)
        scalar[s, a] += alpha * (sum(rvec) + gamma * scalar[s2, a2] - scalar[s, a])
    summed = decomposed.sum(axis=2)
    scale = np.maximum(np.abs(scalar), 1.0)
    return bool(np.all(np.abs(summed - scalar) <= rel_tol * scale))


def save_qtables(path: str | Path, qtables: Sequence[np.ndarray]) -> None:
    """Flat text format: a header with arities and component count, then each
    table row-major (state, then action, then component), one state per line."""
    lines = []
    lines.append(f"agents {len(qtables)}")
    lines.append(f"components {qtables[0].shape[2] if qtables else NUM_COMPONENTS}")
    lines.append("arities " + " ".join(str(q.shape[0]) for q in qtables))
    for i, q in enumerate(qtables):
        lines.append(f"table {i}")
        for s in range(q.shape[0]):
            lines.append(" ".join(repr(float(v)) for v in q[s].reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_qtables(path: str | Path) -> list[np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    try:
        header = {line.split()[0]: line for line in text[:3]}
        n_agents = int(header["agents"].split()[1])
        components = int(header["components"].split()[1])
        arities = [int(x) for x in header["arities"].split()[1:]]
    except (KeyError, IndexError, ValueError) as exc:
        raise ValueError(f"{path}: corrupt q-table header ({exc})") from None
    if len(arities) != n_agents:
        raise ValueError(f"{path}: arity count does not match agent count")
    tables = []
    pos = 3
    for i, arity in enumerate(arities):
        if pos >= len(text) or text[pos].strip() != f"table {i}":
            raise ValueError(f"{path}: expected 'table {i}' at line {pos + 1}")
        pos += 1
        rows = []
        for _ in range(arity):
            values = [float(x) for x in text[pos].split()]
            if len(values) != arity * components:
                raise ValueError(f"{path}: wrong value count at line {pos + 1}")
            rows.append(values)
            pos += 1
        tables.append(np.array(rows, dtype=np.float64).reshape(arity, arity, components))
    return tables
