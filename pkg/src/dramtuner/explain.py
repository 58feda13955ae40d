"""Reward-decomposition explanations for agent decisions.

Given one agent's Q-table, a state and a pair of actions, the component-wise
Q difference says which reward components favor which action. The minimal
sufficient explanation is the smallest set of favorable components whose
combined advantage outweighs the total disadvantage; the necessity threshold
and the opposing minimal set bound how robust that justification is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .controller import METRIC_NAMES


class NotPreferredError(ValueError):
    """The nominated action does not actually beat the alternative."""


class NotGreedyError(ValueError):
    """Explanations are only generated for actions that are the argmax."""


@dataclass(frozen=True)
class DeltaVector:
    """Per-component expected-return differences between two actions."""

    deltas: tuple[float, ...]
    component_names: tuple[str, ...] = METRIC_NAMES

    def __post_init__(self):
        if len(self.deltas) != len(self.component_names):
            raise ValueError("delta length does not match component names")


@dataclass(frozen=True)
class Explanation:
    """Why `chosen` is preferred over `alternative` in `state`.

    For a strict preference, `msx_plus` is the minimal sufficient component
    set, `necessity_v` its necessity threshold and `msx_minus` the minimal
    opposing set exceeding it. For an exact tie all three are None and the
    rationale says there is no preference.
    """

    state: int
    chosen: int
    alternative: int
    delta: DeltaVector
    disadvantage: float
    msx_plus: tuple[int, ...] | None
    necessity_v: float | None
    msx_minus: tuple[int, ...] | None
    rationale: str

    @property
    def is_tie(self) -> bool:
        return self.msx_plus is None


def rdx(qtable: np.ndarray, state: int, action_a: int, action_b: int,
        component_names: Sequence[str] = METRIC_NAMES) -> DeltaVector:
    """Component-wise Q(state, a) - Q(state, b)."""
    diff = qtable[state, action_a, :] - qtable[state, action_b, :]
    return DeltaVector(tuple(float(x) for x in diff), tuple(component_names))


def disadvantage(delta: DeltaVector) -> float:
    """Total magnitude of the negatively contributing components."""
    return -sum(d for d in delta.deltas if d < 0)


def msx_plus(delta: DeltaVector) -> tuple[int, ...]:
    """Smallest set of positive components whose sum exceeds the disadvantage.

    Built greedily in descending delta order (component index breaks ties),
    which attains minimal cardinality because each prefix carries the largest
    possible sum of its size. Raises NotPreferredError when even all positive
    components cannot exceed the disadvantage.
    """
    d = disadvantage(delta)
    positives = sorted(((dv, i) for i, dv in enumerate(delta.deltas) if dv > 0),
                       key=lambda x: (-x[0], x[1]))
    total = 0.0
    chosen: list[int] = []
    for dv, i in positives:
        chosen.append(i)
        total += dv
        if total > d:
            return tuple(chosen)
    raise NotPreferredError("action is not preferred: advantages do not exceed the disadvantage")


def necessity_v(msx: Sequence[int], delta: DeltaVector) -> float:
    """Sum of the explanation set minus its smallest member."""
    if not msx:
        raise ValueError("necessity_v: empty explanation set")
    values = [delta.deltas[i] for i in msx]
    return sum(values) - min(values)


def msx_minus(delta: DeltaVector, v: float) -> tuple[int, ...]:
    """Smallest set of negative components whose magnitude sum exceeds `v`;
    empty when no subset qualifies."""
    negatives = sorted(((-dv, i) for i, dv in enumerate(delta.deltas) if dv < 0),
                       key=lambda x: (-x[0], x[1]))
    total = 0.0
    chosen: list[int] = []
    for mag, i in negatives:
        chosen.append(i)
        total += mag
        if total > v:
            return tuple(chosen)
    return ()


def _names(delta: DeltaVector, indices: Sequence[int]) -> str:
    return ", ".join(delta.component_names[i] for i in indices)


def _render(delta: DeltaVector, chosen_label: str, alt_label: str,
            plus: tuple[int, ...]) -> str:
    negatives = [i for i, d in enumerate(delta.deltas) if d < 0]
    text = (f"the improvement in {_names(delta, plus)} alone justifies "
            f"choosing {chosen_label} over {alt_label}")
    if negatives:
        text += f", despite losses in {_names(delta, negatives)}"
    return text + "."


def explain_decision(qtable: np.ndarray, state: int, chosen: int,
                     alternatives: Sequence[int],
                     component_names: Sequence[str] = METRIC_NAMES,
                     action_labels: Sequence[str] | None = None
                     ) -> list[Explanation]:
    """One explanation per alternative for the greedy action at `state`.

    Refuses (NotGreedyError) when `chosen` is not an argmax of the summed
    components: explanations must describe decisions the policy would
    actually take. Exact ties yield tie records with no explanation sets.
    """
    summed = qtable[state].sum(axis=1)
    if summed[chosen] < summed.max():
        raise NotGreedyError(f"action {chosen} is not greedy in state {state}")

    def label(a: int) -> str:
        return action_labels[a] if action_labels is not None else f"action {a}"

    out: list[Explanation] = []
    for alt in alternatives:
        if alt == chosen:
            continue
        delta = rdx(qtable, state, chosen, alt, component_names)
        d = disadvantage(delta)
        try:
            plus = msx_plus(delta)
        except NotPreferredError:
            out.append(Explanation(
                state, chosen, alt, delta, d, None, None, None,
                f"no preference between {label(chosen)} and {label(alt)}: "
                f"expected returns are equal."))
            continue
        v = necessity_v(plus, delta)
        minus = msx_minus(delta, v)
        out.append(Explanation(state, chosen, alt, delta, d, plus, v, minus,
                               _render(delta, label(chosen), label(alt), plus)))
    return out
