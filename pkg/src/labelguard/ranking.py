"""Ordering of target labels by how plausible a misclassification towards them is."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .interval import Interval


@dataclass(frozen=True)
class RankedTargets:
    ordered: tuple[tuple[int, float], ...]
    pruned: tuple[int, ...]
    original: int
    # scores of the pruned labels, aligned with ``pruned``
    pruned_scores: tuple[float, ...] = ()

    @property
    def labels(self) -> list[int]:
        return [label for label, _ in self.ordered]

    def full_order(self) -> list[int]:
        """Every non-original label by descending score, pruned ones included."""
        pruned = dict(zip(self.pruned, self.pruned_scores))
        return [label for label, _ in _sort({**dict(self.ordered), **pruned})]


def _check(n: int, original: int) -> None:
    if n < 2:
        raise ValueError("ranking needs at least two classes")
    if not 0 <= original < n:
        raise ValueError(f"original label {original} out of range for {n} classes")


def _sort(scores: dict[int, float]) -> tuple[tuple[int, float], ...]:
    return tuple(sorted(scores.items(), key=lambda item: (-item[1], item[0])))


def rank_targets(bounds: Sequence[Interval], original: int) -> RankedTargets:
    """Sort labels by output upper bound; drop those whose upper bound is below the
    original label's lower bound, since they can never win on the box."""
    _check(len(bounds), original)
    floor = bounds[original].lo
    scores = {}
    pruned = []
    for j, b in enumerate(bounds):
        if j == original:
            continue
        if b.hi < floor:
            pruned.append(j)
        else:
            scores[j] = b.hi
    return RankedTargets(
        _sort(scores), tuple(pruned), original, tuple(bounds[j].hi for j in pruned)
    )


def naive_rank(out, original: int) -> RankedTargets:
    """Baseline: sort by the concrete outputs at the unperturbed input; nothing is pruned."""
    out = np.asarray(out, dtype=float)
    _check(out.size, original)
    scores = {j: float(v) for j, v in enumerate(out) if j != original}
    return RankedTargets(_sort(scores), (), original)


def fixed_rank(n_labels: int, original: int) -> RankedTargets:
    """Ascending label order with no pruning, i.e. what an unguided verifier does."""
    _check(n_labels, original)
    return RankedTargets(tuple((j, 0.0) for j in range(n_labels) if j != original), (), original)
