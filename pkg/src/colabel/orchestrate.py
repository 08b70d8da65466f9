"""Sampling, round planning, redundant assignment and holdout carving.

All randomized operations take an explicit seed and are deterministic given
the seed and input order; nothing here touches wall-clock time or global RNG
state.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, TypeVar

from .errors import InfeasibleError, ValidationError

T = TypeVar("T")


def sample_pool(corpus: Sequence[T], n: int, seed: int) -> list[T]:
    """Uniform sample of ``n`` elements without replacement."""
    if n > len(corpus):
        raise InfeasibleError(f"cannot sample {n} from a corpus of {len(corpus)}")
    if n < 0:
        raise ValidationError("sample size must be non-negative")
    return random.Random(seed).sample(list(corpus), n)


@dataclass(frozen=True)
class RoundPlan:
    """Escalating batch sizes for a campaign's annotation rounds."""

    round_sizes: tuple[int, ...]
    growth_factor: float
    total: int

    def __post_init__(self):
        if sum(self.round_sizes) != self.total:
            raise ValidationError("round sizes must sum to the total")


def plan_rounds(total: int, n_rounds: int, growth_factor: float) -> RoundPlan:
    """Split ``total`` into ``n_rounds`` sizes proportional to ``growth_factor**i``.

    Each term is rounded to the nearest integer and any leftover lands on the
    final (largest) round; every round keeps at least one item and the result
    is non-decreasing for growth factors >= 1.
    """
    if n_rounds < 1:
        raise InfeasibleError("need at least one round")
    if total < n_rounds:
        raise InfeasibleError(f"cannot spread {total} items over {n_rounds} rounds")
    if growth_factor < 1.0:
        raise ValidationError("growth factor must be >= 1")
    weights = [growth_factor**i for i in range(n_rounds)]
    scale = total / sum(weights)
    sizes = [int(math.floor(w * scale + 0.5)) for w in weights]
    sizes[-1] += total - sum(sizes)
    for i in range(n_rounds):
        while sizes[i] < 1:
            donor = max(range(n_rounds), key=lambda j: sizes[j])
            sizes[donor] -= 1
            sizes[i] += 1
    sizes.sort()
    return RoundPlan(round_sizes=tuple(sizes), growth_factor=growth_factor, total=total)


@dataclass(frozen=True)
class Assignment:
    """Which annotators label which items in one round."""

    round_id: Optional[str]
    items: Mapping[str, tuple[str, ...]]

    def load_per_annotator(self) -> dict[str, int]:
        loads: dict[str, int] = {}
        for annotators in self.items.values():
            for a in annotators:
                loads[a] = loads.get(a, 0) + 1
        return loads


def assign_batch(
    item_ids: Sequence[str],
    annotator_ids: Sequence[str],
    k: int,
    seed: int,
    round_id: Optional[str] = None,
) -> Assignment:
    """Assign every item to exactly ``k`` distinct annotators.

    A seeded shuffle fixes the annotator rotation, then consecutive slots are
    dealt round-robin, which keeps loads within one of each other.
    """
    annotators = list(annotator_ids)
    if len(set(annotators)) != len(annotators):
        raise ValidationError("annotator ids must be unique")
    if k < 1:
        raise ValidationError("k must be >= 1")
    if len(annotators) < k:
        raise InfeasibleError(
            f"cannot assign each item to {k} distinct annotators out of {len(annotators)}"
        )
    rotation = annotators[:]
    random.Random(seed).shuffle(rotation)
    n = len(rotation)
    assignments: dict[str, tuple[str, ...]] = {}
    slot = 0
    for item_id in item_ids:
        assignments[item_id] = tuple(rotation[(slot + t) % n] for t in range(k))
        slot += k
    return Assignment(round_id=round_id, items=assignments)


def carve_holdout(labelled_ids: Sequence[str], fraction: float, seed: int) -> set[str]:
    """Reserve ``round(fraction * N)`` labelled items as the gold holdout."""
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError("holdout fraction must lie in [0, 1]")
    ids = sorted(labelled_ids)
    size = int(math.floor(fraction * len(ids) + 0.5))
    return set(random.Random(seed).sample(ids, size))
