"""Top-n list generation from raw item scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class RankedList:
    """Ordered (item index, score) pairs, scores non-increasing."""

    items: tuple[tuple[int, float], ...]
    n: int

    def indices(self) -> list[int]:
        return [i for i, _ in self.items]


def recommend_top_n(scores: np.ndarray, history: Iterable[int], n: int) -> RankedList:
    """Highest-scored items with the user's history excluded.

    Ties break by ascending item index so results are deterministic.
    Returns fewer than n items when the catalog is exhausted.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    scores = np.asarray(scores, dtype=np.float64)
    history_set = set(int(i) for i in history)
    if n == 0:
        return RankedList(items=(), n=0)
    keep = np.array([i for i in range(len(scores)) if i not in history_set], dtype=np.int64)
    if len(keep) == 0:
        return RankedList(items=(), n=n)
    # lexsort: primary key is the last one (negated score), then index ascending
    order = np.lexsort((keep, -scores[keep]))[:n]
    chosen = keep[order]
    return RankedList(items=tuple((int(i), float(scores[i])) for i in chosen), n=n)
