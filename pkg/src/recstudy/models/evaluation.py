"""Offline sanity metrics: recall@k and NDCG@k on a strong-generalization split."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..dataset import TrainSplit
from .mf import MfModel, mf_fold_in, mf_scores
from .multvae import MultVaeModel, multvae_scores


class EmptyValidation(Exception):
    """The split has no usable validation users."""


@dataclass(frozen=True)
class EvalReport:
    recall_at_k: float
    ndcg_at_k: float
    k: int
    n_eval_users: int


def score_validation_user(model: Union[MfModel, MultVaeModel], input_items: np.ndarray) -> np.ndarray:
    """Scores from input items only: fold-in for MF, plain forward for the VAE."""
    if isinstance(model, MfModel):
        factor = mf_fold_in(model, input_items, np.ones(len(input_items)))
        return mf_scores(model, factor)
    x = np.zeros(model.n_items)
    x[np.asarray(input_items, dtype=np.int64)] = 1.0
    return multvae_scores(model, x)


def ranked_metrics(ranked_indices: list[int], held_out: np.ndarray, k: int) -> tuple[float, float]:
    """(recall@k, ndcg@k) for one user given an already-ranked candidate list."""
    held = set(int(i) for i in held_out)
    top = ranked_indices[:k]
    hits = [rank for rank, item in enumerate(top, start=1) if item in held]
    denom = min(k, len(held))
    recall = len(hits) / denom
    dcg = sum(1.0 / np.log2(rank + 1) for rank in hits)
    idcg = sum(1.0 / np.log2(rank + 1) for rank in range(1, denom + 1))
    return recall, dcg / idcg


def evaluate(model: Union[MfModel, MultVaeModel], split: TrainSplit, k: int) -> EvalReport:
    """Average recall@k and NDCG@k over the split's validation users.

    Each user is scored from their input items alone, the input items are
    excluded from the ranking, and the held-out items are the targets.
    """
    from .ranking import recommend_top_n

    if not split.validation_users:
        raise EmptyValidation("no validation users in split")
    recalls, ndcgs = [], []
    for inputs, held in split.validation_users:
        scores = score_validation_user(model, inputs)
        ranked = recommend_top_n(scores, inputs, k)
        recall, ndcg = ranked_metrics(ranked.indices(), held, k)
        recalls.append(recall)
        ndcgs.append(ndcg)
    return EvalReport(
        recall_at_k=float(np.mean(recalls)),
        ndcg_at_k=float(np.mean(ndcgs)),
        k=k,
        n_eval_users=len(recalls),
    )
