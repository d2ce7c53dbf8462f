"""Top-n ranking and offline metric tests."""

import numpy as np
import pytest
import scipy.sparse as sp

from recstudy.dataset import InteractionMatrix, TrainSplit, split_holdout
from recstudy.models import (
    EmptyValidation,
    TrainingConfig,
    evaluate,
    recommend_top_n,
    train_mf,
    train_multvae,
)
from recstudy.models.evaluation import ranked_metrics

# --- recommend_top_n -----------------------------------------------------------


def test_top_n_zero_returns_empty():
    assert recommend_top_n(np.array([1.0, 2.0]), set(), 0).items == ()


def test_top_n_hand_ordering():
    ranked = recommend_top_n(np.array([0.9, 0.1, 0.5]), {0}, 2)
    assert ranked.items == ((2, 0.5), (1, 0.1))


def test_top_n_exhausted_catalog():
    assert recommend_top_n(np.array([0.9, 0.1]), {0, 1}, 3).items == ()


def test_top_n_short_when_catalog_small():
    ranked = recommend_top_n(np.array([0.3, 0.1, 0.2]), {1}, 10)
    assert ranked.indices() == [0, 2]


def test_top_n_tie_break_ascending_index():
    ranked = recommend_top_n(np.array([0.5, 0.5, 0.5, 0.7]), set(), 4)
    assert ranked.indices() == [3, 0, 1, 2]


def test_top_n_never_returns_history():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n_items = rng.integers(3, 40)
        scores = rng.normal(size=n_items)
        history = set(rng.choice(n_items, size=rng.integers(0, n_items), replace=False).tolist())
        ranked = recommend_top_n(scores, history, int(rng.integers(0, n_items + 3)))
        assert not set(ranked.indices()) & history
        got = [s for _, s in ranked.items]
        assert got == sorted(got, reverse=True)


def test_top_n_order_invariant_under_positive_scaling():
    rng = np.random.default_rng(1)
    for _ in range(100):
        scores = rng.normal(size=25)
        history = set(rng.choice(25, size=5, replace=False).tolist())
        base = recommend_top_n(scores, history, 10).indices()
        for c in (0.5, 3.0, 1e6):
            assert recommend_top_n(c * scores, history, 10).indices() == base


# --- metrics ----------------------------------------------------------------------


def test_perfect_ranking_gives_unit_metrics():
    held = np.array([4, 7, 9])
    ranked = [4, 7, 9, 0, 1, 2]
    recall, ndcg = ranked_metrics(ranked, held, k=5)
    assert recall == 1.0 and ndcg == pytest.approx(1.0)


def test_ndcg_single_hit_position_two():
    recall, ndcg = ranked_metrics([3, 8, 1, 2], np.array([8]), k=10)
    assert recall == 1.0
    assert ndcg == pytest.approx(1.0 / np.log2(3.0))


def test_recall_counts_partial_hits():
    recall, _ = ranked_metrics([1, 2, 3, 4], np.array([2, 9, 10]), k=4)
    assert recall == pytest.approx(1.0 / 3.0)


def test_random_scores_recall_matches_chance():
    # 1 held-out among N items: expected recall@k is k/N
    rng = np.random.default_rng(13)
    n_items, k, trials = 50, 10, 2000
    hits = 0
    for _ in range(trials):
        scores = rng.normal(size=n_items)
        held = np.array([rng.integers(0, n_items)])
        ranked = recommend_top_n(scores, set(), k).indices()
        recall, _ = ranked_metrics(ranked, held, k)
        hits += recall
    p = k / n_items
    se = np.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) < 3 * se


# --- evaluate ---------------------------------------------------------------------


def two_block_matrix(rng, n_users=60, n_items=24):
    dense = np.zeros((n_users, n_items))
    half_items = n_items // 2
    for u in range(n_users):
        base = 0 if u < n_users // 2 else half_items
        items = rng.choice(np.arange(base, base + half_items), size=8, replace=False)
        dense[u, items] = 1.0
    csr = sp.csr_matrix(dense)
    return InteractionMatrix(n_users=n_users, n_items=n_items, matrix=csr, binarized=True)


def test_evaluate_both_model_kinds():
    rng = np.random.default_rng(21)
    m = two_block_matrix(rng)
    split = split_holdout(m, 0.25, 0.5, seed=3)
    mf = train_mf(split.train, TrainingConfig(d=4, als_iterations=10, rng_seed=0))
    vae = train_multvae(
        split.train,
        TrainingConfig(h=12, k=3, epochs=15, batch_size=8, learning_rate=0.1,
                       beta=0.2, beta_anneal_steps=20, rng_seed=0),
    )
    for model in (mf, vae):
        report = evaluate(model, split, k=5)
        assert 0.0 <= report.recall_at_k <= 1.0
        assert 0.0 <= report.ndcg_at_k <= 1.0
        assert report.n_eval_users == len(split.validation_users)


def test_evaluate_rejects_empty_validation():
    m = two_block_matrix(np.random.default_rng(2))
    empty = TrainSplit(train=m, validation_users=(), seed=0)
    model = train_mf(m, TrainingConfig(d=2, als_iterations=2))
    with pytest.raises(EmptyValidation):
        evaluate(model, empty, k=5)
