"""Implicit-feedback matrix factorization trained with alternating least squares.

Listening counts are implicit signals: preference p_ui = 1 wherever a count
exists, confidence c_ui = 1 + alpha * count.  Each ALS half-step solves the
regularized normal equations exactly, so the weighted objective never
increases.  Every iteration ends on the user half-step, which makes fold-in
(the same solve against frozen item factors) reproduce the trained user
factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..dataset import InteractionMatrix
from .common import SingularSystem, TrainingConfig, quantize32


@dataclass
class MfModel:
    user_factors: np.ndarray  # (n_users, d)
    item_factors: np.ndarray  # (n_items, d)
    d: int
    regularization: float
    confidence_alpha: float
    item_catalog: Optional[tuple[tuple[str, str], ...]] = None  # (artist, title) per item

    @property
    def n_users(self) -> int:
        return self.user_factors.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_factors.shape[0]


def _solve_factor(
    other: np.ndarray,
    gram_reg: np.ndarray,
    cols: np.ndarray,
    counts: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """Solve one row's normal equations: (Y'CY + lam*I) x = Y'Cp."""
    if len(cols) == 0:
        return np.zeros(other.shape[1])
    m = other[cols]
    conf_extra = alpha * counts  # c - 1 on the observed cells
    a = gram_reg + (m.T * conf_extra) @ m
    b = m.T @ (1.0 + conf_extra)
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:  # lam > 0 makes this unreachable
        raise SingularSystem(str(exc)) from exc


def _half_step(mat: sp.csr_matrix, other: np.ndarray, lam: float, alpha: float) -> np.ndarray:
    gram_reg = other.T @ other + lam * np.eye(other.shape[1])
    out = np.zeros((mat.shape[0], other.shape[1]))
    for i in range(mat.shape[0]):
        lo, hi = mat.indptr[i], mat.indptr[i + 1]
        out[i] = _solve_factor(other, gram_reg, mat.indices[lo:hi], mat.data[lo:hi], alpha)
    return out


def mf_objective(mat: sp.csr_matrix, x: np.ndarray, y: np.ndarray, lam: float, alpha: float) -> float:
    """Weighted regularized reconstruction objective over ALL cells.

    Unobserved cells contribute 1 * (0 - xy)^2; observed cells
    (1 + alpha*count) * (1 - xy)^2.
    """
    total = 0.0
    for u in range(mat.shape[0]):
        s = y @ x[u]
        total += float(s @ s)  # every cell as if unobserved
        lo, hi = mat.indptr[u], mat.indptr[u + 1]
        cols, counts = mat.indices[lo:hi], mat.data[lo:hi]
        s_obs = s[cols]
        total += float(np.sum((1.0 + alpha * counts) * (1.0 - s_obs) ** 2 - s_obs**2))
    total += lam * (float(np.sum(x * x)) + float(np.sum(y * y)))
    return total


def train_mf(
    m: InteractionMatrix,
    cfg: TrainingConfig,
    iteration_callback: Callable[[int, float], None] | None = None,
) -> MfModel:
    """Alternating least squares; deterministic for a fixed seed.

    The seed only drives factor initialization (uniform in [-0.01, 0.01]).
    When a callback is given it receives (iteration, objective) once per
    full iteration; the objective is skipped otherwise since it costs a
    dense pass.
    """
    if m.n_users == 0 or m.n_items == 0:
        raise ValueError("cannot train on an empty matrix")
    rng = np.random.default_rng(cfg.rng_seed)
    x = rng.uniform(-0.01, 0.01, size=(m.n_users, cfg.d))
    y = rng.uniform(-0.01, 0.01, size=(m.n_items, cfg.d))
    mat = m.matrix
    mat_t = mat.T.tocsr()
    lam, alpha = cfg.regularization, cfg.confidence_alpha
    for it in range(cfg.als_iterations):
        y = _half_step(mat_t, x, lam, alpha)
        x = _half_step(mat, y, lam, alpha)
        if iteration_callback is not None:
            iteration_callback(it, mf_objective(mat, x, y, lam, alpha))
    # Quantize item factors to float32 values, then redo the user half-step
    # against exactly what fold-in (and a deserialized model) will see.
    y = quantize32(y)
    x = quantize32(_half_step(mat, y, lam, alpha))
    return MfModel(
        user_factors=x,
        item_factors=y,
        d=cfg.d,
        regularization=lam,
        confidence_alpha=alpha,
    )


def mf_fold_in(model: MfModel, item_indices: Sequence[int], counts: Sequence[float]) -> np.ndarray:
    """Factor for a user unseen at training time.

    Solves the regularized ALS user step against the trained, frozen item
    factors; the zero vector folds in to the zero factor.
    """
    idx = np.asarray(item_indices, dtype=np.int64)
    cnt = np.asarray(counts, dtype=np.float64)
    if idx.shape != cnt.shape:
        raise ValueError("item_indices and counts must have equal length")
    if len(idx) and (idx.min() < 0 or idx.max() >= model.n_items):
        raise ValueError("item index out of range")
    y = model.item_factors
    gram_reg = y.T @ y + model.regularization * np.eye(model.d)
    return _solve_factor(y, gram_reg, idx, cnt, model.confidence_alpha)


def mf_scores(model: MfModel, user_factor: np.ndarray) -> np.ndarray:
    """Scores for every item given a user factor."""
    return model.item_factors @ user_factor
