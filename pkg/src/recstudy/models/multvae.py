"""Multinomial variational autoencoder over user item vectors.

Everything is plain numpy with explicit backpropagation: encoder
[n_items -> h -> 2k] (k means, k log-variances), decoder [k -> h -> n_items],
tanh activations.  Loss is the negated ELBO: multinomial reconstruction plus
a beta-weighted KL term.  Training is mini-batch SGD on CPU only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..dataset import InteractionMatrix
from .common import NonFiniteLoss, TrainingConfig, quantize32

PARAM_NAMES = ("w_enc1", "b_enc1", "w_enc2", "b_enc2", "w_dec1", "b_dec1", "w_dec2", "b_dec2")


@dataclass
class MultVaeModel:
    w_enc1: np.ndarray  # (n_items, h)
    b_enc1: np.ndarray  # (h,)
    w_enc2: np.ndarray  # (h, 2k)
    b_enc2: np.ndarray  # (2k,)
    w_dec1: np.ndarray  # (k, h)
    b_dec1: np.ndarray  # (h,)
    w_dec2: np.ndarray  # (h, n_items)
    b_dec2: np.ndarray  # (n_items,)
    beta: float
    item_catalog: Optional[tuple[tuple[str, str], ...]] = None

    @property
    def n_items(self) -> int:
        return self.w_enc1.shape[0]

    @property
    def h(self) -> int:
        return self.w_enc1.shape[1]

    @property
    def k(self) -> int:
        return self.w_enc2.shape[1] // 2

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def init_random(cls, n_items: int, h: int, k: int, beta: float, rng: np.random.Generator) -> "MultVaeModel":
        def layer(fan_in, fan_out):
            scale = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-scale, scale, size=(fan_in, fan_out))

        return cls(
            w_enc1=layer(n_items, h),
            b_enc1=np.zeros(h),
            w_enc2=layer(h, 2 * k),
            b_enc2=np.zeros(2 * k),
            w_dec1=layer(k, h),
            b_dec1=np.zeros(h),
            w_dec2=layer(h, n_items),
            b_dec2=np.zeros(n_items),
            beta=beta,
        )


def _l2_normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0  # zero vectors pass through as zeros
    return x / norms


def _forward_ctx(
    model: MultVaeModel,
    x: np.ndarray,
    sample: bool,
    rng: np.random.Generator | None,
    eps: np.ndarray | None = None,
) -> dict:
    """Forward pass keeping every intermediate needed for backprop."""
    x_norm = _l2_normalize_rows(x)
    h1 = np.tanh(x_norm @ model.w_enc1 + model.b_enc1)
    enc_out = h1 @ model.w_enc2 + model.b_enc2
    k = model.k
    mu, logvar = enc_out[:, :k], enc_out[:, k:]
    if sample:
        if eps is None:
            if rng is None:
                raise ValueError("sampling requires an rng or explicit eps")
            eps = rng.standard_normal(mu.shape)
        z = mu + np.exp(0.5 * logvar) * eps
    else:
        eps = None
        z = mu
    h2 = np.tanh(z @ model.w_dec1 + model.b_dec1)
    logits = h2 @ model.w_dec2 + model.b_dec2
    return {
        "x": x, "x_norm": x_norm, "h1": h1, "mu": mu, "logvar": logvar,
        "eps": eps, "z": z, "h2": h2, "logits": logits,
    }


def multvae_forward(
    model: MultVaeModel,
    x: np.ndarray,
    sample: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Logits, latent means and log-variances for one user vector or a batch.

    Deterministic when sample is False (z = mu).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    ctx = _forward_ctx(model, np.atleast_2d(x), sample, rng)
    logits, mu, logvar = ctx["logits"], ctx["mu"], ctx["logvar"]
    if single:
        return logits[0], mu[0], logvar[0]
    return logits, mu, logvar


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def elbo_loss(
    logits: np.ndarray,
    x: np.ndarray,
    mu: np.ndarray,
    logvar: np.ndarray,
    beta: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Negated ELBO and its gradients w.r.t. logits, mu and logvar.

    loss = -sum_i x_i * log softmax(logits)_i
           + beta * 0.5 * sum_j (exp(logvar_j) + mu_j^2 - 1 - logvar_j)

    For a batch the loss is the mean over rows (gradients scaled to match).
    """
    single = np.asarray(logits).ndim == 1
    logits, x = np.atleast_2d(logits), np.atleast_2d(x)
    mu, logvar = np.atleast_2d(mu), np.atleast_2d(logvar)
    if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(logvar))):
        raise NonFiniteLoss("non-finite value encountered in loss inputs")
    n = logits.shape[0]
    log_probs = _log_softmax(logits)
    recon = -np.sum(x * log_probs, axis=1)
    kl = 0.5 * np.sum(np.exp(logvar) + mu**2 - 1.0 - logvar, axis=1)
    loss = float(np.mean(recon + beta * kl))
    if not np.isfinite(loss):
        raise NonFiniteLoss("loss is not finite")
    softmax = np.exp(log_probs)
    d_logits = (softmax * x.sum(axis=1, keepdims=True) - x) / n
    d_mu = beta * mu / n
    d_logvar = beta * 0.5 * (np.exp(logvar) - 1.0) / n
    if single:
        d_logits, d_mu, d_logvar = d_logits[0], d_mu[0], d_logvar[0]
    return loss, {"logits": d_logits, "mu": d_mu, "logvar": d_logvar}


def loss_and_param_grads(
    model: MultVaeModel,
    x: np.ndarray,
    beta: float,
    sample: bool = False,
    rng: np.random.Generator | None = None,
    eps: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss plus explicit-backprop gradients for every parameter tensor."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    ctx = _forward_ctx(model, x, sample, rng, eps)
    loss, d = elbo_loss(ctx["logits"], x, ctx["mu"], ctx["logvar"], beta)
    d_logits = np.atleast_2d(d["logits"])
    h1, h2, z = ctx["h1"], ctx["h2"], ctx["z"]

    grads: dict[str, np.ndarray] = {}
    grads["w_dec2"] = h2.T @ d_logits
    grads["b_dec2"] = d_logits.sum(axis=0)
    d_h2 = d_logits @ model.w_dec2.T
    d_h2_pre = d_h2 * (1.0 - h2**2)
    grads["w_dec1"] = z.T @ d_h2_pre
    grads["b_dec1"] = d_h2_pre.sum(axis=0)
    d_z = d_h2_pre @ model.w_dec1.T

    d_mu = d_z + np.atleast_2d(d["mu"])
    d_logvar = np.atleast_2d(d["logvar"]).copy()
    if ctx["eps"] is not None:  # reparametrization: z = mu + exp(logvar/2) * eps
        d_logvar += d_z * ctx["eps"] * 0.5 * np.exp(0.5 * ctx["logvar"])
    d_enc_out = np.concatenate([d_mu, d_logvar], axis=1)
    grads["w_enc2"] = h1.T @ d_enc_out
    grads["b_enc2"] = d_enc_out.sum(axis=0)
    d_h1 = d_enc_out @ model.w_enc2.T
    d_h1_pre = d_h1 * (1.0 - h1**2)
    grads["w_enc1"] = ctx["x_norm"].T @ d_h1_pre
    grads["b_enc1"] = d_h1_pre.sum(axis=0)
    return loss, grads


def train_multvae(
    m: InteractionMatrix,
    cfg: TrainingConfig,
    epoch_callback: Callable[[int, float], None] | None = None,
) -> MultVaeModel:
    """Mini-batch SGD with a fixed learning rate; deterministic given the seed.

    beta is annealed linearly from 0 to cfg.beta over beta_anneal_steps
    gradient steps.  CPU only by construction.
    """
    if not m.binarized:
        raise ValueError("train_multvae expects a binarized matrix")
    if m.n_users == 0 or m.n_items == 0:
        raise ValueError("cannot train on an empty matrix")
    rng = np.random.default_rng(cfg.rng_seed)
    model = MultVaeModel.init_random(m.n_items, cfg.h, cfg.k, cfg.beta, rng)
    dense = np.asarray(m.matrix.todense(), dtype=np.float64)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(m.n_users)
        batch_losses = []
        for start in range(0, m.n_users, cfg.batch_size):
            batch = dense[order[start : start + cfg.batch_size]]
            anneal = min(1.0, step / cfg.beta_anneal_steps) if cfg.beta_anneal_steps > 0 else 1.0
            beta_t = cfg.beta * anneal
            try:
                loss, grads = loss_and_param_grads(model, batch, beta_t, sample=True, rng=rng)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                ) from exc
            for name, grad in grads.items():
                getattr(model, name)[...] -= cfg.learning_rate * grad
            batch_losses.append(loss)
            step += 1
        if epoch_callback is not None:
            epoch_callback(epoch, float(np.mean(batch_losses)))
    for name in PARAM_NAMES:
        setattr(model, name, quantize32(getattr(model, name)))
    return model


def multvae_scores(model: MultVaeModel, x: np.ndarray) -> np.ndarray:
    """Deterministic serving scores: forward pass without sampling."""
    logits, _, _ = multvae_forward(model, x, sample=False)
    return logits
