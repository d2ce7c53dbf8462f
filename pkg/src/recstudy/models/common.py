"""Shared model-training plumbing: config, errors, float32 quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularSystem(Exception):
    """A normal-equation solve failed; with regularization > 0 this is a bug."""


class NonFiniteLoss(Exception):
    """Training produced NaN/Inf; message carries the epoch/batch location."""


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs for both model families; unused fields are ignored per family.

    Defaults are desk-scale, not tuned for any particular corpus.
    """

    rng_seed: int = 0
    # matrix factorization
    d: int = 16
    regularization: float = 0.01
    confidence_alpha: float = 10.0
    als_iterations: int = 20
    # multinomial VAE
    h: int = 64
    k: int = 16
    beta: float = 0.2
    beta_anneal_steps: int = 1000
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.05

    def __post_init__(self):
        if min(self.d, self.als_iterations, self.h, self.k, self.epochs, self.batch_size) < 1:
            raise ValueError("size and count parameters must be >= 1")
        if self.learning_rate <= 0 or self.regularization <= 0:
            raise ValueError("learning_rate and regularization must be > 0")
        if self.confidence_alpha < 0:
            raise ValueError("confidence_alpha must be >= 0")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")


def quantize32(arr: np.ndarray) -> np.ndarray:
    """Round float64 values to the nearest float32-representable value.

    Applied to final parameters after training so the 32-bit on-disk
    format loses nothing: serialized-then-loaded models score bitwise
    identically to the in-memory ones.
    """
    return arr.astype(np.float32).astype(np.float64)
