"""Collaborative-filtering model families, ranking, evaluation, and model files."""

from .common import NonFiniteLoss, SingularSystem, TrainingConfig, quantize32
from .evaluation import EmptyValidation, EvalReport, evaluate
from .mf import MfModel, mf_fold_in, mf_scores, mf_objective, train_mf
from .multvae import (
    MultVaeModel,
    elbo_loss,
    loss_and_param_grads,
    multvae_forward,
    multvae_scores,
    train_multvae,
)
from .ranking import RankedList, recommend_top_n
from .store import ModelFormatError, load_model, save_model

__all__ = [
    "EmptyValidation",
    "EvalReport",
    "MfModel",
    "ModelFormatError",
    "MultVaeModel",
    "NonFiniteLoss",
    "RankedList",
    "SingularSystem",
    "TrainingConfig",
    "elbo_loss",
    "evaluate",
    "load_model",
    "loss_and_param_grads",
    "mf_fold_in",
    "mf_objective",
    "mf_scores",
    "multvae_forward",
    "multvae_scores",
    "quantize32",
    "recommend_top_n",
    "save_model",
    "train_mf",
    "train_multvae",
]
