"""Inductive key-query recommender with light graph propagation."""
from .inference import InductiveScorer, RandomRanker, RankingResult, TopPop, score_all, toppop
from .model import (GraphOps, ModelParams, TrainConfig, bpr_terms, init_embeddings, loss_and_grad,
                    propagate, select_keys,
                    self_enhanced_terms)
from .training import TrainingDivergedError, TrainResult, sample_negatives, train

__all__ = [
    "GraphOps", "InductiveScorer", "init_embeddings", "propagate", "ModelParams", "RandomRanker", "RankingResult", "TopPop",
    "TrainConfig", "TrainResult", "TrainingDivergedError", "bpr_terms", "loss_and_grad",
    "sample_negatives", "score_all", "select_keys", "self_enhanced_terms", "toppop", "train",
]
