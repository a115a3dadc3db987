"""Gaussian sentence embeddings with an asymmetric, entailment-aware similarity.

Sentences are encoded as diagonal Gaussians (a mean and a per-dimension
variance); similarity(query || reference) = 1 / (1 + KL(query || reference))
is deliberately asymmetric, which lets one model both score entailment and
predict its direction. The package bundles the numerical core, a trainable
bag-of-hashed-tokens encoder plus a precomputed-vector provider, a
contrastive trainer over (premise, entailed, contradicted) triplets, NLI and
direction evaluation harnesses, and a CLI that ties them together.
"""

from .core import (
    GaussianEmbedding,
    kl_divergence,
    kl_gradients,
    similarity,
)
from .data import NLIExample, SyntheticConfig, Triplet, build_triplets, combine, generate_synthetic, load_jsonl, write_jsonl
from .direction import (
    direction_accuracy,
    direction_report,
    length_baseline,
    length_baseline_report,
    length_ratio_histogram,
    predict_direction,
)
from .encoder import (
    BagEncoder,
    PrecomputedProvider,
    ProjectionHeads,
    SentenceModel,
    encode,
    new_bag_model,
    new_precomputed_model,
    tokenize,
)
from .formats import load_checkpoint, load_provider, read_gvec, save_checkpoint, write_gvec
from .nli import EvalReport, auprc, best_threshold, classify, evaluate, mcnemar, score_examples
from .training import (
    LossBreakdown,
    TrainConfig,
    TrainResult,
    batch_loss,
    grid_search,
    loss_gradients,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
