"""Auto-associative initialization: fit the identity on clean features, then hand the weights over."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from .lstm import LstmWeights, TrainConfig, TrainRecord, init_random, train, Architecture

logger = logging.getLogger(__name__)


def pretrain_autoassociative(
    arch: Architecture,
    clean_train: Sequence[np.ndarray],
    clean_val: Sequence[np.ndarray],
    cfg: TrainConfig = TrainConfig(),
    init: Optional[LstmWeights] = None,
) -> tuple[LstmWeights, TrainRecord]:
    """Train with every clean sequence as both input and target.

    ``init`` defaults to ``init_random(arch, cfg.seed)``; pass one to carry input
    standardization stats. Returns the best-validation weights tagged ``auto_associative``.
    """
    if arch.input_dim != arch.output_dim:
        raise ValueError("identity mapping needs input width == output width")
    if init is None:
        init = init_random(arch, cfg.seed)
    elif init.arch != arch:
        raise ValueError("init weights do not match the architecture")
    pairs_train = [(x, x) for x in clean_train]
    pairs_val = [(x, x) for x in clean_val]
    theta_a, record = train(init, pairs_train, pairs_val, cfg)
    theta_a.init_kind = "auto_associative"
    logger.info("pretraining stopped after %d epochs (%s), best val sse %.6g at epoch %d",
                record.epochs, record.stop_reason, record.best_validation_sse, record.best_epoch)
    return theta_a, record


def transfer_weights(theta_a: LstmWeights, arch: Optional[Architecture] = None) -> LstmWeights:
    """Deep copy of the pretrained weights, every parameter left trainable."""
    if arch is not None and theta_a.arch != arch:
        raise ValueError(f"architecture mismatch: {theta_a.arch} vs {arch}")
    return theta_a.copy()


def parameter_distance(a: LstmWeights, b: LstmWeights) -> float:
    """L2 distance between two parameter sets (diagnostic only)."""
    if a.arch != b.arch:
        raise ValueError("architectures differ")
    return float(np.linalg.norm(a.flat() - b.flat()))
