"""Fine-tuning loop for the cross-encoder pair scorer."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

import torch
from torch import nn

from .data import LabeledPair
from .model import CrossEncoder, ModelConfig, save_checkpoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    batch_size: int = 64
    learning_rate: float = 1e-2
    val_fraction: float = 0.1
    patience: int = 2
    seed: int = 0
    device: str = "cpu"


def auc_score(targets: list[float], scores: list[float]) -> float:
    """Rank-based AUC (probability a positive outscores a negative)."""
    positives = [s for s, t in zip(scores, targets) if t >= 0.5]
    negatives = [s for s, t in zip(scores, targets) if t < 0.5]
    if not positives or not negatives:
        raise ValueError("AUC needs both classes")
    ranked = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(ranked):
        j = i
        while j + 1 < len(ranked) and scores[ranked[j + 1]] == scores[ranked[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for idx in ranked[i : j + 1]:
            ranks[idx] = mean_rank
        i = j + 1
    positive_rank_sum = sum(r for r, t in zip(ranks, targets) if t >= 0.5)
    n_pos, n_neg = len(positives), len(negatives)
    return (positive_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def finetune(
    pairs: list[LabeledPair],
    model_config: ModelConfig = ModelConfig(),
    train_config: TrainConfig = TrainConfig(),
    checkpoint_path: str | None = None,
) -> tuple[CrossEncoder, float]:
    """Train on labeled pairs; returns (model, best validation AUC).

    Early-stops on validation AUC. When one class is missing from the
    validation slice the AUC is reported as 0.5 and training just runs the
    configured epochs.
    """
    if not pairs:
        raise ValueError("no training pairs")
    rng = random.Random(train_config.seed)
    shuffled = list(pairs)
    rng.shuffle(shuffled)
    n_val = max(1, int(len(shuffled) * train_config.val_fraction))
    val, train = shuffled[:n_val], shuffled[n_val:]
    if not train:
        train, val = val, val

    torch.manual_seed(train_config.seed)
    model = CrossEncoder(model_config)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_config.learning_rate)
    loss_fn = nn.BCEWithLogitsLoss()
    device = train_config.device
    model.to(device)

    def validation_auc() -> float:
        scores = model.score_texts([p.text for p in val], device)
        targets = [p.target for p in val]
        try:
            return auc_score(targets, scores)
        except ValueError:
            return 0.5

    best_auc = -1.0
    best_state = None
    stale = 0
    for epoch in range(train_config.epochs):
        model.train()
        rng.shuffle(train)
        total_loss = 0.0
        for start in range(0, len(train), train_config.batch_size):
            batch = train[start : start + train_config.batch_size]
            flat, offsets = model.batch_tensors([p.text for p in batch], device)
            targets = torch.tensor([p.target for p in batch], device=device)
            optimizer.zero_grad()
            loss = loss_fn(model(flat, offsets), targets)
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(batch)
        auc = validation_auc()
        logger.info(
            "epoch %d: loss %.4f, val AUC %.4f", epoch + 1, total_loss / len(train), auc
        )
        if auc > best_auc:
            best_auc = auc
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    if checkpoint_path:
        save_checkpoint(model, checkpoint_path)
    return model, best_auc
