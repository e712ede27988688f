"""Tiny cross-encoder over hashed token features.

The query and product are joined into one sequence ("<query side> product:
<product text>"), tokenized, and unigrams + bigrams are hashed (crc32, so
buckets are stable across processes) into an EmbeddingBag followed by a
small MLP with a sigmoid head. No dropout and no sampling anywhere, so a
fixed checkpoint gives fixed scores.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass

import torch
from torch import nn

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

CHECKPOINT_FORMAT = "scorer-service"
CHECKPOINT_VERSION = 1


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def pair_text(query: str, product: str) -> str:
    """Joint input; mirrors the pointwise template's query/product join."""
    return f"{query} product: {product}"


@dataclass(frozen=True)
class ModelConfig:
    n_buckets: int = 1 << 15
    embedding_dim: int = 64
    max_seq_len: int = 256
    seed: int = 0


def hashed_features(text: str, n_buckets: int, max_seq_len: int) -> list[int]:
    tokens = tokenize(text)[:max_seq_len]
    grams = tokens + [f"{a}_{b}" for a, b in zip(tokens, tokens[1:])]
    if not grams:
        grams = ["<empty>"]
    return [zlib.crc32(g.encode("utf-8")) % n_buckets for g in grams]


class CrossEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)
        self.embedding = nn.EmbeddingBag(config.n_buckets, config.embedding_dim, mode="mean")
        self.hidden = nn.Linear(config.embedding_dim, config.embedding_dim)
        self.head = nn.Linear(config.embedding_dim, 1)

    def forward(self, flat_ids: torch.Tensor, offsets: torch.Tensor) -> torch.Tensor:
        pooled = self.embedding(flat_ids, offsets)
        hidden = torch.relu(self.hidden(pooled))
        return self.head(hidden).squeeze(-1)

    def batch_tensors(self, texts: list[str], device: str = "cpu"):
        flat: list[int] = []
        offsets: list[int] = []
        for text in texts:
            offsets.append(len(flat))
            flat.extend(
                hashed_features(text, self.config.n_buckets, self.config.max_seq_len)
            )
        return (
            torch.tensor(flat, dtype=torch.long, device=device),
            torch.tensor(offsets, dtype=torch.long, device=device),
        )

    @torch.no_grad()
    def score_texts(self, texts: list[str], device: str = "cpu") -> list[float]:
        """Positive-class probability per joint text."""
        if not texts:
            return []
        self.eval()
        flat, offsets = self.batch_tensors(texts, device)
        logits = self(flat, offsets)
        return torch.sigmoid(logits).tolist()


def save_checkpoint(model: CrossEncoder, path: str) -> None:
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": {
                "n_buckets": model.config.n_buckets,
                "embedding_dim": model.config.embedding_dim,
                "max_seq_len": model.config.max_seq_len,
                "seed": model.config.seed,
            },
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path: str, device: str = "cpu") -> CrossEncoder:
    payload = torch.load(path, map_location=device, weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a scorer checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    model = CrossEncoder(ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
