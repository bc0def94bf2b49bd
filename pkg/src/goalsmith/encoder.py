"""Deterministic text-to-vector encoding for task conditioning.

Feature-hashes token unigrams and bigrams into 512 signed buckets and
L2-normalizes; byte-stable across platforms and processes (blake2b, no
process-level hash randomization). A pluggable callable backend can replace
the hash encoder behind the same contract when a real embedding service is
available.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from hashlib import blake2b

import numpy as np

EMBEDDING_DIM = 512
STATE_DIM = 7


class EmptyTextError(ValueError):
    pass


@dataclass(frozen=True)
class TaskEmbedding:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.shape != (EMBEDDING_DIM,):
            raise ValueError(f"embedding must have dimension {EMBEDDING_DIM}, got {v.shape}")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding must be unit norm, got {norm}")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)


_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def _bucket(token: str) -> tuple[int, float]:
    h = int.from_bytes(blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
    return h % EMBEDDING_DIM, 1.0 if (h >> 9) & 1 else -1.0


def encode(text: str) -> TaskEmbedding:
    if not text or not text.strip():
        raise EmptyTextError("cannot encode empty text")
    tokens = [t.lower() for t in _TOKEN_RE.findall(text)]
    if not tokens:
        raise EmptyTextError("text contains no tokens")
    grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    v = np.zeros(EMBEDDING_DIM, dtype=np.float64)
    for gram in grams:
        idx, sign = _bucket(gram)
        v[idx] += sign
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        # All signed counts cancelled; fall back to a single whole-text bucket.
        idx, _ = _bucket(" ".join(tokens))
        v[idx] = 1.0
        norm = 1.0
    return TaskEmbedding(vector=v / norm)


def assemble_observation(state, e: TaskEmbedding) -> np.ndarray:
    """State (R^7) followed by the task embedding (R^512): an R^519 vector."""
    s = np.asarray(state, dtype=np.float64)
    if s.shape != (STATE_DIM,):
        raise ValueError(f"state must have dimension {STATE_DIM}, got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("state must be finite")
    return np.concatenate([s, e.vector])
