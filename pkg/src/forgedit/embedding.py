"""Prompt-embedding containers and the two combination mechanisms.

Vector subtraction interpolates between a source and target embedding:

    e = e_src + gamma * (e_tgt - e_src)

Vector projection decomposes the target into a component along the source
and an orthogonal edit direction, independently per (batch, token) row over
the channel dimension:

    r      = <e_src, e_tgt> / ||e_src||^2
    e_edit = e_tgt - r * e_src
    e      = alpha * e_src + beta * e_edit

so identity strength (alpha) and edit strength (beta) move separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateSourceError

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class PromptEmbedding:
    """B x N x C real array with a provenance tag (encoded/learned/combined)."""

    data: np.ndarray
    provenance: str = "encoded"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] < 1:
            raise ArgumentError(f"embedding must be (B, N, C) with B >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ArgumentError("embedding contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple:
        return self.data.shape


def _pair(e_src, e_tgt) -> tuple[np.ndarray, np.ndarray]:
    a = e_src.data if isinstance(e_src, PromptEmbedding) else np.asarray(e_src, dtype=np.float64)
    b = e_tgt.data if isinstance(e_tgt, PromptEmbedding) else np.asarray(e_tgt, dtype=np.float64)
    if a.shape != b.shape:
        raise ArgumentError(f"embedding shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def vector_subtraction(e_src, e_tgt, gamma: float) -> PromptEmbedding:
    """Interpolate (or extrapolate) from source toward target embedding.

    gamma = 0 and gamma = 1 return the respective endpoint bit-exactly.
    """
    src, tgt = _pair(e_src, e_tgt)
    if gamma == 0.0:
        out = src.copy()
    elif gamma == 1.0:
        out = tgt.copy()
    else:
        out = src + gamma * (tgt - src)
    return PromptEmbedding(out, provenance="combined")


def projection_ratio(e_src, e_tgt) -> np.ndarray:
    """Per-token ratio r of the target's projection onto the source, shape (B, N)."""
    src, tgt = _pair(e_src, e_tgt)
    sq = np.sum(src * src, axis=-1)
    norms = np.sqrt(sq)
    if np.any(norms < DEGENERATE_NORM):
        b, n = np.argwhere(norms < DEGENERATE_NORM)[0]
        raise DegenerateSourceError(int(b), int(n), float(norms[b, n]))
    return np.sum(src * tgt, axis=-1) / sq


def vector_projection(e_src, e_tgt, alpha, beta: float) -> PromptEmbedding:
    """Recombine source and orthogonal edit components with scales alpha, beta.

    alpha is normally a scalar broadcast over all tokens; a (B, N) array is
    accepted for per-token weighting (used by the decomposition identity
    r * e_src + e_edit = e_tgt).
    """
    src, tgt = _pair(e_src, e_tgt)
    r = projection_ratio(src, tgt)[..., None]
    e_edit = tgt - r * src
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim not in (0, 2):
        raise ArgumentError(f"alpha must be a scalar or (B, N) array, got shape {alpha.shape}")
    if alpha.ndim == 2:
        if alpha.shape != src.shape[:2]:
            raise ArgumentError(f"per-token alpha shape {alpha.shape} != {src.shape[:2]}")
        alpha = alpha[..., None]
    return PromptEmbedding(alpha * src + beta * e_edit, provenance="combined")
