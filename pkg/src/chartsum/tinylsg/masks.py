"""Boolean attention masks: block-local + strided-sparse + global-token pattern."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LsgConfig:
    """Encoder attention pattern knobs; positions 0..num_global-1 are global tokens."""

    block_size: int = 16
    sparsity_stride: int = 4
    num_global: int = 1
    max_input_tokens: int = 512
    local_radius: int = 1

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.sparsity_stride < 0:
            raise ValueError(f"sparsity_stride must be >= 0, got {self.sparsity_stride}")
        if self.num_global < 0:
            raise ValueError(f"num_global must be >= 0, got {self.num_global}")
        if self.max_input_tokens < self.block_size:
            raise ValueError(
                f"max_input_tokens ({self.max_input_tokens}) must be >= block_size"
                f" ({self.block_size})"
            )
        if self.local_radius < 0:
            raise ValueError(f"local_radius must be >= 0, got {self.local_radius}")


def _check_seq_len(seq_len: int) -> None:
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")


def local_mask(seq_len: int, cfg: LsgConfig) -> np.ndarray:
    """Allow (q, k) whose size-`block_size` blocks are within `local_radius` of each other."""
    _check_seq_len(seq_len)
    blocks = np.arange(seq_len) // cfg.block_size
    return np.abs(blocks[:, None] - blocks[None, :]) <= cfg.local_radius


def sparse_mask(seq_len: int, cfg: LsgConfig) -> np.ndarray:
    """Allow every key at num_global + i*stride for all queries; stride 0 disables."""
    _check_seq_len(seq_len)
    if cfg.sparsity_stride == 0:
        return np.zeros((seq_len, seq_len), dtype=bool)
    keys = np.arange(seq_len)
    strided = (keys >= cfg.num_global) & ((keys - cfg.num_global) % cfg.sparsity_stride == 0)
    return np.broadcast_to(strided[None, :], (seq_len, seq_len)).copy()


def global_mask(seq_len: int, cfg: LsgConfig) -> np.ndarray:
    """Allow any pair where the query or the key is a global position."""
    _check_seq_len(seq_len)
    positions = np.arange(seq_len)
    is_global = positions < cfg.num_global
    return is_global[:, None] | is_global[None, :]


def lsg_mask(seq_len: int, cfg: LsgConfig) -> np.ndarray:
    """Union of the local, sparse, and global components."""
    return local_mask(seq_len, cfg) | sparse_mask(seq_len, cfg) | global_mask(seq_len, cfg)


def causal_mask(seq_len: int) -> np.ndarray:
    """Allow each query to see itself and earlier positions only."""
    _check_seq_len(seq_len)
    return np.tril(np.ones((seq_len, seq_len), dtype=bool))


def mask_density(mask: np.ndarray) -> float:
    """Fraction of allowed (query, key) pairs."""
    return float(np.asarray(mask, dtype=bool).mean())


def mask_to_bias(mask: np.ndarray) -> np.ndarray:
    """Additive attention bias: 0 where allowed, -inf where disallowed."""
    return np.where(np.asarray(mask, dtype=bool), 0.0, -np.inf)
