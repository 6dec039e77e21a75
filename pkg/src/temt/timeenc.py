"""Sinusoidal positional embedding of years relative to the corpus origin."""

from __future__ import annotations

import numpy as np

from .data import TimeRange
from .errors import ConfigError


def encode_time(year: int, time_range: TimeRange, d_prime: int = 64) -> np.ndarray:
    """Embed a year as alternating sin/cos components of its offset from t_min.

    Component 2i is sin(p / 10000^(i/d')) and component 2i+1 is the matching
    cosine, where p = year - t_min. The function is total over integers;
    callers clamp out-of-range years beforehand.
    """
    if d_prime <= 0 or d_prime % 2 != 0:
        raise ConfigError(f"time embedding dimension must be a positive even number, got {d_prime}")
    position = year - time_range.t_min
    i = np.arange(d_prime // 2, dtype=np.float64)
    angles = position / np.power(10000.0, i / d_prime)
    embedding = np.empty(d_prime, dtype=np.float64)
    embedding[0::2] = np.sin(angles)
    embedding[1::2] = np.cos(angles)
    return embedding


def time_embedding_table(time_range: TimeRange, d_prime: int = 64) -> np.ndarray:
    """Embeddings for every year in the range, stacked row-wise (year - t_min indexes)."""
    if d_prime <= 0 or d_prime % 2 != 0:
        raise ConfigError(f"time embedding dimension must be a positive even number, got {d_prime}")
    positions = np.arange(len(time_range), dtype=np.float64)[:, None]
    i = np.arange(d_prime // 2, dtype=np.float64)[None, :]
    angles = positions / np.power(10000.0, i / d_prime)
    table = np.empty((len(time_range), d_prime), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table
