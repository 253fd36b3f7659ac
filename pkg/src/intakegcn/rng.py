"""Deterministic, splittable random streams.

Built on numpy's counter-based Philox generator so that identical seeds
give identical draws on every platform. A stream is addressed by its seed
plus a path of string/int tokens; ``child`` derives an independent stream,
which lets callers key randomness by purpose ("init", "dropout", epoch,
step, ...) instead of by draw order. Doing so keeps dropout masks and
parameter init reproducible no matter how batches are scheduled.
"""
from __future__ import annotations

import hashlib

import numpy as np


class RngStream:
    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        self._gen: np.random.Generator | None = None

    def child(self, *tokens) -> "RngStream":
        """Independent stream addressed by this stream's path plus tokens."""
        return RngStream(self.seed, self.path + tuple(tokens))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = _derive_key(self.seed, self.path)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    # Thin draw helpers; each consumes this stream's sequence.
    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size=size)

    def normal(self, scale: float, size=None) -> np.ndarray:
        return self.generator.normal(0.0, scale, size=size)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def keep_mask(self, rate: float, shape) -> np.ndarray:
        """Boolean mask that is True with probability 1 - rate."""
        return self.generator.random(shape) >= rate

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path!r})"


def _derive_key(seed: int, path: tuple) -> int:
    # SHA-256 over the textual address gives a stable 128-bit Philox key.
    text = repr((seed,) + path).encode("utf-8")
    digest = hashlib.sha256(text).digest()
    return int.from_bytes(digest[:16], "little")
