"""Deterministic random streams fanned out from one experiment seed.

Every consumer (dataset draws, diffusion noise, weight init, ...) asks for
its own named stream, so adding a new consumer never shifts the draws seen
by existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(label):
    return zlib.crc32(str(label).encode("utf-8"))


class Rng:
    """Root seed plus a path of stream labels."""

    def __init__(self, seed, _path=()):
        self.seed = int(seed)
        self._path = tuple(_path)

    def stream(self, label) -> np.random.Generator:
        """Independent generator for this label, stable across runs."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self._path + (_key(label),))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, label) -> "Rng":
        """Namespaced sub-root, e.g. one per training phase or epoch."""
        return Rng(self.seed, self._path + (_key(label),))

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self._path})"
