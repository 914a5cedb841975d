"""Deterministic named random streams.

One master seed fans out into independent generators keyed by purpose
("env/0", "updates", "baseline-act", ...), so changing how often one consumer
draws (e.g. evaluation cadence) never perturbs the others. Name hashing uses
sha256, stable across platforms and processes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_rng(master_seed, name):
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32)
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF] + [int(w) for w in words])
    return np.random.default_rng(seq)


class StreamSet:
    """Lazily derived named streams off one master seed."""

    def __init__(self, master_seed):
        self.master_seed = int(master_seed)
        self._streams = {}

    def get(self, name):
        if name not in self._streams:
            self._streams[name] = derive_rng(self.master_seed, name)
        return self._streams[name]
