"""Seedable, splittable deterministic random streams.

Child streams derive their seed from sha256(parent seed, label) so editing
one dungeon spec never reshuffles the others, and results are identical
across processes and platforms (never the salted builtin hash()).
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *labels: str | int) -> int:
    h = hashlib.sha256()
    h.update(str(seed).encode("utf-8"))
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


class Stream(random.Random):
    """random.Random with named child splitting."""

    def __init__(self, seed: int):
        super().__init__(seed)
        self._seed = seed

    def child(self, *labels: str | int) -> "Stream":
        return Stream(derive_seed(self._seed, *labels))
