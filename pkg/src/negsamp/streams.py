"""Deterministic random streams.

All randomness in the package flows through two primitives built on the Philox
counter-based generator:

``record_uniforms(seed, n, start)``
    The uniform variate attached to record index ``i`` is a pure function of
    ``(seed, i)``.  Philox produces its output in counter blocks of four
    64-bit words and one double consumes one word, so restarting the stream at
    any block boundary (and discarding the in-block padding) reproduces the
    exact slice a sequential pass would have seen.  Workers can therefore
    partition records arbitrarily and still produce a byte-identical sample.

``derive_seed(master, *path)``
    Stable named substreams for replication harnesses, via SeedSequence.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

_BLOCK = 4  # Philox 4x64: outputs per counter increment


def record_uniforms(seed: int, n: int, start: int = 0) -> np.ndarray:
    """Uniform(0,1) variates for record indices [start, start + n).

    Equivalent to ``Generator(Philox(key=seed)).random(start + n)[start:]``
    but skips straight to the containing counter block, so the cost is O(n)
    regardless of ``start``.
    """
    if n < 0 or start < 0:
        raise ValueError("n and start must be nonnegative")
    if n == 0:
        return np.empty(0)
    block, pad = divmod(start, _BLOCK)
    bg = Philox(key=seed)
    state = bg.state
    state["state"]["counter"] = np.array([block, 0, 0, 0], dtype=np.uint64)
    bg.state = state
    return Generator(bg).random(pad + n)[pad:]


def derive_seed(master: int, *path: int) -> int:
    """A 128-bit child seed determined by (master, path).

    Distinct paths give independent streams; the mapping is stable across
    runs and platforms.
    """
    words = SeedSequence(entropy=[int(master), *map(int, path)]).generate_state(2, np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


def generator(seed: int) -> Generator:
    """General-purpose Generator (normals, permutations) for a derived seed."""
    return Generator(Philox(key=seed))
