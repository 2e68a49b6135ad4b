"""Deterministic random-stream derivation.

Every stochastic routine in the package draws from Philox counter-based
generators keyed by an explicit integer seed plus a small tuple of stream
labels. Streams derived from the same seed but different labels are
independent, and the derivation never consults wall-clock time or global
state, so a (seed, labels) pair pins down every random draw bit for bit.

Batch drivers split work into fixed-size trial chunks whose substreams are
keyed by chunk index. Chunk boundaries depend only on the trial count, never
on how many worker threads execute them, which keeps outputs byte-identical
across thread counts.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

#: Trial-chunk width used by all batch drivers. Part of the output contract:
#: changing it reshuffles which substream generates which trial.
CHUNK = 4096


def _splitmix64(x: int) -> int:
    """One splitmix64 scrambling round on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_key(seed: int, *labels: int) -> int:
    """Fold a seed and stream labels into a 128-bit Philox key."""
    acc = _splitmix64(seed & _MASK64)
    for lab in labels:
        acc = _splitmix64(acc ^ (lab & _MASK64))
    return ((seed & _MASK64) << 64) | acc


def substream(seed: int, *labels: int) -> np.random.Generator:
    """Return a Generator for the (seed, labels) substream.

    The same arguments always yield an identical stream, independent of
    call order, process, or thread layout.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *labels)))


def chunk_ranges(n: int, chunk: int = CHUNK):
    """Yield (index, start, stop) triples covering range(n) in fixed chunks."""
    for index, start in enumerate(range(0, n, chunk)):
        yield index, start, min(start + chunk, n)
