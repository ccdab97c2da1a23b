"""Deterministic random streams for every sampling component.

All randomness in the toolkit flows through Philox, a counter-based
generator: the value stream is a pure function of (key, counter), so a
generator for (seed, stream_id, index) can be rebuilt anywhere without
replaying earlier draws.  Each sampling component owns a stream id, and
per-item generators are keyed by item index, which is what makes
"sample i depends only on (seed, i)" hold and lets workers split work
by index range.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFF_FFFF_FFFF_FFFF

# Stream ids. Never renumber: doing so silently changes every output.
RISE_MASKS = 1
SEGMENTATION = 2
COALITIONS = 3
PARTITION = 4
SYNTH_DATA = 5
BENCH = 6


def stream(seed: int, stream_id: int, index: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream_id, index).

    The key holds (seed, stream_id) and the index is planted in the third
    counter word, 2**128 draw-blocks apart, so generators for distinct
    indices can never overlap.
    """
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, index & _MASK64, (index >> 64) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def child_seed(seed: int, stream_id: int, index: int = 0) -> int:
    """Derive a 64-bit seed for a nested component."""
    return int(stream(seed, stream_id, index).integers(0, 2**63, dtype=np.uint64))
