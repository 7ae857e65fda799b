"""Counter-based random streams.

Every stochastic quantity in the pipeline is drawn from a Philox stream keyed by
(master seed, purpose stream, item id), so sample i is reproducible without
generating samples 1..i-1 and independent runs never share a stream.
"""

import numpy as np

GEOMETRY_STREAM = 1
LOAD_STREAM = 2
SHUFFLE_STREAM = 3


def make_generator(seed: int, stream: int, index: int) -> np.random.Generator:
    """Return the deterministic generator for (seed, stream, index)."""
    if index < 0 or stream < 0:
        raise ValueError(f"stream and index must be nonnegative, got {stream}, {index}")
    return np.random.Generator(np.random.Philox(key=[seed, (stream << 32) | index]))
