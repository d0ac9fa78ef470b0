"""Counter-based, splittable random streams.

Each stream is a Philox generator keyed by ``(master_seed, stream_id)``, so any
batch of draws can be re-derived independently of the others.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


class RngStream:
    """Deterministic random stream identified by a master seed and a stream id."""

    def __init__(self, master_seed: int, stream_id: int = 0):
        if stream_id < 0:
            raise ValueError("stream_id must be non-negative")
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = int(stream_id)
        bitgen = np.random.Philox(key=np.array([self.master_seed, self.stream_id], dtype=np.uint64))
        self._gen = np.random.Generator(bitgen)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"

    def spawn(self, stream_id: int) -> "RngStream":
        """Fresh stream sharing this master seed."""
        return RngStream(self.master_seed, stream_id)

    def uniforms(self, size) -> np.ndarray:
        # midpoint of a 53-bit cell: never exactly 0 or 1
        k = self._gen.integers(0, 1 << 53, size=size, dtype=np.int64)
        return (k + 0.5) * _TWO_M53

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def exponentials(self, size) -> np.ndarray:
        """Standard exponential draws by inversion."""
        return -np.log(self.uniforms(size))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def uniform(rng: RngStream) -> float:
    """One draw strictly inside (0, 1); advances ``rng``."""
    return rng.uniform()
