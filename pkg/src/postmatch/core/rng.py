"""Counter-based random streams keyed by ``(seed, stream_id)``.

Each stream is a Philox4x64 generator whose key packs the seed and the
stream id, and whose counter is the number of 4-word blocks consumed so
far.  Streams are values: drawing returns the samples together with the
advanced stream, so results never depend on scheduling order.
"""

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


@dataclass(frozen=True)
class RngStream:
    """Reproducible stream of random words.

    Parameters
    ----------
    seed : int
        64-bit experiment seed.
    stream_id : int
        64-bit stream identifier, typically the trial index.
    counter : int
        Number of 4-word Philox blocks already consumed.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer")

    def _generator(self):
        key = int(self.seed) | (int(self.stream_id) << 64)
        return np.random.Philox(key=key, counter=self.counter)

    def raw(self, size):
        """Draw `size` uint64 words.

        Returns
        -------
        words : ndarray of uint64
        stream : RngStream
            The advanced stream.
        """
        size = int(size)
        if size < 0:
            raise ValueError("size must be nonnegative")
        if size == 0:
            return np.zeros(0, dtype=np.uint64), self
        blocks = -(-size // 4)
        words = self._generator().random_raw(4 * blocks)[:size]
        return words, RngStream(self.seed, self.stream_id, self.counter + blocks)

    def uniforms(self, size):
        """Doubles on the open interval (0, 1) with 53 random bits each."""
        words, nxt = self.raw(size)
        u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
        return u, nxt

    def uniform(self):
        u, nxt = self.uniforms(1)
        return float(u[0]), nxt

    def bits(self, nbits):
        """A uniformly random integer in ``[0, 2**nbits)``."""
        nwords = -(-int(nbits) // 64)
        words, nxt = self.raw(nwords)
        value = 0
        for w in words:
            value = (value << 64) | int(w)
        value >>= 64 * nwords - int(nbits)
        return value, nxt

    def substream(self, stream_id):
        """Fresh stream sharing the seed, with a different id."""
        return RngStream(self.seed, stream_id, 0)
