"""Counter-based normal streams for reproducible Monte Carlo.

Each stream is Philox-4x64 keyed by ``(seed, stream_id)``; the 64-bit
outputs are mapped to uniforms on (0, 1] and paired through Box-Muller.
Output depends only on the key and on how many variates were drawn before,
never on block sizes or on which worker consumes the stream.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NonPositiveDt

_MASK64 = (1 << 64) - 1
# stream ids with this bit set are reserved for initial-data draws
INIT_STREAM_BIT = 1 << 63


class NormalStream:
    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._bits = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))
        self._spare: float | None = None
        self.drawn = 0

    def _uniforms(self, n: int) -> np.ndarray:
        raw = self._bits.random_raw(n)
        return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        """Next ``n`` standard normal variates."""
        out = np.empty(n)
        k = 0
        if n and self._spare is not None:
            out[0] = self._spare
            self._spare = None
            k = 1
        rest = n - k
        pairs = (rest + 1) // 2
        if pairs:
            u = self._uniforms(2 * pairs)
            r = np.sqrt(-2.0 * np.log(u[0::2]))
            theta = 2.0 * math.pi * u[1::2]
            z = np.empty(2 * pairs)
            z[0::2] = r * np.cos(theta)
            z[1::2] = r * np.sin(theta)
            out[k:] = z[:rest]
            if rest % 2:
                self._spare = float(z[-1])
        self.drawn += n
        return out

    def normal(self) -> float:
        return float(self.normals(1)[0])

    def wiener_increments(self, dt: float, n: int, substeps: int = 1) -> np.ndarray:
        """``n`` increments over steps of length ``dt``.

        With ``substeps = k`` each increment is the sum of k sub-increments of
        length dt/k, so a run at dt/k with substeps=1 sees the same Brownian path.
        """
        if not dt > 0:
            raise NonPositiveDt(f"dt must be positive, got {dt}")
        z = self.normals(n * substeps).reshape(n, substeps)
        if substeps == 1:
            return math.sqrt(dt) * z[:, 0]
        return math.sqrt(dt / substeps) * z.sum(axis=1)


def normal(stream: NormalStream) -> float:
    return stream.normal()


def wiener_increment(stream: NormalStream, dt: float) -> float:
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    return math.sqrt(dt) * stream.normal()
