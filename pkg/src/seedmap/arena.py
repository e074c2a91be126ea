"""Named, reusable scratch buffers.

Buffers grow geometrically (with 50% headroom) when a request exceeds
capacity and are never released, so once every stage has seen its largest batch no further
allocation happens.  ``allocations`` counts every growth event.
"""

from __future__ import annotations

import numpy as np


class Arena:
    def __init__(self):
        self._bufs: dict[str, np.ndarray] = {}
        self.allocations = 0

    def get(self, name: str, n: int, dtype) -> np.ndarray:
        """A 1-D view of ``n`` items; contents are unspecified."""
        dtype = np.dtype(dtype)
        buf = self._bufs.get(name)
        if buf is None or buf.dtype != dtype or buf.shape[0] < n:
            old = 0 if buf is None or buf.dtype != dtype else buf.shape[0]
            # headroom so ordinary batch-to-batch variation does not regrow
            cap = max(int(n) + int(n) // 2, 2 * old, 64)
            buf = np.zeros(cap, dtype=dtype)
            self._bufs[name] = buf
            self.allocations += 1
        return buf[:n]

    def get2(self, name: str, rows: int, cols: int, dtype) -> np.ndarray:
        return self.get(name, rows * cols, dtype).reshape(rows, cols)

    def capacity(self, name: str) -> int:
        buf = self._bufs.get(name)
        return 0 if buf is None else int(buf.shape[0])

    def high_water(self) -> dict[str, int]:
        return {k: int(v.nbytes) for k, v in self._bufs.items()}

    @property
    def nbytes(self) -> int:
        return sum(v.nbytes for v in self._bufs.values())
