"""Counter-based Gaussian noise.

Every normal variate is a pure function of ``(seed, stream, path, step, k)``,
computed with the Philox4x32-10 block cipher. A trajectory therefore sees the
same increments no matter how paths are chunked or scheduled across workers.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def philox4x32(counter, key, rounds=10):
    """Philox4x32 on broadcastable uint32 words.

    ``counter`` is a 4-tuple of integer arrays, ``key`` a 2-tuple. Returns
    four uint64 arrays holding 32-bit outputs.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _MASK for k in key)
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _S32, p0 & _MASK
        hi1, lo1 = p1 >> _S32, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def derive_seed(master, *keys):
    """Stable 64-bit child seed for ``(master, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(master) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _uniform53(hi, lo):
    # 53-bit uniform strictly inside (0, 1)
    a = (hi >> np.uint64(5)).astype(np.float64)
    b = (lo >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b + 0.5) / 9007199254740992.0


class NoiseSource:
    """Standard normal variates indexed by (path, step, coordinate).

    Parameters
    ----------
    seed : int
        64-bit master seed; split into the two Philox key words.
    stream : int
        32-bit stream id, separating independent uses of one seed.
    dim : int
        Number of coordinates drawn per (path, step).
    """

    def __init__(self, seed, stream=0, dim=1):
        if dim < 1:
            raise ValueError("dim must be positive")
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.seed = seed
        self.stream = int(stream) & 0xFFFFFFFF
        self.dim = int(dim)
        self._key = (seed & 0xFFFFFFFF, seed >> 32)

    def normals(self, paths, step0, n_steps):
        """Array of shape ``(n_steps, len(paths), dim)``.

        Variate ``k`` of step ``s`` on a path has flat index ``m = s * dim + k``;
        block ``m // 2`` of the cipher supplies it (lane ``m % 2``).
        """
        paths = np.asarray(paths, dtype=np.uint64)
        m0 = int(step0) * self.dim
        m1 = m0 + int(n_steps) * self.dim
        b0, b1 = m0 // 2, (m1 + 1) // 2
        blocks = np.arange(b0, b1, dtype=np.uint64)
        c0 = blocks[:, None] & _MASK
        c1 = blocks[:, None] >> _S32
        c2 = paths[None, :]
        c3 = np.uint64(self.stream)
        r0, r1, r2, r3 = philox4x32((c0, c1, c2, c3), self._key)
        z = np.empty((paths.size, b1 - b0, 2))
        z[:, :, 0] = ndtri(_uniform53(r0, r1)).T
        z[:, :, 1] = ndtri(_uniform53(r2, r3)).T
        flat = z.reshape(paths.size, -1)[:, m0 - 2 * b0: m1 - 2 * b0]
        return np.ascontiguousarray(flat.reshape(paths.size, n_steps, self.dim).transpose(1, 0, 2))

    def increment(self, path, step):
        """Single standard-normal vector for one (path, step)."""
        return self.normals([path], step, 1)[0, 0]
