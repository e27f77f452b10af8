"""Keyed counter-based Gaussian draws.

Normal number k of stream s under seed S is a pure function of (S, s, k):
the Philox4x64 block cipher (numpy's bit generator) keyed by (S, s) is run in
counter mode, each pair of 64-bit words gives two uniforms, and Box-Muller
turns them into two normals.  Nothing depends on how many draws were made
before, on thread scheduling, or on chunking.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


def _key(seed, stream):
    return np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)


def raw_words(seed, stream, start, count):
    """64-bit words start..start+count-1 of the (seed, stream) counter stream."""
    block, offset = divmod(int(start), 4)
    bg = np.random.Philox(key=_key(seed, stream))
    if block:
        bg.advance(block)
    return bg.random_raw(offset + int(count))[offset:]


def standard_normals(seed, stream, count, start=0):
    """Normals with indices start..start+count-1 of one stream."""
    if count <= 0:
        return np.empty(0)
    first = start - (start % 2)
    pairs = (start + count - first + 1) // 2
    w = raw_words(seed, stream, first, 2 * pairs)
    u1 = ((w[0::2] >> np.uint64(11)).astype(float) + 0.5) * _TWO_M53
    u2 = ((w[1::2] >> np.uint64(11)).astype(float) + 0.5) * _TWO_M53
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(ang)
    z[1::2] = r * np.sin(ang)
    return z[start - first: start - first + count]


def normals_matrix(seed, streams, count):
    """Array of shape (count, len(streams)); column i is stream streams[i]."""
    streams = list(streams)
    out = np.empty((count, len(streams)))
    for i, s in enumerate(streams):
        out[:, i] = standard_normals(seed, s, count)
    return out
