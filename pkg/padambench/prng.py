"""
Deterministic, splittable random streams.

The generator is counter based: draw number ``i`` of a stream is
``splitmix64(key + i * GAMMA)`` where ``key`` is a hash of
``(master_seed, stream_id)``. Only wrapping 64-bit integer arithmetic is
involved, so a sequence is a pure function of the two integers on every
platform and a batch of variates is produced with a handful of vectorized
numpy operations.

Usage:
    >>> from padambench import prng
    >>> stream = prng.derive_stream(1, 0)
    >>> x = prng.uniform(stream, -2.0, 2.0)
    >>> z = stream.standard_normal(size=(256, 5))
"""

import math
from dataclasses import dataclass, field

import numpy as np

from padambench.errors import InvalidRangeError

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GAMMA = np.uint64(_GAMMA)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_U_30 = np.uint64(30)
_U_27 = np.uint64(27)
_U_31 = np.uint64(31)
_U_11 = np.uint64(11)

# 53 random mantissa bits -> [0, 1)
_TO_UNIT = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


def _mix64(z: int) -> int:
    """Scalar splitmix64 finalizer on Python ints."""
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer; uint64 array arithmetic wraps."""
    z = (z ^ (z >> _U_30)) * _U_MIX1
    z = (z ^ (z >> _U_27)) * _U_MIX2
    return z ^ (z >> _U_31)


def _stream_key(master_seed: int, stream_id: int) -> int:
    seed_hash = _mix64(master_seed & _MASK64)
    return _mix64((seed_hash + ((stream_id + 1) * _GAMMA)) & _MASK64)


def _as_shape(size) -> tuple[int, ...]:
    if size is None:
        return ()
    if isinstance(size, (int, np.integer)):
        size = (int(size),)
    shape = tuple(int(s) for s in size)
    if any(s < 0 for s in shape):
        raise InvalidRangeError(f"Negative sample shape: {shape}")
    return shape


@dataclass
class RngStream:
    """
    One independent random stream.

    Not safe to share between concurrent workers; derive one stream per
    worker with distinct ``stream_id`` instead. Streams pickle, so they can
    be moved between processes.
    """

    master_seed: int
    stream_id: int
    counter: int = 0
    key: int = field(init=False, repr=False)
    _spare: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        self.key = _stream_key(self.master_seed, self.stream_id)

    def next_uint64(self, count: int) -> np.ndarray:
        """Return the next ``count`` raw 64-bit outputs and advance the counter."""
        if count < 0:
            raise InvalidRangeError(f"Negative draw count: {count}")
        start = self.counter
        self.counter += count
        index = np.arange(start, start + count, dtype=np.uint64)
        return _mix64_array(np.uint64(self.key) + index * _U_GAMMA)

    def random(self, size=None):
        """Uniform variates on [0, 1)."""
        shape = _as_shape(size)
        count = math.prod(shape)
        values = (self.next_uint64(count) >> _U_11).astype(np.float64) * _TO_UNIT
        if size is None:
            return float(values[0])
        return values.reshape(shape)

    def uniform(self, lo: float, hi: float, size=None):
        """Uniform variates on [lo, hi)."""
        if lo > hi:
            raise InvalidRangeError(f"Empty interval: lo={lo} > hi={hi}")
        unit = self.random(size)
        values = lo + (hi - lo) * np.asarray(unit)
        if hi > lo:
            # lo + (hi - lo) * u may round up to hi
            values = np.where(values >= hi, np.nextafter(hi, lo), values)
        if size is None:
            return float(values)
        return values

    def standard_normal(self, size=None):
        """
        Standard normal variates via Box-Muller.

        Both outputs of each transform are used in order; an unused second
        output is kept for the next call, so splitting one request into
        several smaller ones yields the same sequence.
        """
        shape = _as_shape(size)
        count = math.prod(shape)
        out = np.empty(count, dtype=np.float64)
        filled = 0
        if count and self._spare is not None:
            out[0] = self._spare
            self._spare = None
            filled = 1

        remaining = count - filled
        if remaining:
            pairs = (remaining + 1) // 2
            u = self.random(2 * pairs)
            radius = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
            angle = _TWO_PI * u[1::2]
            z = np.empty(2 * pairs, dtype=np.float64)
            z[0::2] = radius * np.cos(angle)
            z[1::2] = radius * np.sin(angle)
            out[filled:] = z[:remaining]
            if 2 * pairs > remaining:
                self._spare = float(z[-1])

        if size is None:
            return float(out[0])
        return out.reshape(shape)


def derive_stream(master_seed: int, stream_id: int) -> RngStream:
    """
    Create the stream labelled ``stream_id`` under ``master_seed``.

    The returned sequence is a pure function of the two integers.
    """
    return RngStream(master_seed=int(master_seed), stream_id=int(stream_id))


def uniform(stream: RngStream, lo: float, hi: float) -> float:
    """Draw one variate from U[lo, hi)."""
    return stream.uniform(lo, hi)


def standard_normal(stream: RngStream) -> float:
    """Draw one N(0, 1) variate."""
    return stream.standard_normal()
