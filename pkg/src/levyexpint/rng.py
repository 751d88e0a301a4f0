"""Reproducible random streams and substreams.

Every stream is identified by ``(seed, stream_index)``; workers derive
independent substreams from it through :class:`numpy.random.SeedSequence`
spawn keys, so a run is fully determined by the seed and the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["RngStream", "split_counts", "parallel_draws"]

_SEED_MASK = (1 << 64) - 1


@dataclass
class RngStream:
    """A single-owner random stream.

    Parameters
    ----------
    seed : int
        64-bit seed (negative values are reduced modulo 2**64).
    stream_index : int
        Nonnegative stream label. Distinct labels give independent streams.
    path : tuple of int, optional
        Substream path below ``stream_index``; filled in by :meth:`substream`.
    """

    seed: int
    stream_index: int = 0
    path: tuple = ()
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be nonnegative")
        self.seed = int(self.seed) & _SEED_MASK
        self.stream_index = int(self.stream_index)
        self.path = tuple(int(p) for p in self.path)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index, *self.path))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def substream(self, index: int) -> "RngStream":
        """Fresh stream derived from this one; does not consume draws."""
        if index < 0:
            raise ValueError("substream index must be nonnegative")
        return RngStream(self.seed, self.stream_index, self.path + (int(index),))

    def reset(self) -> None:
        """Rewind to the start of the stream."""
        self._gen = None


def as_stream(rng) -> RngStream:
    """Accept an :class:`RngStream` or an integer seed."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")


def split_counts(n: int, workers: int) -> list[int]:
    """Split ``n`` draws into ``workers`` nearly equal chunks (larger first)."""
    workers = max(1, int(workers))
    q, r = divmod(int(n), workers)
    return [q + (1 if i < r else 0) for i in range(workers)]


def parallel_draws(fn: Callable[[int, RngStream], np.ndarray], n: int, rng: RngStream,
                   workers: int = 1) -> np.ndarray:
    """Run ``fn(count, substream)`` on ``workers`` chunks and concatenate in order.

    Chunk ``k`` always uses ``rng.substream(k)``, so the output depends only on
    the parent stream and the worker count.
    """
    counts = split_counts(n, workers)
    streams = [rng.substream(k) for k in range(len(counts))]
    if len(counts) == 1:
        return np.asarray(fn(counts[0], streams[0]))
    with ThreadPoolExecutor(max_workers=len(counts)) as pool:
        parts = list(pool.map(fn, counts, streams))
    return np.concatenate([np.asarray(p) for p in parts])
