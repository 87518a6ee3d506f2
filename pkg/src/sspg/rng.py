"""Seeded randomness for every stochastic component.

All sampling in this package goes through one fixed, versioned scheme so that
traces are reproducible across platforms and across vectorized/scalar call
sites:

* bit source: numpy's PCG64, wrapped in ``numpy.random.Generator``;
* component indices: a raw 64-bit draw reduced to ``[0, m)`` by the
  multiply-high trick ``(r * m) >> 64`` (no rejection loop).

``draw_indices(rng, m, size)`` consumes exactly ``size`` raw draws and yields
the same values as ``size`` successive ``draw_index`` calls on an equally
seeded generator, so batched and per-step sampling are interchangeable.
"""

from __future__ import annotations

import numpy as np

GENERATOR_SCHEME = "pcg64-multiplyhigh-v1"

_U64 = np.uint64
_FULL = 1 << 64
_LO_MASK = _U64(0xFFFFFFFF)
_SHIFT = _U64(32)


def make_rng(seed: int) -> np.random.Generator:
    """A fresh PCG64 generator for the given integer seed."""
    return np.random.Generator(np.random.PCG64(seed))


def draw_index(rng: np.random.Generator, m: int) -> int:
    """Draw one component index uniformly from {0, ..., m-1}."""
    if m <= 0:
        raise ValueError(f"need at least one component, got m={m}")
    r = int(rng.integers(0, _FULL, dtype=_U64))
    return (r * m) >> 64


def draw_indices(rng: np.random.Generator, m: int, size: int) -> np.ndarray:
    """Vectorized ``draw_index``: consumes ``size`` raw draws from the stream.

    The multiply-high reduction is computed exactly in 64-bit halves
    (m must fit in 32 bits, which any component count here does).
    """
    if m <= 0:
        raise ValueError(f"need at least one component, got m={m}")
    if m > 0xFFFFFFFF:
        raise ValueError("component count does not fit the 32-bit reduction")
    raw = rng.integers(0, _FULL, dtype=_U64, size=size)
    mm = _U64(m)
    hi = raw >> _SHIFT
    lo = raw & _LO_MASK
    return ((hi * mm + ((lo * mm) >> _SHIFT)) >> _SHIFT).astype(np.int64)
