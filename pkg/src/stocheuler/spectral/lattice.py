"""Lattice bookkeeping and the real trigonometric basis on the unit torus.

The basis is ``e_k(x) = sqrt(2) cos(2 pi k.x)`` for ``k`` in the upper half
lattice and ``sqrt(2) sin(2 pi k.x)`` for ``k`` in the lower half, where the
upper half is ``{k1 > 0} U {k1 = 0, k2 > 0}``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

SQRT2 = math.sqrt(2.0)

Mode = tuple[int, int]


def _check_mode(k) -> Mode:
    k1, k2 = int(k[0]), int(k[1])
    if k1 == 0 and k2 == 0:
        raise ValueError("the zero mode is not a field mode")
    return k1, k2


def in_upper_half(k) -> bool:
    k1, k2 = _check_mode(k)
    return k1 > 0 or (k1 == 0 and k2 > 0)


def perp(k) -> Mode:
    """Rotate a lattice vector: ``(k1, k2) -> (k2, -k1)``."""
    return int(k[1]), -int(k[0])


def norm(k) -> float:
    return math.hypot(k[0], k[1])


@lru_cache(maxsize=None)
def _modes(N: int) -> tuple[Mode, ...]:
    out = []
    for k1 in range(-N, N + 1):
        for k2 in range(-N, N + 1):
            if (k1, k2) != (0, 0) and k1 * k1 + k2 * k2 <= N * N:
                out.append((k1, k2))
    return tuple(out)


def modes_up_to(N: int) -> list[Mode]:
    """All nonzero lattice points with ``|k| <= N`` in lexicographic order.

    The order fixes which Gaussian ordinal drives which mode, so it is part
    of the reproducibility contract and must not change.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"cutoff must be a positive integer, got {N!r}")
    return list(_modes(int(N)))


def basis_eval(k, x) -> float | np.ndarray:
    """Evaluate ``e_k`` at a point (or an array of points, last axis of size 2)."""
    k1, k2 = _check_mode(k)
    x = np.asarray(x, dtype=float)
    phase = 2.0 * np.pi * (k1 * x[..., 0] + k2 * x[..., 1])
    if in_upper_half((k1, k2)):
        val = SQRT2 * np.cos(phase)
    else:
        val = SQRT2 * np.sin(phase)
    return float(val) if val.ndim == 0 else val


@lru_cache(maxsize=None)
def dense_wavenumbers(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer wavenumber arrays ``(K1, K2)`` of shape ``(2N+1, 2N+1)``.

    Entry ``[i, j]`` holds mode ``(i - N, j - N)``.
    """
    r = np.arange(-N, N + 1)
    K1, K2 = np.meshgrid(r, r, indexing="ij")
    K1.flags.writeable = False
    K2.flags.writeable = False
    return K1, K2


@lru_cache(maxsize=None)
def ball_mask(N: int) -> np.ndarray:
    K1, K2 = dense_wavenumbers(N)
    ksq = K1 * K1 + K2 * K2
    mask = (ksq <= N * N) & (ksq > 0)
    mask.flags.writeable = False
    return mask


@lru_cache(maxsize=None)
def upper_half_mask(N: int) -> np.ndarray:
    K1, K2 = dense_wavenumbers(N)
    mask = (K1 > 0) | ((K1 == 0) & (K2 > 0))
    mask.flags.writeable = False
    return mask


@lru_cache(maxsize=None)
def mode_index_arrays(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense-array indices of ``modes_up_to(N)``, in the canonical order."""
    modes = np.array(_modes(N), dtype=int)
    i = modes[:, 0] + N
    j = modes[:, 1] + N
    i.flags.writeable = False
    j.flags.writeable = False
    return i, j
