"""Counter-based Gaussian streams.

Every draw is a pure function of ``(master seed, sample, step, purpose, sub,
ordinal)``: a Philox-4x64 block keyed by ``(seed, sample)`` and started at
counter ``(0, step, purpose, sub)``. Uniforms are turned into normals with
Box-Muller, so the output never depends on scheduling or batch layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

U64 = (1 << 64) - 1

PURPOSE_INCREMENT = 0
PURPOSE_BRIDGE = 1
PURPOSE_INITIAL = 2


def _as_u64(x: int, what: str) -> int:
    x = int(x)
    if not 0 <= x <= U64:
        raise ValueError(f"{what} must fit in an unsigned 64-bit integer, got {x}")
    return x


def _uniform_pairs(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    top = (raw >> np.uint64(11)).astype(np.float64)
    u1 = (top[0::2] + 1.0) * (1.0 / 9007199254740992.0)  # (0, 1]
    u2 = top[1::2] * (1.0 / 9007199254740992.0)  # [0, 1)
    return u1, u2


def philox_normals(key: tuple[int, int], counter: tuple[int, int, int, int], n: int) -> np.ndarray:
    n = int(n)
    if n <= 0:
        return np.zeros(0)
    pairs = (n + 1) // 2
    bg = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=np.array(counter, dtype=np.uint64))
    u1, u2 = _uniform_pairs(bg.random_raw(2 * pairs))
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = rad * np.cos(ang)
    z[1::2] = rad * np.sin(ang)
    return z[:n]


def philox_uniforms(key: tuple[int, int], counter: tuple[int, int, int, int], n: int) -> np.ndarray:
    bg = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=np.array(counter, dtype=np.uint64))
    raw = bg.random_raw(int(n))
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class NoiseStream:
    """Handle for one trajectory's randomness. Cheap to create, never shared."""

    seed: int
    sample: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", _as_u64(self.seed, "seed"))
        object.__setattr__(self, "sample", _as_u64(self.sample, "sample index"))

    @property
    def key(self) -> tuple[int, int]:
        return self.seed, self.sample

    def normals(self, step: int, n: int, purpose: int = PURPOSE_INCREMENT, sub: int = 0) -> np.ndarray:
        """``n`` standard normals; ordinal ``i`` depends only on the arguments and ``i``."""
        counter = (0, _as_u64(step, "step"), int(purpose), _as_u64(sub, "sub-counter"))
        return philox_normals(self.key, counter, n)

    def uniforms(self, n: int, purpose: int = PURPOSE_INITIAL, sub: int = 0) -> np.ndarray:
        return philox_uniforms(self.key, (0, 0, int(purpose), _as_u64(sub, "sub-counter")), n)
