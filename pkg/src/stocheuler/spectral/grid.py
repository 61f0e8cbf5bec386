"""Pseudo-spectral machinery: physical grids and alias-free products.

:class:`GridOps` works on complex coefficient arrays in ``rfft2`` layout,
shape ``(..., M, M//2 + 1)``, holding ``c_k`` with
``f(x) = sum_k c_k exp(2 pi i k.x)``. Leading axes are batch axes, so one call
advances a whole block of independent samples. Entries outside the cutoff
disc are kept at zero by :meth:`GridOps.project`.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from stocheuler.spectral.field import FourierField, VectorField
from stocheuler.spectral.lattice import SQRT2, ball_mask, upper_half_mask

TWO_PI = 2.0 * np.pi


def grid_size(N: int, degree_in: int | None = None) -> int:
    """Smallest power of two ``M >= 4N`` that also strictly exceeds
    ``degree_in + N``  (``degree_in`` = summed max-norm degree of the factors).

    Products of factors whose combined degree is ``degree_in`` then alias
    nothing into modes ``|k| <= N``.
    """
    need = 4 * N
    if degree_in is not None:
        need = max(need, degree_in + N + 1)
    M = 4
    while M < need:
        M *= 2
    return M


class GridOps:
    """Spectral operators at cutoff ``N`` on an ``M x M`` collocation grid."""

    def __init__(self, N: int, M: int | None = None):
        self.N = int(N)
        self.M = int(M) if M is not None else grid_size(self.N)
        if self.M < 2 * self.N + 2:
            raise ValueError(f"grid M={self.M} cannot hold modes up to N={self.N}")
        M = self.M
        k1 = np.fft.fftfreq(M, d=1.0 / M).round().astype(int)
        k2 = np.arange(M // 2 + 1)
        K1, K2 = np.meshgrid(k1, k2, indexing="ij")
        self.k1 = K1.astype(float)
        self.k2 = K2.astype(float)
        self.ksq = self.k1 ** 2 + self.k2 ** 2
        self.mask = (self.ksq <= self.N ** 2) & (self.ksq > 0)
        self.fmask = self.mask.astype(float)
        # rfft layout stores k2 >= 0 only; interior k2 > 0 columns stand for two modes
        self.weight = np.where(K2 == 0, 1.0, 2.0) * self.fmask
        with np.errstate(divide="ignore"):
            self.inv_lap = np.where(self.mask, -1.0 / (TWO_PI ** 2 * np.where(self.mask, self.ksq, 1.0)), 0.0)
        self.lap = -(TWO_PI ** 2) * self.ksq * self.fmask
        self.d1 = 1j * TWO_PI * self.k1 * self.fmask
        self.d2 = 1j * TWO_PI * self.k2 * self.fmask
        self.shape = (M, M // 2 + 1)
        self._rows = (np.arange(-self.N, self.N + 1) % M)

    # -- transforms ----------------------------------------------------------

    def to_grid(self, c: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(c, s=(self.M, self.M), norm="forward")

    def from_grid(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(f, norm="forward") * self.fmask

    def project(self, c: np.ndarray) -> np.ndarray:
        return c * self.fmask

    def zeros(self, batch: tuple[int, ...] = ()) -> np.ndarray:
        return np.zeros(batch + self.shape, dtype=complex)

    # -- packing FourierField <-> rfft layout --------------------------------

    def pack_dense(self, a: np.ndarray) -> np.ndarray:
        """Real-basis coefficients ``(..., 2N+1, 2N+1)`` -> rfft layout."""
        n = self.N
        a = np.asarray(a, dtype=float)
        a_flip = a[..., ::-1, ::-1]
        up = upper_half_mask(n)
        c = np.where(up, a + 1j * a_flip, a_flip - 1j * a) * (ball_mask(n) / SQRT2)
        out = self.zeros(a.shape[:-2])
        out[..., self._rows, : n + 1] = c[..., :, n:]
        return out

    def unpack_dense(self, c: np.ndarray) -> np.ndarray:
        """rfft layout -> real-basis coefficients ``(..., 2N+1, 2N+1)``."""
        n = self.N
        half = c[..., self._rows, : n + 1] * self.fmask[self._rows, : n + 1]
        dense = np.zeros(c.shape[:-2] + (2 * n + 1, 2 * n + 1), dtype=complex)
        dense[..., :, n:] = half
        # negative k2: c(k1, k2) = conj c(-k1, -k2)
        dense[..., :, :n] = np.conj(half[..., ::-1, 1:][..., ::-1])
        up = upper_half_mask(n)
        return np.where(up, SQRT2 * dense.real, -SQRT2 * dense.imag) * ball_mask(n)

    def symbol_from_dense(self, sym: np.ndarray) -> np.ndarray:
        """Place an even Fourier multiplier tabulated on ``(2N+1, 2N+1)`` onto the layout."""
        n = self.N
        out = np.zeros(self.shape)
        out[self._rows, : n + 1] = np.asarray(sym, dtype=float)[:, n:]
        return out * self.fmask

    def pack(self, f: FourierField) -> np.ndarray:
        if f.cutoff > self.N:
            raise ValueError(f"field cutoff {f.cutoff} exceeds operator cutoff {self.N}")
        return self.pack_dense(f.with_cutoff(self.N).coeffs)

    def unpack(self, c: np.ndarray, N: int | None = None) -> FourierField:
        """Inverse of :meth:`pack` for a single (unbatched) array."""
        field = FourierField(self.N, self.unpack_dense(c))
        return field if N is None else field.with_cutoff(N)

    # -- inner products and norms --------------------------------------------

    def inner(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.sum(self.weight * (a.real * b.real + a.imag * b.imag), axis=(-2, -1))

    def norm_sq(self, a: np.ndarray) -> np.ndarray:
        return self.inner(a, a)

    def sobolev_sq(self, a: np.ndarray, s: float) -> np.ndarray:
        w = np.zeros_like(self.ksq)
        w[self.mask] = self.ksq[self.mask] ** float(s)
        return np.sum(self.weight * w * (a.real ** 2 + a.imag ** 2), axis=(-2, -1))

    # -- calculus -------------------------------------------------------------

    def velocity(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Biot-Savart in spectral space: ``u = (d2 psi, -d1 psi)``, ``lap psi = w``."""
        psi = w * self.inv_lap
        return self.d2 * psi, -self.d1 * psi

    def gradient_grid(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.to_grid(self.d1 * w), self.to_grid(self.d2 * w)

    def advect(self, v1: np.ndarray, v2: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``Pi_N(v . grad w)`` with ``v`` given on the grid."""
        g1, g2 = self.gradient_grid(w)
        return self.from_grid(v1 * g1 + v2 * g2)

    def nonlinear(self, w: np.ndarray) -> np.ndarray:
        """``b_N(w) = Pi_N((K * w) . grad w)``."""
        u1, u2 = self.velocity(w)
        return self.advect(self.to_grid(u1), self.to_grid(u2), w)


@lru_cache(maxsize=64)
def grid_ops(N: int, M: int | None = None) -> GridOps:
    """Shared, cached operator tables (read-only after construction)."""
    return GridOps(N, M)


# -- FourierField level wrappers ----------------------------------------------


def to_grid(f: FourierField, M: int) -> np.ndarray:
    """Values of ``f`` at nodes ``(j1/M, j2/M)``; array index ``[j1, j2]``."""
    if M < 2 * f.cutoff + 2:
        raise ValueError(f"grid M={M} too small for cutoff {f.cutoff}")
    ops = grid_ops(f.cutoff, M)
    return ops.to_grid(ops.pack(f))


def from_grid(values: np.ndarray, N: int) -> FourierField:
    """Project grid samples onto the cutoff-``N`` basis (mean discarded)."""
    M = values.shape[0]
    ops = grid_ops(N, M)
    return ops.unpack(ops.from_grid(np.asarray(values, dtype=float)))


def grid_points(M: int) -> np.ndarray:
    j = np.arange(M) / M
    X1, X2 = np.meshgrid(j, j, indexing="ij")
    return np.stack([X1, X2], axis=-1)


def product_truncated(f: FourierField, g: FourierField, N: int) -> FourierField:
    """``Pi_N(f g)`` evaluated exactly on a dealiased grid; the mean is dropped."""
    if f.cutoff > N or g.cutoff > N:
        raise ValueError(f"factors must have cutoff <= {N}, got {f.cutoff} and {g.cutoff}")
    ops = grid_ops(N)
    prod = ops.to_grid(ops.pack(f)) * ops.to_grid(ops.pack(g))
    return ops.unpack(ops.from_grid(prod))


def advect_field(v: VectorField, w: FourierField, N: int) -> FourierField:
    """``Pi_N(v . grad w)`` for fields of arbitrary cutoffs."""
    deg = v.cutoff + w.cutoff
    n_in = max(N, v.cutoff, w.cutoff)
    M = grid_size(N, deg)
    while M < 2 * n_in + 2:
        M *= 2
    ops = grid_ops(n_in, M)
    v1 = ops.to_grid(ops.pack(v.u1))
    v2 = ops.to_grid(ops.pack(v.u2))
    out = ops.advect(v1, v2, ops.pack(w))
    return ops.unpack(out).with_cutoff(N)
