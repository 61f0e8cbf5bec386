"""Spectral fields in the real trigonometric basis and exact spectral calculus.

A :class:`FourierField` stores the coefficients ``a_k`` of a zero-mean field
``sum_k a_k e_k(x)`` as a dense ``(2N+1, 2N+1)`` array over the square
``max(|k1|, |k2|) <= N``; everything outside the disc ``|k| <= N`` is zero.

Conventions:

* ``grad e_k = 2 pi k e_{-k}`` and ``lap e_k = -4 pi^2 |k|^2 e_k``.
* Vorticity and velocity are related by ``xi = d2 u1 - d1 u2``.
* Sobolev weights are ``|k|^{2s}`` with the plain lattice norm (no ``2 pi``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from stocheuler.spectral.lattice import (
    SQRT2,
    ball_mask,
    dense_wavenumbers,
    in_upper_half,
    perp,
    upper_half_mask,
)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class FourierField:
    """Zero-mean scalar field truncated to the disc ``|k| <= cutoff``."""

    cutoff: int
    coeffs: np.ndarray

    def __post_init__(self):
        N = int(self.cutoff)
        if N < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        a = np.array(self.coeffs, dtype=float)
        if a.shape != (2 * N + 1, 2 * N + 1):
            raise ValueError(f"coefficient array must have shape {(2 * N + 1,) * 2}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        a = np.where(ball_mask(N), a, 0.0)
        a.flags.writeable = False
        object.__setattr__(self, "cutoff", N)
        object.__setattr__(self, "coeffs", a)

    # -- construction -------------------------------------------------------

    @classmethod
    def zeros(cls, N: int) -> "FourierField":
        return cls(N, np.zeros((2 * N + 1, 2 * N + 1)))

    @classmethod
    def from_modes(cls, N: int, modes: Mapping | Iterable) -> "FourierField":
        """Build from ``{(k1, k2): a_k}`` or an iterable of ``((k1, k2), a_k)``."""
        items = modes.items() if isinstance(modes, Mapping) else modes
        a = np.zeros((2 * N + 1, 2 * N + 1))
        for k, val in items:
            k1, k2 = int(k[0]), int(k[1])
            if (k1, k2) == (0, 0):
                raise ValueError("the zero mode cannot carry a coefficient")
            if k1 * k1 + k2 * k2 > N * N:
                raise ValueError(f"mode {(k1, k2)} lies outside the cutoff disc |k| <= {N}")
            a[k1 + N, k2 + N] += float(val)
        return cls(N, a)

    @classmethod
    def basis(cls, k, N: int | None = None) -> "FourierField":
        """The single basis function ``e_k`` (cutoff defaults to ``ceil|k|``)."""
        k1, k2 = int(k[0]), int(k[1])
        if N is None:
            N = max(1, int(np.ceil(np.hypot(k1, k2))))
        return cls.from_modes(N, {(k1, k2): 1.0})

    # -- access -------------------------------------------------------------

    def __getitem__(self, k) -> float:
        N = self.cutoff
        k1, k2 = int(k[0]), int(k[1])
        if max(abs(k1), abs(k2)) > N:
            return 0.0
        return float(self.coeffs[k1 + N, k2 + N])

    def items(self) -> Iterator[tuple[tuple[int, int], float]]:
        """Nonzero ``(mode, coefficient)`` pairs."""
        N = self.cutoff
        for i, j in zip(*np.nonzero(self.coeffs)):
            yield (int(i) - N, int(j) - N), float(self.coeffs[i, j])

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def with_cutoff(self, N: int) -> "FourierField":
        """Embed into (or truncate to) a different cutoff."""
        N = int(N)
        if N == self.cutoff:
            return self
        out = np.zeros((2 * N + 1, 2 * N + 1))
        n = min(N, self.cutoff)
        src = self.coeffs[self.cutoff - n:self.cutoff + n + 1, self.cutoff - n:self.cutoff + n + 1]
        out[N - n:N + n + 1, N - n:N + n + 1] = src
        return FourierField(N, out)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other: "FourierField") -> tuple[np.ndarray, np.ndarray, int]:
        N = max(self.cutoff, other.cutoff)
        return self.with_cutoff(N).coeffs, other.with_cutoff(N).coeffs, N

    def __add__(self, other):
        if not isinstance(other, FourierField):
            return NotImplemented
        a, b, N = self._coerce(other)
        return FourierField(N, a + b)

    def __sub__(self, other):
        if not isinstance(other, FourierField):
            return NotImplemented
        a, b, N = self._coerce(other)
        return FourierField(N, a - b)

    def __neg__(self):
        return FourierField(self.cutoff, -self.coeffs)

    def __mul__(self, c):
        if isinstance(c, FourierField):
            return NotImplemented
        return FourierField(self.cutoff, float(c) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return FourierField(self.cutoff, self.coeffs / float(c))

    def inner(self, other: "FourierField") -> float:
        """L^2 pairing; the basis is orthonormal so this is a coefficient dot."""
        a, b, _ = self._coerce(other)
        return float(np.sum(a * b))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs ** 2)))

    def allclose(self, other: "FourierField", atol: float = 1e-12) -> bool:
        a, b, _ = self._coerce(other)
        return bool(np.allclose(a, b, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        nz = int(np.count_nonzero(self.coeffs))
        return f"FourierField(cutoff={self.cutoff}, nonzero={nz}, norm={self.norm():.6g})"

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x) -> np.ndarray:
        """Direct (slow) synthesis at points ``x`` of shape ``(..., 2)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for (k1, k2), a in self.items():
            phase = TWO_PI * (k1 * x[..., 0] + k2 * x[..., 1])
            trig = np.cos(phase) if in_upper_half((k1, k2)) else np.sin(phase)
            out = out + SQRT2 * a * trig
        return out

    # -- complex exponential coefficients ------------------------------------

    def to_complex(self) -> np.ndarray:
        """Dense complex coefficients ``c_k`` with ``f = sum_k c_k exp(2 pi i k.x)``."""
        a = self.coeffs
        a_flip = a[::-1, ::-1]
        up = upper_half_mask(self.cutoff)
        c = np.where(up, a + 1j * a_flip, a_flip - 1j * a) / SQRT2
        return np.where(ball_mask(self.cutoff), c, 0.0)

    @classmethod
    def from_complex(cls, c: np.ndarray, N: int) -> "FourierField":
        """Inverse of :meth:`to_complex`; ``c`` must be Hermitian symmetric."""
        up = upper_half_mask(N)
        a = np.where(up, SQRT2 * c.real, -SQRT2 * c.imag)
        return cls(N, a)


@dataclass(frozen=True, eq=False)
class VectorField:
    """A pair of spectral components ``(u1, u2)`` sharing one cutoff."""

    u1: FourierField
    u2: FourierField

    def __post_init__(self):
        if self.u1.cutoff != self.u2.cutoff:
            N = max(self.u1.cutoff, self.u2.cutoff)
            object.__setattr__(self, "u1", self.u1.with_cutoff(N))
            object.__setattr__(self, "u2", self.u2.with_cutoff(N))

    @property
    def cutoff(self) -> int:
        return self.u1.cutoff

    @classmethod
    def zeros(cls, N: int) -> "VectorField":
        return cls(FourierField.zeros(N), FourierField.zeros(N))

    def __add__(self, other):
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c):
        return VectorField(self.u1 * c, self.u2 * c)

    __rmul__ = __mul__

    def inner(self, other: "VectorField") -> float:
        return self.u1.inner(other.u1) + self.u2.inner(other.u2)

    def norm(self) -> float:
        return float(np.sqrt(self.u1.norm() ** 2 + self.u2.norm() ** 2))

    def allclose(self, other: "VectorField", atol: float = 1e-12) -> bool:
        return self.u1.allclose(other.u1, atol) and self.u2.allclose(other.u2, atol)

    def evaluate(self, x) -> np.ndarray:
        return np.stack([self.u1.evaluate(x), self.u2.evaluate(x)], axis=-1)


# -- spectral calculus --------------------------------------------------------


def _partial(f: FourierField, axis: int) -> FourierField:
    # (d_i f) at mode m picks up 2 pi (-m_i) a_{-m}, from grad e_k = 2 pi k e_{-k}.
    K = dense_wavenumbers(f.cutoff)[axis]
    return FourierField(f.cutoff, -TWO_PI * K * f.coeffs[::-1, ::-1])


def gradient(f: FourierField) -> VectorField:
    return VectorField(_partial(f, 0), _partial(f, 1))


def divergence(u: VectorField) -> FourierField:
    return _partial(u.u1, 0) + _partial(u.u2, 1)


def curl(u: VectorField) -> FourierField:
    """Scalar vorticity ``d2 u1 - d1 u2``."""
    return _partial(u.u1, 1) - _partial(u.u2, 0)


def laplacian(f: FourierField) -> FourierField:
    K1, K2 = dense_wavenumbers(f.cutoff)
    return FourierField(f.cutoff, -(TWO_PI ** 2) * (K1 * K1 + K2 * K2) * f.coeffs)


def inverse_laplacian(f: FourierField) -> FourierField:
    K1, K2 = dense_wavenumbers(f.cutoff)
    ksq = (K1 * K1 + K2 * K2).astype(float)
    ksq[f.cutoff, f.cutoff] = 1.0
    return FourierField(f.cutoff, -f.coeffs / ((TWO_PI ** 2) * ksq))


def stream_function(xi: FourierField) -> FourierField:
    """Solve ``lap psi = xi`` on zero-mean fields."""
    return inverse_laplacian(xi)


def biot_savart(xi: FourierField) -> VectorField:
    """Divergence-free zero-mean velocity with ``d2 u1 - d1 u2 = xi``."""
    psi = stream_function(xi)
    return VectorField(_partial(psi, 1), -_partial(psi, 0))


def hessian(f: FourierField) -> tuple[tuple[FourierField, FourierField], tuple[FourierField, FourierField]]:
    g1, g2 = _partial(f, 0), _partial(f, 1)
    return (_partial(g1, 0), _partial(g1, 1)), (_partial(g2, 0), _partial(g2, 1))


def hessian_norm(f: FourierField) -> float:
    """``||grad^2 f||_{L^2}``, i.e. ``4 pi^2 (sum |k|^4 a_k^2)^{1/2}``."""
    return (TWO_PI ** 2) * sobolev_norm(f, 2.0)


def sigma_field(k, N: int | None = None) -> VectorField:
    """Divergence-free noise profile ``sigma_k = (k_perp / |k|) e_k``."""
    k1, k2 = int(k[0]), int(k[1])
    if (k1, k2) == (0, 0):
        raise ValueError("sigma_k is undefined for k = 0")
    e = FourierField.basis((k1, k2), N)
    p1, p2 = perp((k1, k2))
    r = float(np.hypot(k1, k2))
    return VectorField(e * (p1 / r), e * (p2 / r))


def project(f: FourierField, N: int) -> FourierField:
    """Orthogonal projection onto ``span{e_k : |k| <= N}`` (keeps ``f``'s size)."""
    if N >= f.cutoff:
        return f
    return f.with_cutoff(N).with_cutoff(f.cutoff)


def sobolev_norm(f: FourierField, s: float) -> float:
    K1, K2 = dense_wavenumbers(f.cutoff)
    ksq = (K1 * K1 + K2 * K2).astype(float)
    mask = ball_mask(f.cutoff)
    w = np.zeros_like(ksq)
    w[mask] = ksq[mask] ** float(s)
    return float(np.sqrt(np.sum(w * f.coeffs ** 2)))
