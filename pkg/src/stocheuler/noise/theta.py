"""Noise coefficient families, the noise scaling, covariance and isotropy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from stocheuler.spectral.lattice import (
    SQRT2,
    ball_mask,
    dense_wavenumbers,
    mode_index_arrays,
    modes_up_to,
)

FAMILIES = ("indicator", "power")


@dataclass(frozen=True, eq=False)
class ThetaSequence:
    """Radially symmetric, finitely supported coefficients ``theta_k``.

    ``indicator``: ``theta_k = 1`` for ``|k| <= N``.
    ``power``: ``theta_k = |k|^(-alpha)`` for ``|k| <= N``. The Galerkin
    corrector converges for ``alpha`` in ``[0, 1]``; larger exponents are
    accepted (they are useful as counterexamples) and flagged by
    :attr:`tail_condition_expected`.
    """

    family: str
    cutoff: int
    alpha: float = 0.0
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        N = int(self.cutoff)
        if N < 1:
            raise ValueError(f"theta cutoff must be >= 1, got {self.cutoff}")
        object.__setattr__(self, "cutoff", N)
        K1, K2 = dense_wavenumbers(N)
        r = np.sqrt((K1 * K1 + K2 * K2).astype(float))
        mask = ball_mask(N)
        if self.family == "indicator":
            vals = mask.astype(float)
        elif self.family == "power":
            if not (self.alpha >= 0 and math.isfinite(self.alpha)):
                raise ValueError(f"power family needs a finite alpha >= 0, got {self.alpha}")
            vals = np.zeros_like(r)
            vals[mask] = r[mask] ** (-float(self.alpha))
        elif self.family == "custom":
            if self.values is None:
                raise ValueError("custom theta needs explicit values")
            vals = np.where(mask, np.asarray(self.values, dtype=float), 0.0)
            if vals.shape != mask.shape:
                raise ValueError(f"custom theta values must have shape {mask.shape}")
        else:
            raise ValueError(f"unknown theta family {self.family!r}; expected one of {FAMILIES}")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("theta coefficients must be finite and nonnegative")
        if not np.any(vals > 0):
            raise ValueError("theta must have positive l2 norm")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def indicator(cls, N: int) -> "ThetaSequence":
        return cls("indicator", N)

    @classmethod
    def power(cls, N: int, alpha: float) -> "ThetaSequence":
        return cls("power", N, float(alpha))

    @classmethod
    def custom(cls, N: int, values: np.ndarray | Mapping, check_radial: bool = True) -> "ThetaSequence":
        """User-supplied coefficients; radial symmetry is enforced unless disabled."""
        if isinstance(values, Mapping):
            arr = np.zeros((2 * N + 1, 2 * N + 1))
            for (k1, k2), v in values.items():
                arr[k1 + N, k2 + N] = v
            values = arr
        theta = cls("custom", N, 0.0, np.asarray(values, dtype=float))
        if check_radial and not theta.is_radial():
            raise ValueError("theta must satisfy theta_k = theta_j whenever |k| = |j|")
        return theta

    @classmethod
    def from_config(cls, spec: Mapping) -> "ThetaSequence":
        family = spec.get("family", "indicator")
        N = int(spec["N"])
        if family == "indicator":
            return cls.indicator(N)
        if family == "power":
            return cls.power(N, float(spec.get("alpha", 0.0)))
        raise ValueError(f"unknown theta family {family!r}; expected one of {FAMILIES}")

    def with_cutoff(self, N: int) -> "ThetaSequence":
        if self.family == "custom":
            raise ValueError("custom theta sequences cannot be re-cut")
        return ThetaSequence(self.family, N, self.alpha)

    # -- accessors ------------------------------------------------------------

    def __getitem__(self, k) -> float:
        N = self.cutoff
        k1, k2 = int(k[0]), int(k[1])
        if max(abs(k1), abs(k2)) > N:
            return 0.0
        return float(self.values[k1 + N, k2 + N])

    def mode_values(self) -> np.ndarray:
        """``theta_k`` for ``k`` in ``modes_up_to(N)`` order."""
        i, j = mode_index_arrays(self.cutoff)
        return self.values[i, j]

    def l2_norm_sq(self) -> float:
        return float(np.sum(self.values ** 2))

    def l2_norm(self) -> float:
        return math.sqrt(self.l2_norm_sq())

    def linf_norm(self) -> float:
        return float(np.max(self.values))

    def concentration(self) -> float:
        """``||theta||_inf / ||theta||_2``; must vanish along a scaling sequence."""
        return self.linf_norm() / self.l2_norm()

    @property
    def tail_condition_expected(self) -> bool:
        return self.family == "indicator" or (self.family == "power" and self.alpha <= 1.0)

    def is_radial(self, tol: float = 0.0) -> bool:
        K1, K2 = dense_wavenumbers(self.cutoff)
        ksq = K1 * K1 + K2 * K2
        for r2 in np.unique(ksq[ball_mask(self.cutoff)]):
            shell = self.values[ksq == r2]
            if shell.max() - shell.min() > tol:
                return False
        return True

    def to_config(self) -> dict:
        out = {"family": self.family, "N": self.cutoff}
        if self.family == "power":
            out["alpha"] = self.alpha
        return out


def epsilon_N(theta: ThetaSequence, nu: float) -> float:
    """Noise intensity ``2 sqrt(nu) / ||theta||_2`` that balances the corrector."""
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    norm = theta.l2_norm()
    if norm == 0:
        raise ValueError("theta has zero l2 norm")
    return 2.0 * math.sqrt(nu) / norm


def _mode_tables(theta: ThetaSequence):
    modes = np.array(modes_up_to(theta.cutoff), dtype=float)
    r = np.hypot(modes[:, 0], modes[:, 1])
    kperp = np.stack([modes[:, 1], -modes[:, 0]], axis=1) / r[:, None]
    upper = (modes[:, 0] > 0) | ((modes[:, 0] == 0) & (modes[:, 1] > 0))
    return modes, kperp, upper, theta.mode_values()


def _basis_at(modes: np.ndarray, upper: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``e_k(x)`` for all modes (rows) at points ``x`` (``(..., 2)``)."""
    phase = 2.0 * np.pi * (x[..., None, 0] * modes[:, 0] + x[..., None, 1] * modes[:, 1])
    return SQRT2 * np.where(upper, np.cos(phase), np.sin(phase))


def covariance_direct(theta: ThetaSequence, x, y) -> np.ndarray:
    """``sum_k theta_k^2 sigma_k(x) (x) sigma_k(y)`` by brute force."""
    modes, kperp, upper, th = _mode_tables(theta)
    ex = _basis_at(modes, upper, np.asarray(x, dtype=float))
    ey = _basis_at(modes, upper, np.asarray(y, dtype=float))
    w = th ** 2 * ex * ey
    return np.einsum("...k,ki,kj->...ij", w, kperp, kperp)


def covariance(theta: ThetaSequence, r) -> np.ndarray:
    """Homogeneous covariance ``A(r)`` from the half-lattice cosine series."""
    modes, kperp, upper, th = _mode_tables(theta)
    r = np.asarray(r, dtype=float)
    e = _basis_at(modes[upper], upper[upper], r)
    w = SQRT2 * th[upper] ** 2 * e
    return np.einsum("...k,ki,kj->...ij", w, kperp[upper], kperp[upper])


def isotropy_defect(theta: ThetaSequence, x) -> float | np.ndarray:
    """Frobenius distance of ``sum theta^2 sigma (x) sigma`` from ``||theta||^2/2 I``."""
    x = np.asarray(x, dtype=float)
    A = covariance_direct(theta, x, x)
    target = 0.5 * theta.l2_norm_sq() * np.eye(2)
    d = np.sqrt(np.sum((A - target) ** 2, axis=(-2, -1)))
    return float(d) if np.ndim(d) == 0 else d


def corrector_tail(theta: ThetaSequence, j) -> float:
    """``||theta||^-2 sum_{|k - j| > N} theta_k^2`` for the support cutoff ``N``."""
    j1, j2 = int(j[0]), int(j[1])
    if (j1, j2) == (0, 0):
        raise ValueError("tail diagnostic is defined for j != 0")
    N = theta.cutoff
    K1, K2 = dense_wavenumbers(N)
    far = (K1 - j1) ** 2 + (K2 - j2) ** 2 > N * N
    return float(np.sum(theta.values[far] ** 2) / theta.l2_norm_sq())
