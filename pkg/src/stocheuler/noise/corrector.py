"""The Galerkin Ito-Stratonovich corrector ``C_N``.

``C_N phi = sum_k theta_k^2 sigma_k . grad Pi_N(sigma_k . grad phi)``.
It is also the convolution ``(Pi_N A_N) * grad^2 phi``, so it acts on each
basis function by a scalar: ``C_N e_j = m(j) e_j``. Both evaluation routes
are provided; each is the other's cross-check.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from stocheuler.noise.theta import ThetaSequence
from stocheuler.spectral.field import FourierField, laplacian, sigma_field
from stocheuler.spectral.grid import advect_field, grid_ops, grid_size
from stocheuler.spectral.lattice import modes_up_to

TWO_PI = 2.0 * np.pi


def _theta_key(theta: ThetaSequence):
    return theta.family, theta.cutoff, theta.alpha, theta.values.tobytes()


@lru_cache(maxsize=32)
def _symbol_cached(key, n_out: int) -> np.ndarray:
    family, N, alpha, raw = key
    values = np.frombuffer(raw).reshape(2 * N + 1, 2 * N + 1)
    n = max(N, n_out)
    M = grid_size(n_out, 2 * N)
    while M < 2 * n + 2:
        M *= 2
    ops = grid_ops(n, M)
    k1, k2, ksq = ops.k1, ops.k2, ops.ksq
    inside = (ksq <= N * N) & (ksq > 0)
    safe = np.where(inside, ksq, 1.0)
    # theta_k^2 on the rfft layout (theta is even in k)
    rows = np.rint(k1).astype(int)
    cols = np.rint(k2).astype(int)
    th2 = np.zeros(ops.shape)
    sel = inside & (np.abs(rows) <= N) & (cols <= N)
    th2[sel] = values[rows[sel] + N, cols[sel] + N] ** 2
    # Fourier coefficients of the projection kernel and of A_N
    pi_grid = ops.to_grid(inside.astype(complex))
    a11 = ops.to_grid((th2 * k2 * k2 / safe).astype(complex))
    a12 = ops.to_grid((th2 * (-k1 * k2) / safe).astype(complex))
    a22 = ops.to_grid((th2 * k1 * k1 / safe).astype(complex))
    p11 = np.fft.rfft2(pi_grid * a11, norm="forward").real
    p12 = np.fft.rfft2(pi_grid * a12, norm="forward").real
    p22 = np.fft.rfft2(pi_grid * a22, norm="forward").real
    sym_half = -(TWO_PI ** 2) * (p11 * k1 * k1 + 2.0 * p12 * k1 * k2 + p22 * k2 * k2)
    # dense (2n_out+1)^2 table; the symbol is even so k2 < 0 mirrors k2 > 0
    r = np.arange(-n_out, n_out + 1)
    J1, J2 = np.meshgrid(r, r, indexing="ij")
    s1 = np.where(J2 >= 0, J1, -J1)
    s2 = np.abs(J2)
    dense = sym_half[s1 % M, s2]
    dense[n_out, n_out] = 0.0
    dense.flags.writeable = False
    return dense


def corrector_symbol(theta: ThetaSequence, n_out: int | None = None) -> np.ndarray:
    """Dense table of ``m(j)`` with ``C_N e_j = m(j) e_j`` for ``|j|_inf <= n_out``.

    Computed as the Fourier transform of the kernel product ``Pi_N(z) A_N(z)``
    contracted with ``-4 pi^2 j (x) j``.
    """
    n_out = theta.cutoff if n_out is None else int(n_out)
    return _symbol_cached(_theta_key(theta), n_out)


def corrector_symbol_brute(theta: ThetaSequence, j) -> float:
    """``m(j)`` by an explicit lattice sum over ``0 < |m - j| <= N``."""
    N = theta.cutoff
    j1, j2 = int(j[0]), int(j[1])
    total = 0.0
    for (m1, m2), th in zip(modes_up_to(N), theta.mode_values()):
        d = (m1 - j1) ** 2 + (m2 - j2) ** 2
        if 0 < d <= N * N:
            total += th ** 2 * (m2 * j1 - m1 * j2) ** 2 / (m1 * m1 + m2 * m2)
    return -(TWO_PI ** 2) * total


def _corrector_direct(theta: ThetaSequence, phi: FourierField) -> FourierField:
    N = theta.cutoff
    acc = FourierField.zeros(2 * N)
    for k, th in zip(modes_up_to(N), theta.mode_values()):
        if th == 0.0:
            continue
        s = sigma_field(k, N)
        inner = advect_field(s, phi, N)
        acc = acc + (th * th) * advect_field(s, inner, 2 * N)
    return acc


def corrector_apply(theta: ThetaSequence, phi: FourierField, method: str = "convolution") -> FourierField:
    """Apply ``C_N`` to ``phi`` (``phi.cutoff <= N`` required).

    ``method="direct"`` sums the definition term by term and returns a field
    of cutoff ``2N`` (its modes above ``N`` cancel); ``"convolution"`` uses
    the kernel form and returns a field of ``phi``'s cutoff.
    """
    N = theta.cutoff
    if phi.cutoff > N:
        raise ValueError(f"corrector needs a test function with cutoff <= {N}, got {phi.cutoff}")
    if method == "direct":
        return _corrector_direct(theta, phi)
    if method != "convolution":
        raise ValueError(f"unknown corrector method {method!r}")
    sym = corrector_symbol(theta, phi.cutoff)
    return FourierField(phi.cutoff, sym * phi.coeffs)


def corrector_error(theta: ThetaSequence, nu: float, j) -> float:
    """``||(eps_N^2/2) C_N e_j - nu lap e_j||_{L^2}`` for the basis function ``e_j``."""
    from stocheuler.noise.theta import epsilon_N

    eps = epsilon_N(theta, nu)
    ej = FourierField.basis(j, theta.cutoff)
    diff = corrector_apply(theta, ej) * (0.5 * eps * eps) - laplacian(ej) * nu
    return diff.norm()
