"""Self-check suite behind ``stocheuler verify``.

Every check has a stable identifier and an anchor string naming the identity
or bound it exercises. Failures are collected, never short-circuited.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from stocheuler import dynamics
from stocheuler.noise import (
    NoiseStream,
    ThetaSequence,
    corrector_apply,
    corrector_error,
    covariance,
    covariance_direct,
    epsilon_N,
    isotropy_defect,
)
from stocheuler.observables import interpolation_gap
from stocheuler.spectral import FourierField, biot_savart, hessian_norm, sigma_field, sobolev_norm
from stocheuler.spectral.field import gradient


@dataclass
class CheckResult:
    name: str
    anchor: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name:32s} {self.seconds:7.2f}s  [{self.anchor}]  {self.detail}"


@dataclass
class Check:
    name: str
    anchor: str
    level: str
    fn: Callable[[], tuple[bool, str]]


def _random_field(rng, N, scale=1.0) -> FourierField:
    return FourierField(N, scale * rng.standard_normal((2 * N + 1, 2 * N + 1)))


def check_isotropy():
    rng = np.random.default_rng(11)
    x = rng.random((100, 2))
    worst = max(
        float(np.max(isotropy_defect(th, x))) for th in (ThetaSequence.indicator(8), ThetaSequence.power(8, 1.0))
    )
    return worst <= 1e-10, f"max defect {worst:.2e}"


def check_covariance():
    rng = np.random.default_rng(12)
    th = ThetaSequence.indicator(4)
    x, y = rng.random((20, 2)), rng.random((20, 2))
    err = float(np.max(np.abs(covariance_direct(th, x, y) - covariance(th, x - y))))
    return err <= 1e-10, f"max |direct - reduced| {err:.2e}"


def check_pairing_nonlinear():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(50):
        xi = _random_field(rng, 8)
        worst = max(worst, abs(dynamics.nonlinear_term(xi, 8).inner(xi)) / xi.norm() ** 3)
    return worst <= 1e-10, f"max |<b(xi),xi>|/|xi|^3 {worst:.2e}"


def check_pairing_transport():
    rng = np.random.default_rng(14)
    ks = [(k1, k2) for k1 in range(-4, 5) for k2 in range(-4, 5) if 0 < k1 * k1 + k2 * k2 <= 16]
    worst = 0.0
    for _ in range(5):
        xi = _random_field(rng, 8)
        for k in ks:
            worst = max(worst, abs(dynamics.transport_term(k, xi, 8).inner(xi)) / xi.norm() ** 2)
    return worst <= 1e-12, f"max |<G^k(xi),xi>|/|xi|^2 {worst:.2e}"


def check_drift_inequality():
    """Enstrophy drift of the dissipative Ito system must be nonpositive."""
    rng = np.random.default_rng(15)
    nu = 0.01
    sys_ = dynamics.GalerkinSystem(8, nu, ThetaSequence.indicator(8))
    xs = [_random_field(rng, 8) for _ in range(50)]
    w = sys_.pack(xs)
    rate = sys_.enstrophy_rate(w)
    grad_sq = np.array([gradient(x).norm() ** 2 for x in xs])
    trans = sys_.transport_energy(w)
    rel = float(np.max(rate / grad_sq))
    excess = float(np.max(trans - 4 * nu * grad_sq))
    ok = rel <= 1e-10 and excess <= 1e-10
    return ok, f"max rate/|grad xi|^2 {rel:.3e}, max transport - 4 nu |grad xi|^2 {excess:.3e}"


def check_corrector_routes():
    rng = np.random.default_rng(16)
    th = ThetaSequence.indicator(4)
    phi = _random_field(rng, 4)
    a = corrector_apply(th, phi, "direct")
    b = corrector_apply(th, phi, "convolution")
    err = (a - b).norm() / b.norm()
    return err <= 1e-10, f"relative |direct - convolution| {err:.2e}"


def check_corrector_bound():
    rng = np.random.default_rng(17)
    nu = 0.01
    worst = 0.0
    for N in (2, 4, 8):
        th = ThetaSequence.indicator(N)
        eps = epsilon_N(th, nu)
        for _ in range(5):
            phi = _random_field(rng, N)
            c = corrector_apply(th, phi).norm()
            worst = max(worst, 0.5 * eps ** 2 * c / (2 * nu * hessian_norm(phi)))
            worst = max(worst, c / (th.l2_norm_sq() * hessian_norm(phi)))
    return worst <= 1 + 1e-12, f"max ratio to bound {worst:.4f}"


def check_interpolation():
    rng = np.random.default_rng(18)
    gaps = [interpolation_gap(_random_field(rng, 8), d) for d in (0.25, 0.5, 1.0) for _ in range(30)]
    worst = float(min(gaps))
    return worst >= -1e-12, f"min gap {worst:.2e}"


def check_sobolev_order():
    rng = np.random.default_rng(19)
    bad = 0
    for _ in range(50):
        f = _random_field(rng, 8)
        a, b, c = sobolev_norm(f, -0.5), sobolev_norm(f, 0), sobolev_norm(f, 0.5)
        bad += not (a <= b * (1 + 1e-14) and b <= c * (1 + 1e-14))
    return bad == 0, f"{bad} violations"


def _conservation_run(steps: int, seeds: int):
    nu = 0.01
    th = ThetaSequence.indicator(8)
    sys_ = dynamics.GalerkinSystem(8, nu, th)
    xi0 = FourierField.from_modes(8, {(1, 0): 1.0, (1, 1): 1.0, (2, -1): 0.5})
    w = np.repeat(sys_.pack([xi0]), seeds, axis=0)
    e0 = sys_.ops.norm_sq(w)
    streams = [NoiseStream(7, s) for s in range(seeds)]
    dt = 1e-3
    for n in range(steps):
        dW = np.stack([s.normals(n, sys_.n_modes) for s in streams]) * math.sqrt(dt)
        w, ok, _ = sys_.step_midpoint(w, dt, dW)
        if not ok.all():
            return False, f"midpoint solve failed at step {n}"
    drift = float(np.max(np.abs(sys_.ops.norm_sq(w) / e0 - 1)))
    return drift <= 1e-6, f"max relative enstrophy drift {drift:.2e} over {steps} steps"


def check_ns_decay():
    nu, dt = 0.01, 1e-3
    sys_ = dynamics.GalerkinSystem(8, nu)
    w = sys_.pack([FourierField.basis((1, 0), 8)])
    for _ in range(1000):
        w = sys_.step_rk2(w, dt)
    a = sys_.unpack(w)[0][(1, 0)]
    err = abs(a - math.exp(-4 * math.pi ** 2 * nu))
    return err <= 1e-8, f"|a(1) - exp(-4 pi^2 nu)| {err:.2e}"


def check_scalar_conservation():
    rng = np.random.default_rng(20)
    u = biot_savart(_random_field(rng, 8, 2.0))
    rho = _random_field(rng, 8)
    n0 = rho.norm()
    for _ in range(100):
        rho = dynamics.step_passive_scalar(rho, u, 1e-3)
    drift = abs(rho.norm() / n0 - 1)
    return drift <= 1e-6, f"relative L2 drift {drift:.2e} over 100 steps"


def check_characteristics():
    from stocheuler.spectral import grid_points, to_grid

    u = sigma_field((0, 1), 8)
    rho = FourierField.basis((1, 0), 8)
    dt, T = 1e-4, 0.1
    for _ in range(int(round(T / dt))):
        rho = dynamics.step_passive_scalar(rho, u, dt)
    x = grid_points(64)
    exact = math.sqrt(2) * np.cos(2 * np.pi * (x[..., 0] - T * math.sqrt(2) * np.cos(2 * np.pi * x[..., 1])))
    err = float(np.sqrt(np.mean((to_grid(rho, 64) - exact) ** 2)))
    return err <= 1e-3, f"L2 error vs characteristics {err:.2e}"


def check_rng():
    a = NoiseStream(123, 4).normals(17, 50)
    b = NoiseStream(123, 4).normals(17, 50)
    c = NoiseStream(123, 5).normals(17, 50)
    ok = np.array_equal(a, b) and not np.array_equal(a, c)
    return ok, "stream reproducible and sample-separated" if ok else "stream mismatch"


def check_ito_energy():
    nu, dt = 0.01, 1e-3
    th = ThetaSequence.indicator(8)
    sys_ = dynamics.GalerkinSystem(8, nu, th)
    xi0 = FourierField.from_modes(8, {(1, 0): 1.0, (1, 1): 1.0})
    seeds = 20
    w = np.repeat(sys_.pack([xi0]), seeds, axis=0)
    n0 = math.sqrt(xi0.inner(xi0))
    streams = [NoiseStream(99, s) for s in range(seeds)]
    worst = 0.0
    for n in range(1000):
        dW = np.stack([s.normals(n, sys_.n_modes) for s in streams]) * math.sqrt(dt)
        w = sys_.step_rk2(w, dt, sys_.noise_velocity(dW))
        worst = max(worst, float(np.max(np.sqrt(sys_.ops.norm_sq(w)))) / n0)
    return worst <= 1 + 1e-3, f"max |xi_t|/|xi_0| {worst:.6f}"


def check_corrector_convergence():
    errs = [corrector_error(ThetaSequence.indicator(N), 0.01, (1, 0)) for N in (4, 8, 16, 32, 64)]
    ok = all(a > b for a, b in zip(errs, errs[1:])) and errs[-1] <= 0.1 * errs[0]
    return ok, "errors " + ", ".join(f"{e:.3e}" for e in errs)


CHECKS = [
    Check("isotropy_identity", "sum theta_k^2 sigma_k(x) (x) sigma_k(x) = |theta|^2/2 I for radial theta", "fast", check_isotropy),
    Check("covariance_forms", "covariance as a double basis sum equals its half-lattice cosine series", "fast", check_covariance),
    Check("pairing_nonlinear", "<b_N(xi), xi> = 0 on the Galerkin space", "fast", check_pairing_nonlinear),
    Check("pairing_transport", "<G_N^k(xi), xi> = 0 on the Galerkin space", "fast", check_pairing_transport),
    Check("ito_drift_inequality", "eps^2 sum theta^2 |G^k xi|^2 <= 2 nu |grad xi|^2 so the Ito enstrophy drift is <= 0", "fast", check_drift_inequality),
    Check("corrector_routes", "C_N as a double transport equals (Pi_N A_N) * grad^2", "fast", check_corrector_routes),
    Check("corrector_bound", "|C_N phi| <= |theta|^2 |grad^2 phi|, i.e. (eps^2/2)|C_N phi| <= 2 nu |grad^2 phi|", "fast", check_corrector_bound),
    Check("interpolation_inequality", "|xi|^2 <= |xi|_{H^d} |xi|_{H^-d}", "fast", check_interpolation),
    Check("sobolev_ordering", "H^-d <= L2 <= H^d when all modes have |k| >= 1", "fast", check_sobolev_order),
    Check("stratonovich_conservation", "Stratonovich transport noise conserves enstrophy", "fast", lambda: _conservation_run(200, 4)),
    Check("ns_single_mode_decay", "single Fourier modes are steady Euler states and decay like exp(-4 pi^2 nu t)", "fast", check_ns_decay),
    Check("passive_scalar_conservation", "divergence-free transport conserves L2 norms", "fast", check_scalar_conservation),
    Check("rng_reproducibility", "increments depend only on (seed, sample, step)", "fast", check_rng),
    Check("stratonovich_conservation_long", "Stratonovich transport noise conserves enstrophy", "full", lambda: _conservation_run(1000, 10)),
    Check("characteristics_oracle", "shear transport matches the method of characteristics", "full", check_characteristics),
    Check("ito_energy_estimate", "sup_t |xi_t| <= |xi_0| for the dissipative Ito system", "full", check_ito_energy),
    Check("corrector_convergence", "(eps_N^2/2) C_N -> nu lap as the noise spreads to high modes", "full", check_corrector_convergence),
]


def run_checks(level: str = "fast", only: list[str] | None = None) -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    selected = [c for c in CHECKS if (level == "full" or c.level == "fast") and (only is None or c.name in only)]
    out = []
    for c in selected:
        t0 = time.perf_counter()
        try:
            ok, detail = c.fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append(CheckResult(c.name, c.anchor, bool(ok), detail, time.perf_counter() - t0))
    return out
