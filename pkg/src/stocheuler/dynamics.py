"""Galerkin drift and diffusion fields and the time steppers built on them.

Three schemes share one batched pseudo-spectral engine, :class:`GalerkinSystem`:

* ``ito_dissipative``: ``d xi = [-b_N(xi) + L xi] dt + eps sum_k theta_k G_N^k(xi) dW^k``
  with ``L = nu lap`` (or the Galerkin corrector ``(eps^2/2) C_N``). The linear
  part is integrated exactly, the drift with a Heun correction and the noise
  with a single Euler-Maruyama transport ``Pi_N(dW_field . grad xi)``.
* ``stratonovich_conservative``: ``d xi = -b_N(xi) dt + eps sum_k theta_k G_N^k(xi) o dW^k``
  by implicit midpoint, solved with fixed-point iteration.
* ``deterministic_ns``: integrating factor plus second-order Runge-Kutta.

With zero noise the Ito stepper reduces to exactly the Navier-Stokes stepper.
Arrays in the engine have shape ``(batch, M, M//2 + 1)`` (see
:class:`~stocheuler.spectral.grid.GridOps`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np

from stocheuler.noise.increments import NoiseIncrement, noise_coefficients, sample_increment
from stocheuler.noise.corrector import corrector_symbol
from stocheuler.noise.rng import NoiseStream
from stocheuler.noise.theta import ThetaSequence, epsilon_N
from stocheuler.spectral.field import FourierField, VectorField, sigma_field
from stocheuler.spectral.grid import GridOps, advect_field, grid_ops
from stocheuler.spectral.lattice import mode_index_arrays, modes_up_to

log = logging.getLogger(__name__)

# Sign in front of the dissipative operator. Only fault-injection tests touch it.
VISCOUS_SIGN = 1.0


class SchemeKind(str, Enum):
    ITO = "ito_dissipative"
    STRATONOVICH = "stratonovich_conservative"
    NAVIER_STOKES = "deterministic_ns"


class NumericalFailure(RuntimeError):
    """A trajectory produced non-finite values or a midpoint solve did not converge."""

    def __init__(self, reason: str, step: int | None = None, t: float | None = None):
        super().__init__(reason if step is None else f"{reason} (step {step}, t={t})")
        self.reason = reason
        self.step = step
        self.t = t


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    xi: FourierField
    rho: FourierField | None = None
    step: int = 0


# -- single-field vector fields ------------------------------------------------


def nonlinear_term(xi: FourierField, N: int) -> FourierField:
    """``b_N(xi) = Pi_N((K * Pi_N xi) . grad Pi_N xi)``."""
    ops = grid_ops(N)
    w = ops.pack(xi.with_cutoff(N))
    return ops.unpack(ops.nonlinear(w))


def transport_term(k, xi: FourierField, N: int) -> FourierField:
    """``G_N^k(xi) = Pi_N(sigma_k . grad Pi_N xi)``; identically zero for ``|k| > 2N``."""
    k1, k2 = int(k[0]), int(k[1])
    if (k1, k2) == (0, 0):
        raise ValueError("sigma_k is undefined for k = 0")
    if k1 * k1 + k2 * k2 > 4 * N * N:
        return FourierField.zeros(N)
    return advect_field(sigma_field((k1, k2)), xi.with_cutoff(N), N)


# -- batched engine --------------------------------------------------------------


class GalerkinSystem:
    """Batched Galerkin dynamics at cutoff ``N``.

    ``theta`` (cutoff ``N``) and ``eps`` define the noise; ``diffusion`` picks
    the linear operator of the Ito scheme: ``"viscous"`` for ``nu lap`` or
    ``"corrector"`` for ``(eps^2/2) C_N``.
    """

    def __init__(
        self,
        N: int,
        nu: float,
        theta: ThetaSequence | None = None,
        eps: float | None = None,
        M: int | None = None,
        diffusion: str = "viscous",
        fp_tol: float = 1e-12,
        fp_maxiter: int = 50,
        max_halvings: int = 8,
    ):
        if not nu > 0:
            raise ValueError(f"viscosity must be positive, got {nu}")
        self.N = int(N)
        self.nu = float(nu)
        self.ops: GridOps = grid_ops(self.N, M)
        self.theta = theta
        if theta is not None and theta.cutoff != self.N:
            raise ValueError(f"noise cutoff {theta.cutoff} must equal the Galerkin cutoff {self.N}")
        self.eps = float(epsilon_N(theta, nu) if eps is None and theta is not None else (eps or 0.0))
        self.n_modes = len(modes_up_to(self.N))
        ops = self.ops
        if diffusion == "viscous":
            self.L = VISCOUS_SIGN * self.nu * ops.lap
        elif diffusion == "corrector":
            if theta is None:
                raise ValueError("corrector diffusion needs a theta sequence")
            self.L = VISCOUS_SIGN * 0.5 * self.eps ** 2 * ops.symbol_from_dense(corrector_symbol(theta))
        else:
            raise ValueError(f"unknown diffusion {diffusion!r}; expected 'viscous' or 'corrector'")
        self.diffusion = diffusion
        self.fp_tol = float(fp_tol)
        self.fp_maxiter = int(fp_maxiter)
        self.max_halvings = int(max_halvings)
        self._E_cache: dict[float, np.ndarray] = {}

    # -- helpers -------------------------------------------------------------

    def pack(self, fields) -> np.ndarray:
        return self.ops.pack_dense(np.stack([f.with_cutoff(self.N).coeffs for f in fields]))

    def unpack(self, w: np.ndarray) -> list[FourierField]:
        dense = self.ops.unpack_dense(w)
        return [FourierField(self.N, d) for d in dense.reshape((-1,) + dense.shape[-2:])]

    def propagator(self, dt: float) -> np.ndarray:
        E = self._E_cache.get(dt)
        if E is None:
            E = np.exp(self.L * dt)
            if len(self._E_cache) < 16:
                self._E_cache[dt] = E
        return E

    def noise_velocity(self, dW: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Grid values of ``eps sum_k theta_k sigma_k dW^k`` for a batch of increments."""
        if self.theta is None:
            raise ValueError("system has no noise")
        c1, c2 = noise_coefficients(self.theta, self.eps, dW)
        ops = self.ops
        return ops.to_grid(ops.pack_dense(c1)), ops.to_grid(ops.pack_dense(c2))

    def velocity_grid(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u1, u2 = self.ops.velocity(w)
        return self.ops.to_grid(u1), self.ops.to_grid(u2)

    def nonlinear(self, w: np.ndarray) -> np.ndarray:
        return self.ops.nonlinear(w)

    # -- steppers -------------------------------------------------------------

    def step_rk2(self, w: np.ndarray, dt: float, noise: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        """Integrating-factor Heun step; ``noise`` adds the Ito transport increment."""
        ops = self.ops
        E = self.propagator(dt)
        g1, g2 = ops.gradient_grid(w)
        u1, u2 = self.velocity_grid(w)
        bw = ops.from_grid(u1 * g1 + u2 * g2)
        base = w
        if noise is not None:
            v1, v2 = noise
            base = w + ops.from_grid(v1 * g1 + v2 * g2)
        base = E * base
        Eb = E * bw
        eta = base - dt * Eb
        return base - 0.5 * dt * (Eb + self.nonlinear(eta))

    def _midpoint_solve(self, w, dt, v, guess=None, drift=True):
        """Fixed point ``y = w + Pi_N((v - dt u(m)) . grad m)``, ``m = (w + y)/2``.

        Returns ``(y, converged)``; converged samples are frozen as soon as
        their update falls below tolerance.
        """
        ops = self.ops
        y = w.copy() if guess is None else guess.copy()
        scale = self.fp_tol * (1.0 + np.sqrt(ops.norm_sq(w)))
        active = np.arange(w.shape[0])
        done = np.zeros(w.shape[0], dtype=bool)
        for _ in range(self.fp_maxiter):
            wa = w[active]
            m = 0.5 * (wa + y[active])
            g1, g2 = ops.gradient_grid(m)
            a1 = v[0][active] if v is not None else 0.0
            a2 = v[1][active] if v is not None else 0.0
            if drift:
                u1, u2 = self.velocity_grid(m)
                a1 = a1 - dt * u1
                a2 = a2 - dt * u2
            y_new = wa + ops.from_grid(a1 * g1 + a2 * g2)
            res = np.sqrt(ops.norm_sq(y_new - y[active]))
            y[active] = y_new
            ok = res <= scale[active]
            done[active[ok]] = True
            active = active[~ok]
            if active.size == 0:
                break
        return y, done

    def step_midpoint(
        self,
        w: np.ndarray,
        dt: float,
        dW: np.ndarray | None = None,
        bridge: Callable[[int, int, int], np.ndarray] | None = None,
    ) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Implicit-midpoint Stratonovich step for a batch.

        Samples whose fixed-point iteration stalls are redone with two half
        steps; the half-step increments are drawn as a Brownian bridge from
        ``bridge(sample, depth, position)`` (standard normals per mode).
        Returns ``(new_w, ok, events)``.
        """
        v = self.noise_velocity(dW) if dW is not None else None
        y, done = self._midpoint_solve(w, dt, v)
        ok = done.copy()
        events: list[str] = []
        for s in np.flatnonzero(~done):
            events.append(f"sample-slot {s}: midpoint solve did not converge at dt={dt:g}; halving")
            d = None if dW is None else dW[s]
            res = self._halve(w[s], dt, d, bridge, s, depth=1, pos=0, events=events)
            if res is None:
                ok[s] = False
                y[s] = np.nan
            else:
                y[s] = res
                ok[s] = True
        return y, ok, events

    def _halve(self, w1, dt, dW, bridge, slot, depth, pos, events):
        if depth > self.max_halvings:
            events.append(f"sample-slot {slot}: gave up after {self.max_halvings} halvings")
            return None
        h = 0.5 * dt
        if dW is None:
            parts = (None, None)
        else:
            if bridge is None:
                raise NumericalFailure("midpoint solve failed and no bridge sampler was given")
            z = bridge(slot, depth, pos)
            first = 0.5 * dW + 0.5 * np.sqrt(dt) * z
            parts = (first, dW - first)
        cur = w1
        for i, d in enumerate(parts):
            v = None if d is None else self.noise_velocity(d[None, :])
            y, done = self._midpoint_solve(cur[None], h, v)
            if done[0]:
                cur = y[0]
            else:
                nxt = self._halve(cur, h, d, bridge, slot, depth + 1, 2 * pos + i, events)
                if nxt is None:
                    return None
                cur = nxt
        return cur

    def step_scalar(self, r: np.ndarray, u: tuple[np.ndarray, np.ndarray], dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Implicit-midpoint transport ``rho+ = rho - dt Pi_N(u . grad rho_m)``."""
        v = (-dt * u[0], -dt * u[1])
        y, done = self._midpoint_solve(r, dt, v, drift=False)
        for s in np.flatnonzero(~done):
            out = self._halve_scalar(r[s], (u[0][s], u[1][s]), dt, 1)
            if out is not None:
                y[s] = out
                done[s] = True
            else:
                y[s] = np.nan
        return y, done

    def _halve_scalar(self, r1, u, dt, depth):
        if depth > self.max_halvings:
            return None
        h = 0.5 * dt
        cur = r1
        for _ in range(2):
            y, done = self._midpoint_solve(cur[None], h, (-h * u[0][None], -h * u[1][None]), drift=False)
            if done[0]:
                cur = y[0]
            else:
                cur = self._halve_scalar(cur, u, h, depth + 1)
                if cur is None:
                    return None
        return cur

    # -- diagnostics ----------------------------------------------------------

    def transport_energy(self, w: np.ndarray, chunk: int = 64) -> np.ndarray:
        """``eps^2 sum_k theta_k^2 ||G_N^k(w)||^2`` for each sample in the batch."""
        if self.theta is None:
            return np.zeros(w.shape[0])
        ops = self.ops
        g1, g2 = ops.gradient_grid(w)
        modes = np.array(modes_up_to(self.N), dtype=float)
        r = np.hypot(modes[:, 0], modes[:, 1])
        th = self.theta.mode_values()
        idx_i, idx_j = mode_index_arrays(self.N)
        side = 2 * self.N + 1
        total = np.zeros(w.shape[0])
        for start in range(0, len(modes), chunk):
            sl = slice(start, start + chunk)
            n = len(modes[sl])
            c1 = np.zeros((n, side, side))
            c2 = np.zeros((n, side, side))
            c1[np.arange(n), idx_i[sl], idx_j[sl]] = modes[sl, 1] / r[sl]
            c2[np.arange(n), idx_i[sl], idx_j[sl]] = -modes[sl, 0] / r[sl]
            s1 = ops.to_grid(ops.pack_dense(c1))
            s2 = ops.to_grid(ops.pack_dense(c2))
            G = ops.from_grid(s1[None] * g1[:, None] + s2[None] * g2[:, None])
            total += np.sum(th[sl] ** 2 * ops.norm_sq(G), axis=1)
        return self.eps ** 2 * total

    def enstrophy_rate(self, w: np.ndarray) -> np.ndarray:
        """Drift of ``||xi||^2`` for the Ito system: ``2<L xi, xi> + eps^2 sum theta^2 ||G^k xi||^2``."""
        ops = self.ops
        return 2.0 * ops.inner(self.L * w, w) + self.transport_energy(w)


# -- single-state public API -----------------------------------------------------


def default_dt(nu: float, N: int) -> float:
    return min(1e-3, 0.1 / (nu * 4.0 * np.pi ** 2 * N * N))


def _cfg_dt(cfg) -> float:
    dt = getattr(cfg, "dt", None)
    return default_dt(cfg.nu, cfg.N) if dt is None else float(dt)


def system_for(cfg, N: int | None = None) -> GalerkinSystem:
    """Build (and cache on the config object's values) the engine a config describes."""
    N = cfg.N if N is None else N
    theta = cfg.theta if isinstance(cfg.theta, ThetaSequence) else ThetaSequence.from_config({**cfg.theta, "N": N})
    if theta.cutoff != N:
        theta = theta.with_cutoff(N)
    amp = float(getattr(cfg, "noise_amplitude", 1.0))
    eps = amp * epsilon_N(theta, cfg.nu)
    key = (N, cfg.nu, theta.family, theta.alpha, eps, getattr(cfg, "diffusion", "viscous"))
    sys_ = _SYSTEMS.get(key)
    if sys_ is None:
        sys_ = GalerkinSystem(N, cfg.nu, theta, eps, diffusion=getattr(cfg, "diffusion", "viscous"))
        _SYSTEMS[key] = sys_
    return sys_


_SYSTEMS: dict = {}


def _check(w: np.ndarray, state: SimState) -> None:
    if not np.all(np.isfinite(w)):
        raise NumericalFailure("non-finite coefficients", state.step + 1, state.t)


def step_ito(state: SimState, cfg, stream: NoiseStream, inc: NoiseIncrement | None = None) -> SimState:
    """One dissipative Ito step; the increment is drawn from ``stream`` at ``state.step`` unless given."""
    sys_ = system_for(cfg)
    dt = _cfg_dt(cfg) if inc is None else inc.dt
    if inc is None:
        inc = sample_increment(stream, sys_.theta, dt, state.step)
    w = sys_.pack([state.xi])
    w1 = sys_.step_rk2(w, dt, sys_.noise_velocity(inc.values[None]))
    _check(w1, state)
    return replace(state, t=state.t + dt, xi=sys_.unpack(w1)[0], step=state.step + 1)


def step_stratonovich(state: SimState, cfg, stream: NoiseStream, inc: NoiseIncrement | None = None) -> SimState:
    """One conservative implicit-midpoint Stratonovich step (with passive scalar if present)."""
    from stocheuler.noise.rng import PURPOSE_BRIDGE

    sys_ = system_for(cfg)
    dt = _cfg_dt(cfg) if inc is None else inc.dt
    if inc is None:
        inc = sample_increment(stream, sys_.theta, dt, state.step)

    def bridge(slot, depth, pos):
        return stream.normals(state.step, sys_.n_modes, PURPOSE_BRIDGE, (depth << 32) | pos)

    w = sys_.pack([state.xi])
    w1, ok, events = sys_.step_midpoint(w, dt, inc.values[None], bridge)
    for e in events:
        log.info("step %d: %s", state.step, e)
    if not ok[0]:
        raise NumericalFailure("midpoint solve did not converge", state.step + 1, state.t)
    _check(w1, state)
    rho = state.rho
    if rho is not None:
        u = sys_.velocity_grid(0.5 * (w + w1))
        r1, _ = sys_.step_scalar(sys_.pack([rho]), u, dt)
        _check(r1, state)
        rho = sys_.unpack(r1)[0]
    return replace(state, t=state.t + dt, xi=sys_.unpack(w1)[0], rho=rho, step=state.step + 1)


def step_navier_stokes(state: SimState, cfg) -> SimState:
    """One deterministic step at the reference cutoff ``cfg.N_ref``."""
    N = getattr(cfg, "N_ref", None) or cfg.N
    sys_ = GalerkinSystem(N, cfg.nu)
    dt = _cfg_dt(cfg)
    w = sys_.pack([state.xi])
    w1 = sys_.step_rk2(w, dt)
    _check(w1, state)
    return replace(state, t=state.t + dt, xi=sys_.unpack(w1)[0], step=state.step + 1)


def step_passive_scalar(rho: FourierField, u: VectorField, dt: float) -> FourierField:
    """Implicit-midpoint step of ``d_t rho + u . grad rho = 0`` for a frozen velocity.

    The scalar stays in the Galerkin space of its own cutoff, so ``u`` may not
    carry finer modes than ``rho``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    N = rho.cutoff
    if u.cutoff > N:
        raise ValueError(f"velocity cutoff {u.cutoff} exceeds scalar cutoff {N}")
    ops = grid_ops(N)
    eng = _TransportOnly(ops)
    g = (ops.to_grid(ops.pack(u.u1))[None], ops.to_grid(ops.pack(u.u2))[None])
    r, ok = eng.step_scalar(ops.pack(rho)[None], g, dt)
    if not ok[0]:
        raise NumericalFailure("passive scalar midpoint solve did not converge")
    return ops.unpack(r[0])


class _TransportOnly(GalerkinSystem):
    """Transport-only engine (no viscosity, no noise) on given operator tables."""

    def __init__(self, ops: GridOps):
        self.N = ops.N
        self.ops = ops
        self.theta = None
        self.eps = 0.0
        self.fp_tol = 1e-12
        self.fp_maxiter = 50
        self.max_halvings = 8
