"""Trajectory, ensemble and corrector-study drivers."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from stocheuler import __version__
from stocheuler.dynamics import GalerkinSystem, SchemeKind
from stocheuler.harness.config import SimConfig
from stocheuler.noise.corrector import corrector_error
from stocheuler.noise.rng import PURPOSE_BRIDGE, NoiseStream
from stocheuler.noise.theta import ThetaSequence, corrector_tail, epsilon_N
from stocheuler.observables import (
    EnsembleSummary,
    TrajectoryRecord,
    decay_bound_indicator,
    energy,
    energy_bound_indicator,
    enstrophy,
    growth_bound_indicator,
    summarize,
    sup_distance,
)
from stocheuler.spectral.field import FourierField
from stocheuler.spectral.snapshot import write_snapshot

log = logging.getLogger(__name__)

CHUNK = 16  # samples per batch; fixed so that results never depend on scheduling


@dataclass
class TrajectoryResult:
    sample: int
    snapshots: list[FourierField] | None
    rho_lp: dict = field(default_factory=dict)
    failure: str | None = None
    events: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure is None


def step_plan(cfg: SimConfig, N: int) -> list[tuple[int, float]]:
    """``(n_steps, h)`` for each checkpoint interval; ``h <= dt`` divides it exactly."""
    times = cfg.checkpoint_times()
    dt = cfg.step_size(N)
    plan = []
    for a, b in zip(times[:-1], times[1:]):
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        plan.append((n, (b - a) / n))
    return plan


def build_system(cfg: SimConfig, N: int, scheme: SchemeKind) -> GalerkinSystem:
    if scheme is SchemeKind.NAVIER_STOKES:
        return GalerkinSystem(N, cfg.nu)
    theta = cfg.theta_for(N)
    eps = cfg.noise_amplitude * epsilon_N(theta, cfg.nu)
    return GalerkinSystem(N, cfg.nu, theta, eps, diffusion=cfg.diffusion)


def _lp_norms(sys_: GalerkinSystem, r: np.ndarray, ps) -> dict:
    vals = sys_.ops.to_grid(r)
    out = {}
    for p in ps:
        out[p] = np.mean(np.abs(vals) ** p, axis=(-2, -1)) ** (1.0 / p)
    return out


def run_chunk(cfg: SimConfig, N: int, scheme: SchemeKind, samples: list[int], sys_: GalerkinSystem | None = None) -> list[TrajectoryResult]:
    """Advance a block of independent samples over the checkpoint grid."""
    sys_ = sys_ or build_system(cfg, N, scheme)
    B = len(samples)
    xi0 = cfg.initial.build(N)
    w = np.repeat(sys_.pack([xi0]), B, axis=0)
    has_noise = scheme is not SchemeKind.NAVIER_STOKES and sys_.eps > 0
    streams = [NoiseStream(cfg.seed, s) for s in samples]
    passive = cfg.passive
    r = None
    if passive is not None:
        r = np.repeat(sys_.pack([passive.initial.build(N)]), B, axis=0)
    alive = np.ones(B, dtype=bool)
    failures: list[str | None] = [None] * B
    events: list[list[str]] = [[] for _ in range(B)]
    snaps: list[list[np.ndarray]] = [w.copy()]
    lp: list[dict] = [_lp_norms(sys_, r, passive.p)] if r is not None else []
    step = 0
    times = cfg.checkpoint_times()
    for (n, h), t0 in zip(step_plan(cfg, N), times):
        sqh = math.sqrt(h)
        for j in range(n):
            dW = None
            if has_noise:
                dW = np.stack([s.normals(step, sys_.n_modes) for s in streams]) * sqh
            w_old = w
            if scheme is SchemeKind.STRATONOVICH:
                cur = step

                def bridge(slot, depth, pos, cur=cur):
                    return streams[slot].normals(cur, sys_.n_modes, PURPOSE_BRIDGE, (depth << 32) | pos)

                w, ok, ev = sys_.step_midpoint(w, h, dW, bridge)
                for e in ev:
                    slot = int(e.split()[1].rstrip(":"))
                    events[slot].append(f"step {step}: {e.split(': ', 1)[1]}")
                    log.info("sample %d step %d: %s", samples[slot], step, e)
            else:
                noise = sys_.noise_velocity(dW) if dW is not None else None
                w = sys_.step_rk2(w, h, noise)
                ok = np.ones(B, dtype=bool)
            if r is not None:
                u = sys_.velocity_grid(0.5 * (w_old + w))
                r, rok = sys_.step_scalar(r, u, h)
                ok = ok & rok
            finite = np.all(np.isfinite(w), axis=(-2, -1)) & ok
            if r is not None:
                finite &= np.all(np.isfinite(r), axis=(-2, -1))
            newly = alive & ~finite
            for s in np.flatnonzero(newly):
                failures[s] = f"non-finite state or unconverged solve at step {step + 1} (t={t0 + (j + 1) * h:.6g})"
                log.warning("sample %d failed: %s", samples[s], failures[s])
            alive &= finite
            if not alive.all():
                w = np.where(alive[:, None, None], w, 0.0)
                if r is not None:
                    r = np.where(alive[:, None, None], r, 0.0)
            step += 1
        snaps.append(w.copy())
        if r is not None:
            lp.append(_lp_norms(sys_, r, passive.p))
    results = []
    fields_per = [sys_.ops.unpack_dense(s) for s in snaps]
    for i, s in enumerate(samples):
        if not alive[i]:
            results.append(TrajectoryResult(s, None, failure=failures[i], events=events[i]))
            continue
        snap_i = [FourierField(N, f[i]) for f in fields_per]
        rho_lp = {p: np.array([d[p][i] for d in lp]) for p in passive.p} if r is not None else {}
        results.append(TrajectoryResult(s, snap_i, rho_lp=rho_lp, events=events[i]))
    return results


def run_samples(cfg: SimConfig, N: int, scheme: SchemeKind, n_samples: int, threads: int = 1) -> list[TrajectoryResult]:
    """All samples ``0..n_samples-1`` in fixed chunks, reduced in index order."""
    sys_ = build_system(cfg, N, scheme)
    chunks = [list(range(a, min(a + CHUNK, n_samples))) for a in range(0, n_samples, CHUNK)]
    if threads <= 1 or len(chunks) == 1:
        parts = [run_chunk(cfg, N, scheme, c, sys_) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: run_chunk(cfg, N, scheme, c, sys_), chunks))
    return [r for part in parts for r in part]


def record_of(cfg: SimConfig, res: TrajectoryResult, N: int, scheme: SchemeKind, keep: bool = True) -> TrajectoryRecord:
    times = cfg.checkpoint_times()
    if not res.ok:
        empty = np.zeros(0)
        return TrajectoryRecord(res.sample, scheme.value, N, cfg.seed, cfg.delta, empty, empty, empty, empty, empty,
                                failed=True, failure=res.failure)
    rec = TrajectoryRecord.from_fields(res.snapshots, times, cfg.delta, sample=res.sample, scheme=scheme.value,
                                       N=N, seed=cfg.seed, track=cfg.track, keep_snapshots=keep)
    rec.rho_lp = dict(res.rho_lp)
    return rec


# -- manifest ------------------------------------------------------------------


class Manifest:
    """``manifest.json``: written before the first sample and finalized after the last."""

    def __init__(self, out: Path | None, cfg: SimConfig, command: str):
        self.out = out
        self.doc = {
            "command": command,
            "config": cfg.to_dict(),
            "version": __version__,
            "started": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "status": "running",
            "samples": [],
            "outputs": [],
        }
        self._write()

    def _write(self):
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            (self.out / "manifest.json").write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n")

    def sample(self, N: int, res: TrajectoryResult):
        entry = {"N": N, "sample": res.sample, "status": "completed" if res.ok else "failed"}
        if not res.ok:
            entry["reason"] = res.failure
        if res.events:
            entry["events"] = res.events
        self.doc["samples"].append(entry)

    def output(self, path: Path):
        self.doc["outputs"].append(str(path))

    def finish(self, status: str):
        self.doc["status"] = status
        self.doc["finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        self._write()
        return self.doc


# -- drivers ----------------------------------------------------------------------


@dataclass
class SimulateResult:
    record: TrajectoryRecord
    manifest: dict


def simulate(cfg: SimConfig, out: str | Path | None = None) -> SimulateResult:
    """One trajectory, sample index 0. Deterministic runs use the reference cutoff."""
    out = Path(out) if out is not None else None
    scheme = cfg.scheme_kind
    N = cfg.N_ref if scheme is SchemeKind.NAVIER_STOKES else cfg.N
    man = Manifest(out, cfg, "simulate")
    res = run_chunk(cfg, N, scheme, [0])[0]
    man.sample(N, res)
    rec = record_of(cfg, res, N, scheme)
    if out is not None:
        path = out / "trajectory.csv"
        path.write_text(rec.to_csv())
        man.output(path)
        if res.ok:
            sdir = out / "snapshots"
            sdir.mkdir(exist_ok=True)
            for i, f in enumerate(res.snapshots):
                p = sdir / f"xi_{i:04d}.tnf"
                write_snapshot(p, f)
                man.output(p)
    doc = man.finish("completed" if res.ok else "failed")
    return SimulateResult(rec, doc)


def reference_run(cfg: SimConfig) -> TrajectoryResult:
    ref_cfg = cfg if cfg.dt is not None else replace(cfg, dt=cfg.step_size(cfg.N_ref))
    return run_chunk(replace(ref_cfg, passive=None), cfg.N_ref, SchemeKind.NAVIER_STOKES, [0])[0]


def ensemble(cfg: SimConfig, N_list=None, out: str | Path | None = None, threads: int = 1) -> EnsembleSummary:
    """Reference run at ``N_ref``, then ``cfg.samples`` trajectories per cutoff."""
    N_list = tuple(cfg.N_list if N_list is None else N_list)
    if any(a >= b for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    if max(N_list) > cfg.N_ref:
        raise ValueError(f"N_ref ({cfg.N_ref}) must be >= every entry of N_list {list(N_list)}")
    out = Path(out) if out is not None else None
    man = Manifest(out, cfg, "ensemble")
    scheme = cfg.scheme_kind
    ref = reference_run(cfg)
    if not ref.ok:
        man.finish("failed")
        from stocheuler.dynamics import NumericalFailure

        raise NumericalFailure(f"reference solution failed: {ref.failure}")
    xi0 = cfg.initial.build(cfg.N_ref)
    eps_decay = cfg.bound_eps_factor * enstrophy(xi0)
    eps_energy = cfg.bound_eps_factor * energy(xi0)
    entries = []
    for N in N_list:
        results = run_samples(replace(cfg, N=N), N, scheme, cfg.samples, threads)
        sups: list[float | None] = []
        events: dict[str, list] = {"decay_bound": [], "energy_bound": []}
        if scheme is SchemeKind.STRATONOVICH:
            events["growth_bound"] = []
        rows = []
        for res in results:
            man.sample(N, res)
            if not res.ok:
                sups.append(None)
                for v in events.values():
                    v.append(None)
                rows.append([res.sample, "failed", "", "", "", ""])
                continue
            rec = record_of(cfg, res, N, scheme, keep=False)
            d = sup_distance(res.snapshots, ref.snapshots, cfg.delta)
            sups.append(d)
            flags = {
                "decay_bound": decay_bound_indicator(rec, cfg.nu, eps_decay),
                "energy_bound": energy_bound_indicator(rec, cfg.nu, eps_energy),
            }
            if "growth_bound" in events:
                flags["growth_bound"] = growth_bound_indicator(rec, cfg.nu)
            for k, v in flags.items():
                events[k].append(v)
            rows.append([res.sample, "completed", repr(d), int(flags["decay_bound"]), int(flags["energy_bound"]),
                         int(flags["growth_bound"]) if "growth_bound" in flags else ""])
        entries.append(summarize(N, sups, events, cfg.p))
        if out is not None:
            buf = io.StringIO()
            buf.write(f"# per-sample results at N={N}: sup_t H^-{cfg.delta:g} distance to the reference and bound events\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["sample", "status", "sup_distance", "decay_bound", "energy_bound", "growth_bound"])
            w.writerows(rows)
            path = out / f"ensemble_N{N}.csv"
            path.write_text(buf.getvalue())
            man.output(path)
    summary = EnsembleSummary(
        config=cfg.to_dict(),
        reference={"N_ref": cfg.N_ref, "status": "completed", "scheme": SchemeKind.NAVIER_STOKES.value},
        entries=entries,
    )
    if out is not None:
        path = out / "summary.json"
        path.write_text(summary.dumps())
        man.output(path)
    man.finish("completed")
    return summary


CORRECTOR_COLUMNS = ("family", "alpha", "N", "j1", "j2", "eps_N", "error", "tail")


def corrector_study(theta_spec: dict, nu: float, N_list, j_list) -> list[dict]:
    """Corrector error, tail diagnostic and noise intensity for each ``(N, j)``."""
    rows = []
    for N in N_list:
        theta = ThetaSequence.from_config({**theta_spec, "N": N})
        eps = epsilon_N(theta, nu)
        for j in j_list:
            rows.append({
                "family": theta.family,
                "alpha": theta.alpha,
                "N": N,
                "j1": int(j[0]),
                "j2": int(j[1]),
                "eps_N": eps,
                "error": corrector_error(theta, nu, j),
                "tail": corrector_tail(theta, j),
            })
    return rows


def corrector_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write("# error: L2 norm of (eps_N^2/2) C_N e_j - nu lap e_j; tail: share of theta^2 outside |k - j| <= N\n")
    w = csv.DictWriter(buf, fieldnames=CORRECTOR_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
