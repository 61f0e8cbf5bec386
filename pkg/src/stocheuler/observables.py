"""Per-trajectory diagnostics, bound indicators and ensemble statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from stocheuler.spectral.field import FourierField, sobolev_norm

ALPHA_FACTOR = 8.0 * math.pi ** 2


def decay_rate(nu: float) -> float:
    """``alpha = 8 nu pi^2``, twice the smallest eigenvalue of ``-nu lap``."""
    return ALPHA_FACTOR * nu


def energy(xi: FourierField) -> float:
    """``(1/2)||K * xi||^2 = (1/2) sum a_k^2 / (4 pi^2 |k|^2)``."""
    return 0.5 * sobolev_norm(xi, -1.0) ** 2 / (4.0 * math.pi ** 2)


def enstrophy(xi: FourierField) -> float:
    return float(np.sum(xi.coeffs ** 2))


def interpolation_gap(xi: FourierField, delta: float) -> float:
    """``||xi||_{H^d} ||xi||_{H^-d} - ||xi||^2``; nonnegative by Cauchy-Schwarz."""
    return sobolev_norm(xi, delta) * sobolev_norm(xi, -delta) - enstrophy(xi)


def mixing_pairing(xi: FourierField, f: FourierField, delta: float) -> tuple[float, float]:
    """``(|<xi, f>|, ||xi||_{H^-d} ||f||_{H^d})``; the first never exceeds the second."""
    return abs(xi.inner(f)), sobolev_norm(xi, -delta) * sobolev_norm(f, delta)


# -- records -----------------------------------------------------------------------

CSV_COLUMNS = ("t", "energy", "enstrophy", "hminus", "hplus")


@dataclass
class TrajectoryRecord:
    """Checkpoint time series of one trajectory.

    ``pairings`` maps a tracked mode ``(k1, k2)`` to the values ``<xi_t, e_k>``;
    ``rho_lp`` maps an exponent ``p`` to ``||rho_t||_{L^p}``. ``snapshots``
    optionally keeps full fields at the checkpoints.
    """

    sample: int
    scheme: str
    N: int
    seed: int
    delta: float
    times: np.ndarray
    energy: np.ndarray
    enstrophy: np.ndarray
    hminus: np.ndarray
    hplus: np.ndarray
    pairings: dict = field(default_factory=dict)
    rho_lp: dict = field(default_factory=dict)
    snapshots: list | None = None
    failed: bool = False
    failure: str | None = None

    def __post_init__(self):
        for name in ("times", "energy", "enstrophy", "hminus", "hplus"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.times)
        if n and np.any(np.diff(self.times) <= 0):
            raise ValueError("checkpoint times must be strictly increasing")
        for name in ("energy", "enstrophy", "hminus", "hplus"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has the wrong length")

    @classmethod
    def from_fields(
        cls,
        fields: Sequence[FourierField],
        times,
        delta: float,
        sample: int = 0,
        scheme: str = "",
        N: int | None = None,
        seed: int = 0,
        track: Iterable = (),
        keep_snapshots: bool = False,
    ) -> "TrajectoryRecord":
        track = [tuple(int(c) for c in k) for k in track]
        return cls(
            sample=sample,
            scheme=scheme,
            N=N if N is not None else fields[0].cutoff,
            seed=seed,
            delta=delta,
            times=times,
            energy=[energy(f) for f in fields],
            enstrophy=[enstrophy(f) for f in fields],
            hminus=[sobolev_norm(f, -delta) for f in fields],
            hplus=[sobolev_norm(f, delta) for f in fields],
            pairings={k: np.array([f[k] for f in fields]) for k in track},
            snapshots=list(fields) if keep_snapshots else None,
        )

    def columns(self) -> list[tuple[str, np.ndarray]]:
        cols = [(c, getattr(self, "times" if c == "t" else c)) for c in CSV_COLUMNS]
        for k, v in sorted(self.pairings.items()):
            cols.append((f"pair_{k[0]}_{k[1]}", v))
        for p, v in sorted(self.rho_lp.items()):
            cols.append((f"rho_L{p:g}", v))
        return cols

    def to_csv(self) -> str:
        """CSV text with a commented header describing every column."""
        buf = io.StringIO()
        buf.write(f"# sample={self.sample} scheme={self.scheme} N={self.N} seed={self.seed} delta={self.delta:g}\n")
        buf.write("# t: time; energy: 0.5*||u||^2; enstrophy: ||xi||^2; hminus/hplus: H^-delta / H^+delta norms\n")
        buf.write("# pair_k1_k2: <xi_t, e_k>; rho_Lp: L^p norm of the passive scalar\n")
        if self.failed:
            buf.write(f"# failed: {self.failure}\n")
        cols = self.columns()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([c for c, _ in cols])
        for i in range(len(self.times)):
            writer.writerow([repr(float(v[i])) for _, v in cols])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrajectoryRecord":
        meta = {}
        lines = text.splitlines()
        body = [ln for ln in lines if not ln.startswith("#")]
        for part in lines[0].lstrip("# ").split():
            key, _, val = part.partition("=")
            meta[key] = val
        rows = list(csv.reader(body))
        header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        col = {h: data[:, i] for i, h in enumerate(header)}
        pairings = {}
        rho_lp = {}
        for h, v in col.items():
            if h.startswith("pair_"):
                _, a, b = h.split("_")
                pairings[(int(a), int(b))] = v
            elif h.startswith("rho_L"):
                rho_lp[float(h[5:])] = v
        return cls(
            sample=int(meta["sample"]),
            scheme=meta["scheme"],
            N=int(meta["N"]),
            seed=int(meta["seed"]),
            delta=float(meta["delta"]),
            times=col["t"],
            energy=col["energy"],
            enstrophy=col["enstrophy"],
            hminus=col["hminus"],
            hplus=col["hplus"],
            pairings=pairings,
            rho_lp=rho_lp,
        )


# -- bound indicators ----------------------------------------------------------------


def decay_bound_indicator(rec: TrajectoryRecord, nu: float, eps: float, delta: float | None = None) -> bool:
    """``||xi_t||^2_{H^-d} <= e^{-alpha t}(||xi_0||^2 + eps)`` at every recorded time."""
    if delta is not None and not math.isclose(delta, rec.delta):
        raise ValueError(f"record holds H^-{rec.delta:g} norms, not H^-{delta:g}")
    a = decay_rate(nu)
    env = np.exp(-a * rec.times) * (rec.enstrophy[0] + eps)
    return bool(np.all(rec.hminus ** 2 <= env))


def energy_bound_indicator(rec: TrajectoryRecord, nu: float, eps: float) -> bool:
    """``e(t) <= e^{-alpha t}(e(0) + eps)`` at every recorded time."""
    env = np.exp(-decay_rate(nu) * rec.times) * (rec.energy[0] + eps)
    return bool(np.all(rec.energy <= env))


def growth_bound_indicator(rec: TrajectoryRecord, nu: float, delta: float | None = None) -> bool:
    """``||xi_t||_{H^d} >= (1/2) e^{alpha t / 2} ||xi_0||`` at every recorded time.

    Only meaningful for enstrophy-conserving trajectories, so other schemes are
    rejected.
    """
    if rec.scheme != "stratonovich_conservative":
        raise ValueError(f"growth bound needs a stratonovich_conservative record, got {rec.scheme!r}")
    if delta is not None and not math.isclose(delta, rec.delta):
        raise ValueError(f"record holds H^{rec.delta:g} norms, not H^{delta:g}")
    env = 0.5 * np.exp(0.5 * decay_rate(nu) * rec.times) * math.sqrt(rec.enstrophy[0])
    return bool(np.all(rec.hplus >= env))


# -- ensemble statistics ---------------------------------------------------------------


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def sup_distance(path: Sequence[FourierField], ref: Sequence[FourierField], delta: float) -> float:
    """``max_t ||xi_t - ref_t||_{H^-d}`` over the shared checkpoints."""
    if len(path) != len(ref):
        raise ValueError(f"checkpoint mismatch: {len(path)} sample snapshots vs {len(ref)} reference snapshots")
    out = 0.0
    for a, b in zip(path, ref):
        if a.cutoff > b.cutoff:
            raise ValueError("reference cutoff must be at least the sample cutoff")
        out = max(out, sobolev_norm(a.with_cutoff(b.cutoff) - b, -delta))
    return out


def ensemble_distance(
    samples: Sequence, reference: Sequence[FourierField], delta: float, p: float = 1.0, times=None, ref_times=None
) -> float:
    """``(mean_m max_t ||xi^m_t - ref_t||^p_{H^-d})^{1/p}``.

    ``samples`` holds, per sample, either a list of snapshots or a
    :class:`TrajectoryRecord` with snapshots. Optional time arrays are checked
    for agreement.
    """
    if p < 1:
        raise ValueError(f"moment exponent must be >= 1, got {p}")
    if times is not None and ref_times is not None:
        if len(times) != len(ref_times) or not np.allclose(times, ref_times, rtol=0, atol=1e-12):
            raise ValueError("sample and reference checkpoint times differ")
    if len(samples) == 0:
        raise ValueError("no samples")
    vals = []
    for s in samples:
        if isinstance(s, TrajectoryRecord):
            if times is None and ref_times is not None and not np.allclose(s.times, ref_times, rtol=0, atol=1e-12):
                raise ValueError("sample and reference checkpoint times differ")
            s = s.snapshots
        vals.append(sup_distance(s, reference, delta))
    return float(np.mean(np.asarray(vals) ** p) ** (1.0 / p))


@dataclass
class EnsembleEntry:
    N: int
    samples: int
    completed: int
    failures: int
    D: float
    sup_mean: float
    sup_std: float
    probabilities: dict

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "samples": self.samples,
            "completed": self.completed,
            "failures": self.failures,
            "D": self.D,
            "sup_distance_mean": self.sup_mean,
            "sup_distance_std": self.sup_std,
            "probabilities": self.probabilities,
        }


def summarize(N: int, sups: Sequence[float | None], events: dict[str, Sequence[bool | None]], p: float) -> EnsembleEntry:
    """Fold per-sample results (``None`` marks a failed sample) into one entry."""
    ok = [i for i, s in enumerate(sups) if s is not None]
    arr = np.array([sups[i] for i in ok], dtype=float)
    probs = {}
    for name, flags in events.items():
        hits = sum(1 for i in ok if flags[i])
        lo, hi = wilson_interval(hits, len(ok))
        probs[name] = {
            "p": hits / len(ok) if ok else 0.0,
            "successes": hits,
            "wilson95": [lo, hi],
        }
    return EnsembleEntry(
        N=N,
        samples=len(sups),
        completed=len(ok),
        failures=len(sups) - len(ok),
        D=float(np.mean(arr ** p) ** (1.0 / p)) if ok else float("nan"),
        sup_mean=float(arr.mean()) if ok else float("nan"),
        sup_std=float(arr.std()) if ok else float("nan"),
        probabilities=probs,
    )


SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "reference", "entries"],
    "properties": {
        "config": {"type": "object"},
        "reference": {
            "type": "object",
            "required": ["N_ref", "status"],
            "properties": {"N_ref": {"type": "integer", "minimum": 1}, "status": {"type": "string"}},
        },
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["N", "samples", "completed", "failures", "D", "sup_distance_mean", "sup_distance_std", "probabilities"],
                "properties": {
                    "N": {"type": "integer", "minimum": 1},
                    "samples": {"type": "integer", "minimum": 1},
                    "completed": {"type": "integer", "minimum": 0},
                    "failures": {"type": "integer", "minimum": 0},
                    "D": {"type": ["number", "null"], "minimum": 0},
                    "sup_distance_mean": {"type": ["number", "null"], "minimum": 0},
                    "sup_distance_std": {"type": ["number", "null"], "minimum": 0},
                    "probabilities": {
                        "type": "object",
                        "additionalProperties": {
                            "type": "object",
                            "required": ["p", "successes", "wilson95"],
                            "properties": {
                                "p": {"type": "number", "minimum": 0, "maximum": 1},
                                "successes": {"type": "integer", "minimum": 0},
                                "wilson95": {
                                    "type": "array",
                                    "items": {"type": "number", "minimum": 0, "maximum": 1},
                                    "minItems": 2,
                                    "maxItems": 2,
                                },
                            },
                        },
                    },
                },
            },
        },
    },
}


@dataclass
class EnsembleSummary:
    config: dict
    reference: dict
    entries: list[EnsembleEntry]

    def to_json(self) -> dict:
        return {"config": self.config, "reference": self.reference, "entries": [e.to_json() for e in self.entries]}

    def dumps(self) -> str:
        return json.dumps(_clean(self.to_json()), sort_keys=True, indent=2) + "\n"

    def entry(self, N: int) -> EnsembleEntry:
        for e in self.entries:
            if e.N == N:
                return e
        raise KeyError(N)


def _clean(obj):
    """Make JSON output strict: NaN becomes null, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def validate_summary(doc: dict) -> None:
    import jsonschema

    jsonschema.validate(doc, SUMMARY_SCHEMA)
