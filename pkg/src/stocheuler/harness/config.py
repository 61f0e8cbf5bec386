"""Experiment configuration: schema, validation, YAML round trip and overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from stocheuler.dynamics import SchemeKind, default_dt
from stocheuler.noise.rng import PURPOSE_INITIAL, NoiseStream
from stocheuler.noise.theta import ThetaSequence
from stocheuler.spectral.field import FourierField
from stocheuler.spectral.lattice import modes_up_to

U64_MAX = (1 << 64) - 1
INITIAL_KINDS = ("explicit", "single_mode", "two_mode", "random_spectrum")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(field, message)`` pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))


def _mode(k) -> tuple[int, int]:
    k1, k2 = k
    if int(k1) != k1 or int(k2) != k2:
        raise ValueError(f"mode {k!r} must have integer components")
    return int(k1), int(k2)


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial vorticity (or passive scalar) description.

    ``explicit`` uses ``modes`` = ``((k1, k2), a_k)`` pairs; ``single_mode``
    is ``e_k``; ``two_mode`` is ``e_(1,0) + e_(1,1)``; ``random_spectrum``
    draws ``a_k`` uniformly in ``[-|k|^-s, |k|^-s]`` for ``|k| <= radius``
    from its own ``seed``.
    """

    kind: str = "two_mode"
    modes: tuple = ()
    k: tuple = (1, 0)
    decay: float = 2.0
    radius: int = 4
    seed: int = 0

    def build(self, N: int) -> FourierField:
        if self.kind == "explicit":
            return FourierField.from_modes(N, [(_mode(k), a) for k, a in self.modes])
        if self.kind == "single_mode":
            return FourierField.from_modes(N, {_mode(self.k): 1.0})
        if self.kind == "two_mode":
            return FourierField.from_modes(N, {(1, 0): 1.0, (1, 1): 1.0})
        if self.kind == "random_spectrum":
            R = min(self.radius, N)
            modes = modes_up_to(R)
            u = NoiseStream(self.seed, 0).uniforms(len(modes), PURPOSE_INITIAL)
            amp = [(2.0 * ui - 1.0) * math.hypot(*k) ** (-self.decay) for k, ui in zip(modes, u)]
            return FourierField.from_modes(N, list(zip(modes, amp)))
        raise ValueError(f"unknown initial data kind {self.kind!r}")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "explicit":
            d["modes"] = [[list(k), float(a)] for k, a in self.modes]
        elif self.kind == "single_mode":
            d["k"] = list(self.k)
        elif self.kind == "random_spectrum":
            d.update(decay=self.decay, radius=self.radius, seed=self.seed)
        return d

    @classmethod
    def from_dict(cls, d: Mapping, where: str = "initial") -> "InitialDataSpec":
        d = dict(d)
        errs: list[tuple[str, str]] = []
        kind = d.pop("kind", "two_mode")
        if kind not in INITIAL_KINDS:
            raise ConfigError([(f"{where}.kind", f"must be one of {INITIAL_KINDS}, got {kind!r}")])
        kw: dict[str, Any] = {"kind": kind}
        try:
            if "modes" in d:
                kw["modes"] = tuple((_mode(k), float(a)) for k, a in d.pop("modes"))
            if "k" in d:
                kw["k"] = _mode(d.pop("k"))
            for name, typ in (("decay", float), ("radius", int), ("seed", int)):
                if name in d:
                    kw[name] = typ(d.pop(name))
        except (TypeError, ValueError) as exc:
            errs.append((where, str(exc)))
        for extra in d:
            errs.append((f"{where}.{extra}", "unknown key"))
        if errs:
            raise ConfigError(errs)
        spec = cls(**kw)
        if kind == "explicit" and not spec.modes:
            errs.append((f"{where}.modes", "explicit initial data needs at least one mode"))
        if kind == "single_mode" and spec.k == (0, 0):
            errs.append((f"{where}.k", "the zero mode is not a field mode"))
        if kind == "random_spectrum" and spec.radius < 1:
            errs.append((f"{where}.radius", "must be >= 1"))
        if errs:
            raise ConfigError(errs)
        return spec


@dataclass(frozen=True)
class PassiveScalarSpec:
    initial: InitialDataSpec = field(default_factory=lambda: InitialDataSpec("single_mode", k=(1, 0)))
    p: tuple = (2.0,)

    def to_dict(self) -> dict:
        return {"initial": self.initial.to_dict(), "p": [float(x) for x in self.p]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PassiveScalarSpec":
        d = dict(d)
        init = InitialDataSpec.from_dict(d.pop("initial", {"kind": "single_mode", "k": [1, 0]}), "passive.initial")
        p = tuple(float(x) for x in d.pop("p", [2.0]))
        errs = [(f"passive.{k}", "unknown key") for k in d]
        errs += [("passive.p", f"exponents must be >= 1, got {x}") for x in p if not x >= 1]
        if errs:
            raise ConfigError(errs)
        return cls(init, p)


@dataclass(frozen=True)
class SimConfig:
    nu: float = 0.01
    N: int = 8
    N_ref: int = 64
    scheme: str = SchemeKind.ITO.value
    theta: Mapping = field(default_factory=lambda: {"family": "indicator"})
    T: float = 1.0
    dt: float | None = None
    checkpoints: int = 32
    delta: float = 0.5
    p: float = 1.0
    seed: int = 0
    samples: int = 1
    initial: InitialDataSpec = field(default_factory=InitialDataSpec)
    passive: PassiveScalarSpec | None = None
    N_list: tuple = (4, 8, 16, 32)
    noise_amplitude: float = 1.0
    diffusion: str = "viscous"
    bound_eps_factor: float = 0.2
    track: tuple = ((1, 0), (1, 1))
    corrector_N_list: tuple = (4, 8, 16, 32, 64)
    corrector_modes: tuple = ((1, 0),)

    def __post_init__(self):
        object.__setattr__(self, "theta", _freeze(dict(self.theta)))
        validate(self)

    # -- derived --------------------------------------------------------------

    @property
    def scheme_kind(self) -> SchemeKind:
        return SchemeKind(self.scheme)

    def step_size(self, N: int | None = None) -> float:
        return default_dt(self.nu, self.N if N is None else N) if self.dt is None else float(self.dt)

    def theta_for(self, N: int | None = None) -> ThetaSequence:
        spec = {k: v for k, v in self.theta.items() if k != "N"}
        return ThetaSequence.from_config({**spec, "N": self.N if N is None else N})

    def checkpoint_times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.checkpoints)

    def with_overrides(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "initial":
                v = v.to_dict()
            elif f.name == "passive":
                v = None if v is None else v.to_dict()
            elif f.name == "theta":
                v = dict(v)
            elif f.name in ("track", "corrector_modes"):
                v = [list(k) for k in v]
            elif f.name in ("N_list", "corrector_N_list"):
                v = list(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SimConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        errs = [(k, "unknown key") for k in d if k not in known]
        if errs:
            raise ConfigError(errs)
        kw: dict[str, Any] = {}
        conv = {
            "nu": float, "N": int, "N_ref": int, "scheme": str, "T": float, "checkpoints": int,
            "delta": float, "p": float, "seed": int, "samples": int, "noise_amplitude": float,
            "diffusion": str, "bound_eps_factor": float,
        }
        for key, val in d.items():
            try:
                if key in conv:
                    if isinstance(val, bool) or val is None or isinstance(val, (list, dict)):
                        raise TypeError(f"expected a scalar, got {val!r}")
                    if conv[key] is int and isinstance(val, float) and not val.is_integer():
                        raise ValueError(f"expected an integer, got {val}")
                    kw[key] = conv[key](val)
                elif key == "dt":
                    kw[key] = None if val is None else float(val)
                elif key == "theta":
                    if not isinstance(val, Mapping):
                        raise TypeError("expected a mapping with 'family' (and 'alpha')")
                    kw[key] = dict(val)
                elif key == "initial":
                    kw[key] = InitialDataSpec.from_dict(val or {})
                elif key == "passive":
                    kw[key] = None if val is None else PassiveScalarSpec.from_dict(val)
                elif key in ("N_list", "corrector_N_list"):
                    kw[key] = tuple(int(x) for x in val)
                elif key in ("track", "corrector_modes"):
                    kw[key] = tuple(_mode(k) for k in val)
            except ConfigError as exc:
                errs.extend(exc.errors)
            except (TypeError, ValueError) as exc:
                errs.append((key, str(exc)))
        if errs:
            raise ConfigError(errs)
        return cls(**kw)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "SimConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError([("<file>", f"not valid YAML: {exc}")]) from exc
        if data is not None and not isinstance(data, Mapping):
            raise ConfigError([("<file>", "top level must be a mapping")])
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        return cls.loads(Path(path).read_text())


class _FrozenDict(dict):
    def __hash__(self):
        return hash(tuple(sorted(self.items())))

    def _ro(self, *a, **k):
        raise TypeError("config mappings are read-only")

    __setitem__ = __delitem__ = update = pop = popitem = clear = setdefault = _ro


def _freeze(d: dict) -> _FrozenDict:
    return _FrozenDict(d)


def validate(cfg: SimConfig) -> None:
    errs: list[tuple[str, str]] = []

    def need(ok, key, msg):
        if not ok:
            errs.append((key, msg))

    need(math.isfinite(cfg.nu) and cfg.nu > 0, "nu", f"must be a positive number, got {cfg.nu}")
    need(cfg.N >= 1, "N", f"must be >= 1, got {cfg.N}")
    need(cfg.N_ref >= cfg.N, "N_ref", f"must be >= N ({cfg.N}), got {cfg.N_ref}")
    schemes = [s.value for s in SchemeKind]
    need(cfg.scheme in schemes, "scheme", f"must be one of {schemes}, got {cfg.scheme!r}")
    need(math.isfinite(cfg.T) and cfg.T > 0, "T", f"must be positive, got {cfg.T}")
    if cfg.dt is not None:
        need(math.isfinite(cfg.dt) and cfg.dt > 0, "dt", f"must be positive, got {cfg.dt}")
        need(cfg.dt <= cfg.T, "dt", f"must not exceed T ({cfg.T}), got {cfg.dt}")
    need(cfg.checkpoints >= 2, "checkpoints", f"must be >= 2, got {cfg.checkpoints}")
    need(math.isfinite(cfg.delta) and cfg.delta > 0, "delta", f"must be positive, got {cfg.delta}")
    need(math.isfinite(cfg.p) and cfg.p >= 1, "p", f"must be >= 1, got {cfg.p}")
    need(0 <= cfg.seed <= U64_MAX, "seed", "must be an unsigned 64-bit integer")
    need(cfg.samples >= 1, "samples", f"must be >= 1, got {cfg.samples}")
    need(len(cfg.N_list) >= 1 and all(n >= 1 for n in cfg.N_list), "N_list", "must list positive cutoffs")
    need(all(a < b for a, b in zip(cfg.N_list, cfg.N_list[1:])), "N_list", "must be strictly increasing")
    need(all(n >= 1 for n in cfg.corrector_N_list), "corrector_N_list", "must list positive cutoffs")
    need(all(k != (0, 0) for k in cfg.corrector_modes), "corrector_modes", "the zero mode is not allowed")
    need(all(k != (0, 0) for k in cfg.track), "track", "the zero mode is not allowed")
    need(math.isfinite(cfg.noise_amplitude) and cfg.noise_amplitude >= 0, "noise_amplitude", "must be >= 0")
    need(cfg.diffusion in ("viscous", "corrector"), "diffusion", f"must be 'viscous' or 'corrector', got {cfg.diffusion!r}")
    need(cfg.bound_eps_factor > 0, "bound_eps_factor", "must be positive")
    fam = cfg.theta.get("family", "indicator")
    need(fam in ("indicator", "power"), "theta.family", f"must be 'indicator' or 'power', got {fam!r}")
    extra = set(cfg.theta) - {"family", "alpha", "N"}
    need(not extra, "theta", f"unknown keys {sorted(extra)}")
    alpha = cfg.theta.get("alpha", 0.0)
    try:
        alpha = float(alpha)
        need(math.isfinite(alpha) and alpha >= 0, "theta.alpha", f"must be a finite number >= 0, got {alpha}")
    except (TypeError, ValueError):
        errs.append(("theta.alpha", f"must be a number, got {alpha!r}"))
    if "N" in cfg.theta:
        need(cfg.theta["N"] == cfg.N, "theta.N", f"must equal N ({cfg.N}) when given, got {cfg.theta['N']}")
    if not errs:
        try:
            cfg.initial.build(cfg.N)
        except ValueError as exc:
            errs.append(("initial", str(exc)))
    if errs:
        raise ConfigError(errs)


def parse_override(text: str) -> tuple[list[str], Any]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError([("--set", f"expected key=value, got {text!r}")])
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError([(key, f"cannot parse value {raw!r}: {exc}")]) from exc
    return key.split("."), value


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``a.b=value`` overrides to a plain config dict (values parsed as YAML)."""
    out = dict(data)
    for item in overrides:
        path, value = parse_override(item)
        node = out
        for part in path[:-1]:
            child = node.get(part)
            child = dict(child) if isinstance(child, Mapping) else {}
            node[part] = child
            node = child
        node[path[-1]] = value
    return out


def load_config(path: str | Path | None = None, overrides: list[str] = (), seed: int | None = None) -> SimConfig:
    """Defaults, then the file, then ``--set`` overrides, then ``--seed``."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError([("--config", f"cannot read {path}: {exc}")]) from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError([("--config", f"not valid YAML: {exc}")]) from exc
        if not isinstance(data, Mapping):
            raise ConfigError([("--config", "top level must be a mapping")])
    data = apply_overrides(data, list(overrides))
    if seed is not None:
        data["seed"] = seed
    return SimConfig.from_dict(data)


def config_echo(cfg: SimConfig) -> dict:
    return cfg.to_dict()


__all__ = [
    "ConfigError",
    "InitialDataSpec",
    "PassiveScalarSpec",
    "SimConfig",
    "apply_overrides",
    "config_echo",
    "load_config",
    "parse_override",
    "validate",
]
