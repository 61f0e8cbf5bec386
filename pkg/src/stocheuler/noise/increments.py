"""Brownian increments and their assembly into a random velocity field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stocheuler.noise.rng import NoiseStream
from stocheuler.noise.theta import ThetaSequence
from stocheuler.spectral.field import FourierField, VectorField
from stocheuler.spectral.lattice import mode_index_arrays, modes_up_to


@dataclass(frozen=True, eq=False)
class NoiseIncrement:
    """One step of ``dW^k``, one value per mode of ``modes_up_to(cutoff)``."""

    dt: float
    cutoff: int
    values: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        v = np.array(self.values, dtype=float)
        if v.shape != (len(modes_up_to(self.cutoff)),):
            raise ValueError("increment must carry one value per active mode")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __getitem__(self, k) -> float:
        return float(self.values[modes_up_to(self.cutoff).index((int(k[0]), int(k[1])))])

    @classmethod
    def zeros(cls, dt: float, N: int) -> "NoiseIncrement":
        return cls(dt, N, np.zeros(len(modes_up_to(N))))

    @classmethod
    def single(cls, dt: float, N: int, k, value: float = 1.0) -> "NoiseIncrement":
        v = np.zeros(len(modes_up_to(N)))
        v[modes_up_to(N).index((int(k[0]), int(k[1])))] = value
        return cls(dt, N, v)


def sample_increment(stream: NoiseStream, theta: ThetaSequence, dt: float, step: int = 0) -> NoiseIncrement:
    """``N(0, dt)`` draws for every active mode, in canonical mode order."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = len(modes_up_to(theta.cutoff))
    return NoiseIncrement(dt, theta.cutoff, np.sqrt(dt) * stream.normals(step, n))


def noise_coefficients(theta: ThetaSequence, eps: float, dW: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense real-basis coefficients of ``eps sum_k theta_k sigma_k dW^k``.

    ``dW`` has shape ``(..., n_modes)``; returns two arrays of shape
    ``(..., 2N+1, 2N+1)`` (one per velocity component).
    """
    N = theta.cutoff
    modes = np.array(modes_up_to(N), dtype=float)
    r = np.hypot(modes[:, 0], modes[:, 1])
    amp = eps * theta.mode_values() * np.asarray(dW, dtype=float)
    i, j = mode_index_arrays(N)
    shape = amp.shape[:-1] + (2 * N + 1, 2 * N + 1)
    c1 = np.zeros(shape)
    c2 = np.zeros(shape)
    c1[..., i, j] = amp * (modes[:, 1] / r)
    c2[..., i, j] = amp * (-modes[:, 0] / r)
    return c1, c2


def assemble_noise_field(theta: ThetaSequence, eps: float, inc: NoiseIncrement) -> VectorField:
    if inc.cutoff != theta.cutoff:
        raise ValueError(f"increment cutoff {inc.cutoff} does not match theta cutoff {theta.cutoff}")
    c1, c2 = noise_coefficients(theta, eps, inc.values)
    N = theta.cutoff
    return VectorField(FourierField(N, c1), FourierField(N, c2))
