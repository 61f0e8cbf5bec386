"""Noise coefficients, scaling, covariance, corrector and Brownian increments."""

from stocheuler.noise.corrector import (
    corrector_apply,
    corrector_error,
    corrector_symbol,
    corrector_symbol_brute,
)
from stocheuler.noise.increments import (
    NoiseIncrement,
    assemble_noise_field,
    noise_coefficients,
    sample_increment,
)
from stocheuler.noise.rng import NoiseStream
from stocheuler.noise.theta import (
    ThetaSequence,
    corrector_tail,
    covariance,
    covariance_direct,
    epsilon_N,
    isotropy_defect,
)

__all__ = [
    "NoiseIncrement",
    "NoiseStream",
    "ThetaSequence",
    "assemble_noise_field",
    "corrector_apply",
    "corrector_error",
    "corrector_symbol",
    "corrector_symbol_brute",
    "corrector_tail",
    "covariance",
    "covariance_direct",
    "epsilon_N",
    "isotropy_defect",
    "noise_coefficients",
    "sample_increment",
]
