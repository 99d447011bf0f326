"""Ideal Maxwell gas environment.

The gas enters every rate formula only through its particle mass ``m``,
inverse temperature ``beta`` and number density ``n``.  The normalization
volume of the single-particle state cancels from all implemented
expressions and is never a parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from colldeco.errors import InputError


@dataclass(frozen=True)
class GasParams:
    mass: float
    beta: float
    density: float

    def __post_init__(self):
        for name in ("mass", "beta", "density"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InputError("VALIDATION_ERROR", f"gas.{name} must be positive, got {value!r}")

    @property
    def thermal_momentum(self) -> float:
        """Standard deviation of one Cartesian momentum component, sqrt(m/beta)."""
        return math.sqrt(self.mass / self.beta)


def maxwell_density(gas: GasParams, p0) -> np.ndarray:
    """Normalized Maxwell-Boltzmann density mu(p0) in 1/momentum^3.

    ``p0`` is an array whose last axis holds the three Cartesian components.
    """
    p0 = np.asarray(p0, dtype=float)
    p2 = np.sum(p0 * p0, axis=-1)
    norm = (2.0 * math.pi * gas.mass / gas.beta) ** -1.5
    return norm * np.exp(-gas.beta * p2 / (2.0 * gas.mass))


def maxwell_density_sq(gas: GasParams, p2) -> np.ndarray:
    """mu as a function of the squared momentum modulus."""
    norm = (2.0 * math.pi * gas.mass / gas.beta) ** -1.5
    return norm * np.exp(-gas.beta * np.asarray(p2, dtype=float) / (2.0 * gas.mass))


def thermal_wavelength(gas: GasParams) -> float:
    return math.sqrt(2.0 * math.pi * gas.beta / gas.mass)


def mean_speed(gas: GasParams) -> float:
    """Mean speed <|p|>/m = sqrt(8 / (pi beta m))."""
    return math.sqrt(8.0 / (math.pi * gas.beta * gas.mass))


def sample_momentum(gas: GasParams, seed, size: int | None = None) -> np.ndarray:
    """Draw gas momenta from mu.

    ``seed`` may be an integer, a :class:`numpy.random.SeedSequence` or a
    :class:`numpy.random.Generator`; the same seed always yields the same
    samples.  Returns shape ``(3,)`` if ``size`` is None, else ``(size, 3)``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = (3,) if size is None else (int(size), 3)
    return rng.normal(0.0, gas.thermal_momentum, size=shape)


def spawn_generators(seed, n: int) -> list[np.random.Generator]:
    """Independent generator streams for ``n`` workers, derived from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(n)]
