"""Two-body kinematics of a Brownian particle (mass M) colliding with gas particles (mass m)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from colldeco.errors import InputError
from colldeco.gasenv import GasParams
from colldeco.scattering import ScatteringModel

PERP_RTOL = 1e-9


@dataclass(frozen=True)
class BrownianParams:
    mass: float

    def __post_init__(self):
        if not (isinstance(self.mass, (int, float)) and math.isfinite(self.mass) and self.mass > 0):
            raise InputError("VALIDATION_ERROR", "brownian.mass must be a positive number", field="brownian.mass")
        object.__setattr__(self, "mass", float(self.mass))

    def thermal_momentum(self, beta: float) -> float:
        return math.sqrt(self.mass / beta)


def reduced_mass(m: float, big_m: float) -> float:
    return m * big_m / (m + big_m)


@dataclass(frozen=True, eq=False)
class Collision:
    """Everything the rate functions need: amplitude model, gas and Brownian particle.

    Derived constants: ``m_star`` (reduced mass), ``ratio`` = m/M and
    ``a`` = m/m* = 1 + m/M.
    """

    model: ScatteringModel
    gas: GasParams
    brownian: BrownianParams

    def __post_init__(self):
        if self.model.n_channels != 1:
            raise InputError("VALIDATION_ERROR", "the Brownian-particle equation needs a single-channel model")

    @property
    def m(self) -> float:
        return self.gas.mass

    @property
    def big_m(self) -> float:
        return self.brownian.mass

    @property
    def m_star(self) -> float:
        return reduced_mass(self.m, self.big_m)

    @property
    def ratio(self) -> float:
        return self.m / self.big_m

    @property
    def a(self) -> float:
        return 1.0 + self.ratio

    def rel(self, p, big_p):
        return rel(p, big_p, self.m, self.big_m)

    def describe(self) -> dict:
        return {
            "model": self.model.describe(),
            "gas": {"mass": self.gas.mass, "beta": self.gas.beta, "density": self.gas.density},
            "brownian": {"mass": self.big_m},
        }


def rel(p, big_p, m: float, big_m: float) -> np.ndarray:
    """Relative momentum (m*/m) p - (m*/M) P."""
    if not (m > 0 and big_m > 0):
        raise InputError("VALIDATION_ERROR", "masses must be positive")
    ms = reduced_mass(m, big_m)
    return (ms / m) * np.asarray(p, dtype=float) - (ms / big_m) * np.asarray(big_p, dtype=float)


def decompose(p, q) -> tuple[np.ndarray, np.ndarray]:
    """Split p into components parallel and perpendicular to q (q != 0)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    q2 = np.sum(q * q, axis=-1, keepdims=True)
    if np.any(q2 == 0):
        raise InputError("ZERO_Q", "momentum transfer must be nonzero")
    par = np.sum(p * q, axis=-1, keepdims=True) / q2 * q
    return par, p - par


def plane_basis(q) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal vectors e1, e2 spanning the plane perpendicular to q (batched)."""
    q = np.asarray(q, dtype=float)
    qn = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(qn == 0):
        raise InputError("ZERO_Q", "momentum transfer must be nonzero")
    u = q / qn
    # helper axis: the Cartesian axis least aligned with q
    helper = np.zeros_like(u)
    idx = np.argmin(np.abs(u), axis=-1)
    np.put_along_axis(helper, idx[..., None], 1.0, axis=-1)
    e1 = helper - np.sum(helper * u, axis=-1, keepdims=True) * u
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(u, e1)
    return e1, e2
