"""Markovian master equations for collisional decoherence.

The package builds, checks and integrates two microscopic master equations
driven by scattering amplitudes: the discrete-channel equation for an
immobile object with internal states, and the quantum linear Boltzmann
equation for a Brownian point particle in an ideal gas.  A finite-dimensional
model of the underlying monitoring construction is provided in
:mod:`colldeco.montecore`.

Units are natural throughout: hbar = k_B = 1.
"""

from colldeco.errors import ColldecoError, InputError, NumericalError, OutputError
from colldeco.gasenv import GasParams
from colldeco.quad import QuadratureSpec

__version__ = "0.1.0"

__all__ = [
    "ColldecoError",
    "GasParams",
    "InputError",
    "NumericalError",
    "OutputError",
    "QuadratureSpec",
    "__version__",
]
