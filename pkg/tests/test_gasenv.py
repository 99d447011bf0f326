import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colldeco.errors import InputError
from colldeco.gasenv import GasParams, maxwell_density, mean_speed, sample_momentum, thermal_wavelength
from colldeco.quad import integrate_maxwell_3d

positive = st.floats(0.05, 20.0)


def test_maxwell_density_at_origin(unit_gas):
    assert maxwell_density(unit_gas, [0.0, 0.0, 0.0]) == pytest.approx((2 * math.pi) ** -1.5, rel=1e-14)
    assert maxwell_density(unit_gas, [0.0, 0.0, 0.0]) == pytest.approx(0.0634936359342410, rel=1e-12)


@given(positive, positive)
def test_maxwell_density_normalized(m, beta):
    # independent rule: Gauss-Hermite product in Cartesian coordinates
    gas = GasParams(m, beta, 1.0)
    x, w = np.polynomial.hermite_e.hermegauss(40)
    s = gas.thermal_momentum
    pts = np.stack(np.meshgrid(x * s, x * s, x * s, indexing="ij"), axis=-1)
    ww = w[:, None, None] * w[None, :, None] * w[None, None, :] * s**3 * np.exp(np.sum(pts**2, -1) / (2 * s * s))
    assert np.sum(ww * maxwell_density(gas, pts)) == pytest.approx(1.0, abs=1e-12)


def test_equipartition(unit_gas):
    assert integrate_maxwell_3d(lambda p: np.sum(p * p, -1), unit_gas) == pytest.approx(3.0, rel=1e-10)


def test_thermal_wavelength():
    assert thermal_wavelength(GasParams(2 * math.pi, 1.0, 1.0)) == pytest.approx(1.0, rel=1e-15)
    assert thermal_wavelength(GasParams(1.0, 1.0, 1.0)) == pytest.approx(2.5066282746310002, rel=1e-14)


@given(positive, positive)
def test_thermal_wavelength_scaling(m, beta):
    ratio = thermal_wavelength(GasParams(m, 2 * beta, 1.0)) / thermal_wavelength(GasParams(m, beta, 1.0))
    assert ratio == pytest.approx(math.sqrt(2.0), rel=1e-13)


def test_mean_speed_values():
    assert mean_speed(GasParams(1.0, 1.0, 1.0)) == pytest.approx(1.5957691216057308, rel=1e-14)
    assert mean_speed(GasParams(1.0, 4.0, 1.0)) == pytest.approx(0.7978845608028654, rel=1e-14)


@pytest.mark.parametrize("m,beta", [(1.0, 1.0), (3.0, 0.5), (0.2, 7.0)])
def test_mean_speed_matches_quadrature(m, beta):
    gas = GasParams(m, beta, 1.0)
    speed = integrate_maxwell_3d(lambda p: np.linalg.norm(p, axis=-1), gas) / m
    assert speed == pytest.approx(mean_speed(gas), rel=1e-10)


def test_sample_momentum_statistics(unit_gas):
    p = sample_momentum(unit_gas, 12345, 10**6)
    p2 = np.sum(p * p, -1)
    assert abs(p2.mean() - 3.0) < 3 * p2.std() / math.sqrt(p2.size)
    for k in range(3):
        assert abs(p[:, k].mean()) < 3 * p[:, k].std() / math.sqrt(len(p))


def test_sample_momentum_reproducible(unit_gas):
    a = sample_momentum(unit_gas, 99, 1000)
    b = sample_momentum(unit_gas, 99, 1000)
    assert np.array_equal(a, b)
    assert sample_momentum(unit_gas, 99).shape == (3,)


@pytest.mark.parametrize("field", ["mass", "beta", "density"])
def test_gas_rejects_nonpositive(field):
    kw = {"mass": 1.0, "beta": 1.0, "density": 1.0, field: -1.0}
    with pytest.raises(InputError) as exc:
        GasParams(**kw)
    assert exc.value.code == "VALIDATION_ERROR"
    assert f"gas.{field}" in str(exc.value)
