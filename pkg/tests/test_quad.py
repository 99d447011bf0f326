import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colldeco.errors import InputError, NumericalError
from colldeco.gasenv import GasParams
from colldeco.quad import (
    QuadratureSpec,
    integrate_maxwell_3d,
    integrate_plane,
    integrate_radial,
    integrate_sphere,
    mc_integrate,
    radial_rule,
    refine,
    sphere_rule,
)


def test_maxwell_normalization(unit_gas):
    assert integrate_maxwell_3d(lambda p: np.ones(len(p)), unit_gas) == pytest.approx(1.0, abs=1e-12)


def test_maxwell_second_moment(unit_gas):
    assert integrate_maxwell_3d(lambda p: np.sum(p**2, -1), unit_gas) == pytest.approx(3.0, rel=1e-10)


def test_maxwell_mean_modulus(unit_gas):
    assert integrate_maxwell_3d(lambda p: np.linalg.norm(p, axis=-1), unit_gas) == pytest.approx(
        math.sqrt(8 / math.pi), rel=1e-8
    )


def test_maxwell_complex_integrand(unit_gas):
    # characteristic function of the Maxwell distribution
    k = np.array([0.3, -0.4, 1.2])
    val = integrate_maxwell_3d(lambda p: np.exp(1j * p @ k), unit_gas)
    assert val == pytest.approx(np.exp(-0.5 * k @ k), rel=1e-10)


def test_sphere_basic():
    assert integrate_sphere(lambda n: np.ones(len(n))) == pytest.approx(4 * math.pi, rel=1e-14)
    assert abs(integrate_sphere(lambda n: n[:, 2])) < 1e-13


def test_sphere_legendre_orthogonality():
    p2 = lambda n: 0.5 * (3 * n[:, 2] ** 2 - 1)
    assert integrate_sphere(lambda n: p2(n) ** 2) == pytest.approx(4 * math.pi / 5, rel=1e-12)


@given(st.integers(4, 40))
def test_sphere_rule_weights(order):
    n, w = sphere_rule(order)
    assert np.allclose(np.linalg.norm(n, axis=-1), 1.0)
    assert w.sum() == pytest.approx(4 * math.pi, rel=1e-13)


def test_plane_gaussian_normalization():
    s = 0.7
    g = lambda x: np.exp(-np.sum(x**2, -1) / (2 * s * s)) / (2 * math.pi * s * s)
    assert integrate_plane(g, s) == pytest.approx(1.0, abs=1e-12)
    assert integrate_plane(lambda x: x[:, 0] ** 2 * g(x), s) == pytest.approx(s * s, rel=1e-10)


def test_plane_against_monte_carlo():
    s = 1.3
    f = lambda x: np.cos(x[..., 0]) * (1 + 0.3 * x[..., 1] ** 2) * np.exp(-np.sum(x**2, -1) / (2 * s * s))
    quad = integrate_plane(f, s)
    area = 2 * math.pi * s * s

    def sampler(rng, k):
        return rng.normal(0.0, s, size=(k, 2))

    # importance sampling with the Gaussian envelope
    est, err = mc_integrate(lambda x: area * f(x) * np.exp(np.sum(x**2, -1) / (2 * s * s)), sampler, 200_000, 3)
    assert abs(est - quad) < 3 * err


def test_radial_gaussian_half_line():
    # int_0^inf exp(-(r - s)^2 / 2) dr = sqrt(pi/2) (1 + erf(s / sqrt 2))
    for s in (0.0, 1.5, 6.0):
        val = integrate_radial(lambda r: np.exp(-((r - s) ** 2) / 2), 1.0, shift=s)
        assert val == pytest.approx(math.sqrt(math.pi / 2) * (1 + math.erf(s / math.sqrt(2))), rel=1e-10)


def test_radial_rule_positive():
    r, w = radial_rule(48, 2.0)
    assert np.all(r > 0) and np.all(w > 0)


def test_mc_constant_exact():
    est, err = mc_integrate(lambda x: np.full(len(x), 2.5), lambda rng, k: rng.random(k), 5000, 1)
    assert est == 2.5 and err == 0.0


def test_mc_odd_function_zero():
    est, err = mc_integrate(lambda x: x**3, lambda rng, k: rng.normal(size=k), 100_000, 2)
    assert abs(est) < 3 * err


def test_mc_matches_quadrature(unit_gas):
    f = lambda p: np.sum(p**2, -1) * np.cos(p[..., 0])
    quad = integrate_maxwell_3d(f, unit_gas)
    est, err = mc_integrate(f, lambda rng, k: rng.normal(size=(k, 3)), 400_000, 4)
    assert abs(est - quad) < 3 * err


def test_mc_deterministic_and_vector_valued():
    f = lambda x: np.stack([x, x**2], axis=-1)
    a = mc_integrate(f, lambda rng, k: rng.random(k), 70_000, 5, chunk=1000)
    b = mc_integrate(f, lambda rng, k: rng.random(k), 70_000, 5, chunk=1000)
    assert np.array_equal(a[0], b[0]) and a[0].shape == (2,)


def test_mc_requires_samples():
    with pytest.raises(InputError):
        mc_integrate(lambda x: x, lambda rng, k: rng.random(k), 10, 0)


def test_refine_reports_nonconvergence():
    spec = QuadratureSpec(max_refinements=2)
    with pytest.raises(NumericalError) as exc:
        refine(lambda level: (float(level), 1.0), spec, "toy")
    assert exc.value.code == "NO_CONVERGENCE"


def test_spec_validation():
    with pytest.raises(InputError):
        QuadratureSpec(radial_nodes=2)
    with pytest.raises(InputError):
        QuadratureSpec(rel_tol=0.5)


def test_spec_refined_doubles():
    s = QuadratureSpec().refined(1)
    assert (s.radial_nodes, s.angular_order, s.plane_nodes_per_axis) == (96, 64, 80)


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_maxwell_average_deterministic(m, beta):
    gas = GasParams(m, beta, 1.0)
    f = lambda p: np.exp(-np.sum(p**2, -1) / 10.0)
    assert integrate_maxwell_3d(f, gas) == integrate_maxwell_3d(f, gas)
