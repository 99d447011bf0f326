import numpy as np
import pytest
from hypothesis import given, strategies as st

from colldeco import linalg, montecore as mc
from colldeco.errors import InputError, NumericalError

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 4)


def make(gamma, s, rho_env=None, h=None, ds=2, dp=1):
    rho_env = np.eye(dp) / dp if rho_env is None else rho_env
    h = np.zeros((ds, ds)) if h is None else h
    return mc.FiniteModel(gamma, s, rho_env, h, ds, dp)


def test_collision_probability_identity_gamma(rng):
    model = make(2.0 * np.eye(2), np.eye(2))
    assert mc.collision_probability(model, linalg.random_density(rng, 2), 0.01) == pytest.approx(0.02, rel=1e-14)


def test_collision_probability_zero_gamma(rng):
    model = make(np.zeros((2, 2)), np.eye(2))
    assert mc.collision_probability(model, linalg.random_density(rng, 2), 0.3) == 0.0


def test_collision_probability_dense_oracle(rng):
    model = mc.random_model(rng, 2, 2)
    rho = linalg.random_density(rng, 4)
    expected = 1e-3 * sum(model.gamma[i, j] * rho[j, i] for i in range(4) for j in range(4)).real
    assert mc.collision_probability(model, rho, 1e-3) == pytest.approx(expected, rel=1e-12)


def test_collision_probability_errors(rng):
    model = make(np.eye(2) * 10, np.eye(2))
    rho = np.eye(2) / 2
    with pytest.raises(InputError) as exc:
        mc.collision_probability(model, rho, 0.0)
    assert exc.value.code == "NON_POSITIVE_DT"
    with pytest.raises(NumericalError) as exc:
        mc.collision_probability(model, rho, 1.0)
    assert exc.value.code == "PROBABILITY_EXCEEDS_ONE"


def test_click_with_identity_gamma(rng):
    model = make(np.eye(2), np.eye(2))
    rho = linalg.random_density(rng, 2)
    assert np.allclose(mc.conditioned_state(model, rho, "click", 0.1), rho, atol=1e-14)


def test_click_commuting_reweighting():
    model = make(np.diag([1.0, 2.0]), np.eye(2))
    out = mc.conditioned_state(model, np.diag([0.5, 0.5]), "click", 0.1)
    assert np.allclose(out, np.diag([1 / 3, 2 / 3]), atol=1e-15)


def test_no_click_dense_oracle(rng):
    model = mc.random_model(rng, 2, 2)
    rho = linalg.random_density(rng, 4)
    dt = 1e-3
    w, v = np.linalg.eigh(model.gamma)
    gh = v @ np.diag(np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    expected = (rho - dt * gh @ rho @ gh) / (1 - dt * np.trace(model.gamma @ rho).real)
    out = mc.conditioned_state(model, rho, "no_click", dt)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(out, expected, atol=1e-12)


def test_conditioned_state_errors():
    model = make(np.zeros((2, 2)), np.eye(2))
    with pytest.raises(NumericalError) as exc:
        mc.conditioned_state(model, np.eye(2) / 2, "click", 0.1)
    assert exc.value.code == "ZERO_EVENT_PROBABILITY"
    with pytest.raises(InputError):
        mc.conditioned_state(model, np.eye(2) / 2, "maybe", 0.1)


@given(seeds)
def test_monitoring_step_trivial_cases(seed):
    rng = np.random.default_rng(seed)
    rho = linalg.random_density(rng, 4)
    unscattered = mc.FiniteModel(linalg.random_psd(rng, 4), np.eye(4), np.eye(2) / 2, np.zeros((2, 2)), 2, 2)
    assert np.allclose(mc.monitoring_step(unscattered, rho, 0.01), rho, atol=1e-13)
    no_rate = mc.FiniteModel(np.zeros((4, 4)), linalg.random_unitary(rng, 4), np.eye(2) / 2, np.zeros((2, 2)), 2, 2)
    assert np.allclose(mc.monitoring_step(no_rate, rho, 0.01), rho, atol=1e-15)


@given(seeds)
def test_monitoring_step_is_branch_mixture(seed):
    rng = np.random.default_rng(seed)
    model = mc.random_model(rng, 2, 2)
    rho = linalg.random_density(rng, 4)
    dt = 1e-4
    p = mc.collision_probability(model, rho, dt)
    click = mc.conditioned_state(model, rho, "click", dt)
    quiet = mc.conditioned_state(model, rho, "no_click", dt)
    s = model.s_matrix
    mixture = p * s @ click @ s.conj().T + (1 - p) * quiet
    out = mc.monitoring_step(model, rho, dt)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.allclose(out, mixture, atol=1e-12)


def test_t_from_s_scalar_cases():
    assert np.allclose(mc.t_from_s(np.eye(3)), 0.0)
    t = mc.t_from_s(-np.eye(2))
    assert np.allclose(t, 2j * np.eye(2))
    assert mc.t_relation_residual(t) < 1e-15


@given(st.integers(1, 8), seeds)
def test_t_relation_haar(n, seed):
    t = mc.t_from_s(linalg.random_unitary(np.random.default_rng(seed), n))
    assert mc.t_relation_residual(t) < 1e-12 * n


def test_generator_vanishes_without_scattering(rng):
    model = mc.FiniteModel(linalg.random_psd(rng, 6), np.eye(6), linalg.random_density(rng, 3), np.zeros((2, 2)), 2, 3)
    assert np.abs(mc.generator_apply(model, linalg.random_density(rng, 2))).max() < 1e-15


def test_generator_closed_system_rotation():
    h = np.diag([0.0, 1.0])
    model = make(np.zeros((2, 2)), np.eye(2), h=h)
    rho = np.full((2, 2), 0.5, dtype=complex)
    d = mc.generator_apply(model, rho)
    # d rho_01 / dt = -i (E0 - E1) rho_01
    assert d[0, 1] == pytest.approx(1j * 0.5, abs=1e-15)
    assert abs(d[0, 0]) < 1e-15 and abs(d[1, 1]) < 1e-15


@given(dims, dims, seeds)
def test_generator_trace_and_hermiticity(ds, dp, seed):
    rng = np.random.default_rng(seed)
    model = mc.random_model(rng, ds, dp, with_hamiltonian=True)
    d = mc.generator_apply(model, linalg.random_density(rng, ds))
    assert abs(np.trace(d)) < 1e-12
    assert linalg.hermiticity_defect(d) < 1e-12


@given(dims, dims, seeds)
def test_jump_part_completely_positive(ds, dp, seed):
    rng = np.random.default_rng(seed)
    model = mc.random_model(rng, ds, dp)
    assert np.linalg.eigvalsh(mc.choi_of(mc.jump_apply, model)).min() > -1e-10 * max(1.0, np.abs(model.gamma).max())


@given(dims, dims, seeds)
def test_dissipator_conditionally_completely_positive(ds, dp, seed):
    rng = np.random.default_rng(seed)
    model = mc.random_model(rng, ds, dp)
    choi = mc.choi_of(mc.dissipator_apply, model)
    assert linalg.conditional_min_eigenvalue(choi, ds) > -1e-10 * max(1.0, np.abs(model.gamma).max())


@given(dims, dims, seeds, st.floats(0.1, 10.0))
def test_monitoring_limit_matches_generator_for_scalar_rate(ds, dp, seed, gamma):
    rng = np.random.default_rng(seed)
    n = ds * dp
    model = mc.FiniteModel(gamma * np.eye(n), linalg.random_unitary(rng, n), linalg.random_density(rng, dp), np.zeros((ds, ds)), ds, dp)
    rho = linalg.random_density(rng, ds)
    conv = mc.convergence_check(model, rho, 1e-4)
    assert conv["extrapolated_mismatch"] < 1e-8


@given(dims, dims, seeds)
def test_quotient_equals_closed_form(ds, dp, seed):
    rng = np.random.default_rng(seed)
    model = mc.random_model(rng, ds, dp)
    rho = linalg.random_density(rng, ds)
    scale = np.abs(model.gamma).max()
    for dt in (1e-3, 1e-4):
        assert np.abs(mc.monitoring_quotient(model, rho, dt) - mc.monitoring_limit(model, rho)).max() < 1e-9 * scale


def test_quotient_converges_to_generator_random_model():
    rng = np.random.default_rng(2)
    model = mc.random_model(rng, 2, 3)
    conv = mc.convergence_check(model, linalg.random_density(rng, 2), 1e-4)
    assert conv["extrapolated_mismatch"] < 1e-8


def test_model_validation(rng):
    with pytest.raises(InputError) as exc:
        mc.FiniteModel(np.eye(3), np.eye(4), np.eye(2) / 2, np.zeros((2, 2)), 2, 2)
    assert exc.value.code == "DIMENSION_MISMATCH"
    with pytest.raises(InputError):
        mc.FiniteModel(np.eye(4), 2 * np.eye(4), np.eye(2) / 2, np.zeros((2, 2)), 2, 2)
    with pytest.raises(InputError):
        mc.FiniteModel(np.eye(4), np.eye(4), np.eye(2) / 2, np.array([[0, 1], [0, 0]]), 2, 2)
