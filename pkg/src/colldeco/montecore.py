"""Monitoring calculus on finite-dimensional system (x) probe spaces.

Operators on the joint space use the ordering ``index = s * dim_probe + e``
(system factor first).  ``Gamma`` is the rate operator whose expectation
value is the collision probability per unit time, ``S`` the scattering
operator and ``T = i (1 - S)`` its nontrivial part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from colldeco.errors import InputError, NumericalError
from colldeco.linalg import (
    check_density,
    check_unitary,
    choi_matrix,
    dagger,
    hermitian_part,
    hermiticity_defect,
    max_norm,
    partial_trace_second,
    psd_sqrt,
    random_density,
    random_hermitian,
    random_psd,
    random_unitary,
)

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteModel:
    gamma: np.ndarray
    s_matrix: np.ndarray
    rho_env: np.ndarray
    hamiltonian: np.ndarray
    dim_system: int
    dim_probe: int
    gamma_sqrt: np.ndarray = field(init=False, repr=False)
    t_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ds, dp = self.dim_system, self.dim_probe
        if int(ds) != ds or int(dp) != dp or ds < 1 or dp < 1:
            raise InputError("DIMENSION_MISMATCH", "dimensions must be positive integers")
        n = ds * dp
        for name, shape in (
            ("gamma", (n, n)),
            ("s_matrix", (n, n)),
            ("rho_env", (dp, dp)),
            ("hamiltonian", (ds, ds)),
        ):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise InputError("DIMENSION_MISMATCH", f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)
        check_unitary(self.s_matrix)
        check_density(self.rho_env, what="rho_env")
        if hermiticity_defect(self.hamiltonian) > 1e-10 * max(1.0, max_norm(self.hamiltonian)):
            raise InputError("NOT_HERMITIAN", "hamiltonian is not Hermitian")
        object.__setattr__(self, "gamma_sqrt", psd_sqrt(self.gamma, "gamma"))
        object.__setattr__(self, "t_matrix", t_from_s(self.s_matrix))

    @property
    def dim(self) -> int:
        return self.dim_system * self.dim_probe

    def joint_state(self, rho_sys: np.ndarray) -> np.ndarray:
        rho_sys = np.asarray(rho_sys, dtype=complex)
        if rho_sys.shape != (self.dim_system, self.dim_system):
            raise InputError("DIMENSION_MISMATCH", f"system state has shape {rho_sys.shape}")
        return np.kron(rho_sys, self.rho_env)

    def trace_env(self, a: np.ndarray) -> np.ndarray:
        return partial_trace_second(a, self.dim_system, self.dim_probe)


def random_model(rng: np.random.Generator, dim_system: int, dim_probe: int, *, with_hamiltonian=False) -> FiniteModel:
    """A generic model: Haar S, full-rank Gamma, mixed probe state."""
    n = dim_system * dim_probe
    h = random_hermitian(rng, dim_system) if with_hamiltonian else np.zeros((dim_system, dim_system))
    return FiniteModel(
        gamma=random_psd(rng, n),
        s_matrix=random_unitary(rng, n),
        rho_env=random_density(rng, dim_probe),
        hamiltonian=h,
        dim_system=dim_system,
        dim_probe=dim_probe,
    )


def t_from_s(s_matrix) -> np.ndarray:
    """T = i (1 - S); unitarity of S gives i (T - T^dag) = -T^dag T."""
    s = np.asarray(s_matrix, dtype=complex)
    check_unitary(s)
    return 1j * (np.eye(s.shape[0]) - s)


def t_relation_residual(t: np.ndarray) -> float:
    return max_norm(1j * (t - dagger(t)) + dagger(t) @ t)


def _check_joint(model: FiniteModel, rho_tot) -> np.ndarray:
    rho_tot = np.asarray(rho_tot, dtype=complex)
    if rho_tot.shape != (model.dim, model.dim):
        raise InputError("DIMENSION_MISMATCH", f"joint state has shape {rho_tot.shape}, expected {(model.dim, model.dim)}")
    return rho_tot


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise InputError("NON_POSITIVE_DT", f"dt must be positive, got {dt!r}")


def _sandwich(model: FiniteModel, rho_tot: np.ndarray) -> np.ndarray:
    g = model.gamma_sqrt
    return g @ rho_tot @ g


def collision_probability(model: FiniteModel, rho_tot, dt: float) -> float:
    """dt * tr(Gamma rho_tot), required to lie in [0, 1]."""
    _check_dt(dt)
    rho_tot = _check_joint(model, rho_tot)
    prob = dt * float(np.real(np.trace(model.gamma @ rho_tot)))
    if prob > 1.0 + PROB_TOL:
        raise NumericalError("PROBABILITY_EXCEEDS_ONE", f"collision probability {prob:.6g} > 1; reduce dt")
    return prob


def conditioned_state(model: FiniteModel, rho_tot, event: str, dt: float) -> np.ndarray:
    """State after a detector click or after a null event during dt."""
    _check_dt(dt)
    rho_tot = _check_joint(model, rho_tot)
    sand = _sandwich(model, rho_tot)
    rate = float(np.real(np.trace(sand)))
    if event == "click":
        if rate <= 0.0:
            raise NumericalError("ZERO_EVENT_PROBABILITY", "a click has zero probability")
        out = sand / rate
    elif event == "no_click":
        denom = 1.0 - dt * rate
        if denom <= 0.0:
            raise NumericalError("ZERO_EVENT_PROBABILITY", "a null event has zero probability")
        out = (rho_tot - dt * sand) / denom
    else:
        raise InputError("VALIDATION_ERROR", f"event must be 'click' or 'no_click', got {event!r}")
    return hermitian_part(out)


def monitoring_step(model: FiniteModel, rho_tot, dt: float) -> np.ndarray:
    """Probability-weighted mixture of the scattered click branch and the no-click branch."""
    collision_probability(model, rho_tot, dt)
    rho_tot = np.asarray(rho_tot, dtype=complex)
    sand = _sandwich(model, rho_tot)
    s = model.s_matrix
    return hermitian_part(dt * (s @ sand @ dagger(s)) + rho_tot - dt * sand)


def generator_apply(model: FiniteModel, rho_sys, *, include_hamiltonian: bool = True) -> np.ndarray:
    """Continuous-monitoring generator for the reduced system state.

    -i[H, rho] + (i/2) Tr_E[T + T^dag, G] + Tr_E(T G T^dag)
    - (1/2) Tr_E(Gh T^dag T Gh R) - (1/2) Tr_E(R Gh T^dag T Gh),
    with R = rho (x) rho_E, Gh = Gamma^(1/2) and G = Gh R Gh.
    """
    joint = model.joint_state(rho_sys)
    t = model.t_matrix
    gh = model.gamma_sqrt
    g = gh @ joint @ gh
    herm = t + dagger(t)
    loss = gh @ dagger(t) @ t @ gh
    env = 0.5j * (herm @ g - g @ herm) + t @ g @ dagger(t) - 0.5 * (loss @ joint + joint @ loss)
    out = model.trace_env(env)
    if include_hamiltonian:
        h = model.hamiltonian
        rho_sys = np.asarray(rho_sys, dtype=complex)
        out = out - 1j * (h @ rho_sys - rho_sys @ h)
    return out


def dissipator_apply(model: FiniteModel, rho_sys) -> np.ndarray:
    """The generator without its two commutator terms."""
    joint = model.joint_state(rho_sys)
    t = model.t_matrix
    gh = model.gamma_sqrt
    g = gh @ joint @ gh
    loss = gh @ dagger(t) @ t @ gh
    return model.trace_env(t @ g @ dagger(t) - 0.5 * (loss @ joint + joint @ loss))


def jump_apply(model: FiniteModel, rho_sys) -> np.ndarray:
    """Sandwich (jump) part Tr_E(T G T^dag) alone; completely positive by construction."""
    joint = model.joint_state(rho_sys)
    a = model.t_matrix @ model.gamma_sqrt
    return model.trace_env(a @ joint @ dagger(a))


def monitoring_quotient(model: FiniteModel, rho_sys, dt: float) -> np.ndarray:
    """(Tr_E monitoring_step(rho (x) rho_E, dt) - rho) / dt."""
    rho_sys = np.asarray(rho_sys, dtype=complex)
    step = monitoring_step(model, model.joint_state(rho_sys), dt)
    return (model.trace_env(step) - rho_sys) / dt


def monitoring_limit(model: FiniteModel, rho_sys) -> np.ndarray:
    """Closed form of the quotient: Tr_E(i (T G - G T^dag) + T G T^dag).

    The finite-dt map is affine in dt, so this equals the quotient for every dt.
    """
    joint = model.joint_state(rho_sys)
    t = model.t_matrix
    gh = model.gamma_sqrt
    g = gh @ joint @ gh
    return model.trace_env(1j * (t @ g - g @ dagger(t)) + t @ g @ dagger(t))


def convergence_check(model: FiniteModel, rho_sys, dt: float = 1e-4) -> dict:
    """Compare the finite-dt quotient at dt and dt/2 with the generator.

    Only dissipative dynamics enter: the finite-dt map carries no Hamiltonian.
    Returns the defects at both step sizes, their ratio and the Richardson
    extrapolated mismatch ``|2 q(dt/2) - q(dt) - L(rho)|``.
    """
    target = generator_apply(model, rho_sys, include_hamiltonian=False)
    q1 = monitoring_quotient(model, rho_sys, dt)
    q2 = monitoring_quotient(model, rho_sys, dt / 2)
    d1 = max_norm(q1 - target)
    d2 = max_norm(q2 - target)
    return {
        "defect_dt": d1,
        "defect_half_dt": d2,
        "ratio": d1 / d2 if d2 > 0 else float("inf"),
        "extrapolated_mismatch": max_norm(2.0 * q2 - q1 - target),
    }


def choi_of(apply, model: FiniteModel) -> np.ndarray:
    return choi_matrix(lambda e: apply(model, e), model.dim_system)
