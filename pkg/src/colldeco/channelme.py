"""Discrete-channel collisional master equation for an immobile object.

The rate tensor is stored as ``m[alpha, beta, alpha0, beta0]``, the coefficient
that feeds ``rho[alpha0, beta0]`` into ``d rho[alpha, beta] / dt``.  Entries
are

    M = chi * (n/m^2) int d^3p0 mu(p0) (m p_alpha) int dOmega
            f_{alpha alpha0}(p_alpha n, p0) conj(f_{beta beta0}(p_alpha n, p0)),

with the energy delta function already integrated out: ``p_alpha`` is the
on-shell final momentum and ``m p_alpha`` the radial Jacobian.  Channel pairs
with the same energy change share their on-shell kinematics, so each such
group is evaluated as one Gram matrix.  That makes the coefficient matrix
Hermitian and positive semidefinite by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from colldeco.errors import InputError
from colldeco.gasenv import GasParams, maxwell_density_sq
from colldeco.linalg import choi_matrix, conditional_min_eigenvalue, hermiticity_defect, max_norm
from colldeco.quad import DEFAULT_SPEC, QuadratureSpec, mc_integrate, radial_rule, refine, sphere_rule
from colldeco.scattering import ScatteringModel

CLOSED = None
"""Returned by :func:`on_shell_momentum` for an energetically forbidden channel."""

_ZHAT = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class ChannelBasis:
    energies: tuple
    labels: tuple | None = None

    def __post_init__(self):
        e = tuple(float(x) for x in self.energies)
        if not e or not all(math.isfinite(x) for x in e):
            raise InputError("VALIDATION_ERROR", "channels.energies must be a non-empty list of finite numbers")
        object.__setattr__(self, "energies", e)
        if self.labels is not None:
            if len(self.labels) != len(e):
                raise InputError("VALIDATION_ERROR", "channels.labels must match channels.energies")
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def energy_tolerance(self) -> float:
        scale = max(abs(x) for x in self.energies)
        return 1e-9 * scale if scale > 0 else 1e-12

    def transition(self, alpha: int, alpha0: int) -> float:
        return self.energies[alpha] - self.energies[alpha0]


def chi(basis: ChannelBasis, alpha: int, beta: int, alpha0: int, beta0: int) -> int:
    """1 if the transitions alpha0 -> alpha and beta0 -> beta release the same energy."""
    d = basis.transition(alpha, alpha0) - basis.transition(beta, beta0)
    return int(abs(d) <= basis.energy_tolerance)


def on_shell_momentum(gas: GasParams, basis: ChannelBasis, p0: float, alpha0: int, alpha: int):
    """Final momentum modulus for alpha0 -> alpha, or ``CLOSED``."""
    if p0 < 0:
        raise InputError("NEGATIVE_MOMENTUM", f"p0 must be non-negative, got {p0!r}")
    rad = p0 * p0 - 2.0 * gas.mass * basis.transition(alpha, alpha0)
    return math.sqrt(rad) if rad > 0 else CLOSED


@dataclass(frozen=True, eq=False)
class RateTensor:
    m: np.ndarray
    eps: np.ndarray
    energies: np.ndarray

    @property
    def n(self) -> int:
        return self.m.shape[0]

    @property
    def omega(self) -> np.ndarray:
        """omega[a, b] = E_a - E_b + eps_a - eps_b."""
        e = self.energies + self.eps
        return e[:, None] - e[None, :]

    @property
    def loss(self) -> np.ndarray:
        """A[x, y] = sum_g m[g, g, x, y]; Hermitian."""
        return np.einsum("ggxy->xy", self.m)

    def coefficient_matrix(self) -> np.ndarray:
        """M_{(alpha, alpha0), (beta, beta0)} as an n^2 x n^2 matrix."""
        n = self.n
        return self.m.transpose(0, 2, 1, 3).reshape(n * n, n * n)

    def rate_matrix(self) -> np.ndarray:
        """Classical rate matrix on populations: W[a, b] = rate b -> a, columns sum to zero."""
        n = self.n
        idx = np.arange(n)
        w = self.m[idx[:, None], idx[:, None], idx[None, :], idx[None, :]].real.copy()
        w[idx, idx] -= self.loss.real[idx, idx]
        return w

    def superoperator(self) -> np.ndarray:
        n = self.n
        return choi_matrix(lambda e: generator_apply(self, e), n).reshape(n, n, n, n).transpose(1, 3, 0, 2).reshape(n * n, n * n)

    @property
    def max_rate(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.superoperator())), initial=0.0))

    def hermiticity_defect(self) -> float:
        conj = np.conj(self.m.transpose(1, 0, 3, 2))
        return max_norm(self.m - conj)

    def to_dict(self) -> dict:
        flat = self.m.reshape(-1)
        return {
            "n_channels": self.n,
            "index_order": ["alpha", "beta", "alpha0", "beta0"],
            "m": [[float(z.real), float(z.imag)] for z in flat],
            "eps": [float(x) for x in self.eps],
            "omega": self.omega.tolist(),
            "energies": [float(x) for x in self.energies],
        }

    # evolve adapter
    def __call__(self, rho):
        return generator_apply(self, rho)


def _groups(basis: ChannelBasis):
    """Channel pairs (alpha, alpha0) grouped by the energy change E_alpha - E_alpha0."""
    n = basis.size
    pairs = sorted(((basis.transition(a, a0), a, a0) for a in range(n) for a0 in range(n)))
    groups = []
    for de, a, a0 in pairs:
        if groups and abs(de - groups[-1][0]) <= basis.energy_tolerance:
            groups[-1][1].append((a, a0))
        else:
            groups.append([de, [(a, a0)]])
    return [(de, pairs) for de, pairs in groups]


def _kinematics(gas: GasParams, de: float, n_radial: int):
    """Radial nodes, incoming/outgoing moduli and weights for one energy change.

    The integration variable is the smaller of the two moduli, which keeps
    the integrand smooth at threshold.  The returned weight includes
    (n/m) mu(p0) p_alpha p0^2 dp0.
    """
    m = gas.mass
    width = gas.thermal_momentum
    x, w = radial_rule(n_radial, width)
    if de >= 0:
        pa = x
        p0 = np.sqrt(x * x + 2.0 * m * de)
        jac = p0 * x  # p0^2 dp0 = p0 s ds
    else:
        p0 = x
        pa = np.sqrt(x * x - 2.0 * m * de)
        jac = x * x
    weight = w * (gas.density / m) * maxwell_density_sq(gas, p0 * p0) * pa * jac
    return p0, pa, weight


def _group_gram(model: ScatteringModel, gas: GasParams, de: float, pairs, spec: QuadratureSpec):
    p0, pa, wr = _kinematics(gas, de, spec.radial_nodes)
    inner, wi = sphere_rule(spec.angular_order)
    if model.isotropic:
        outer = _ZHAT[None, :]
        wo = np.array([4.0 * math.pi])
    else:
        outer, wo = sphere_rule(spec.angular_order)
    # p_in: (R, O, 1, 3), p_out: (R, 1, I, 3)
    p_in = p0[:, None, None, None] * outer[None, :, None, :]
    p_out = pa[:, None, None, None] * inner[None, None, :, :]
    p_in, p_out = np.broadcast_arrays(p_in, p_out)
    weights = wr[:, None, None] * wo[None, :, None] * wi[None, None, :]
    amps = np.stack([model.amplitude(a, p_out, a0, p_in) for a, a0 in pairs])
    amps = amps.reshape(len(pairs), -1)
    wf = weights.reshape(-1)
    gram = (amps * wf) @ np.conj(amps).T
    scale = (np.abs(amps) ** 2 * wf).sum(axis=1)
    scale = np.sqrt(scale[:, None] * scale[None, :])
    return gram, scale


def _forward_average(model: ScatteringModel, gas: GasParams, alpha: int, spec: QuadratureSpec) -> float:
    """int d^3p0 mu(p0) Re f_aa(p0, p0) for an isotropic model (radial only)."""

    def evaluate(level):
        s = spec.refined(level)
        r, w = radial_rule(s.radial_nodes, gas.thermal_momentum)
        p = r[:, None] * _ZHAT[None, :]
        f = np.real(model.amplitude(alpha, p, alpha, p))
        terms = 4.0 * math.pi * w * r * r * maxwell_density_sq(gas, r * r) * f
        return terms.sum(), np.abs(terms).sum()

    return float(refine(evaluate, spec, "energy shift"))


def energy_shifts(model: ScatteringModel, gas: GasParams, spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """eps_a = -(2 pi n / m) int d^3p0 mu(p0) Re f_aa(p0, p0)."""
    from colldeco.quad import integrate_maxwell_3d

    out = []
    for a in range(model.n_channels):
        if model.isotropic:
            avg = _forward_average(model, gas, a, spec)
        else:
            avg = float(np.real(integrate_maxwell_3d(lambda p, a=a: model.amplitude(a, p, a, p), gas, spec)))
        out.append(-2.0 * math.pi * gas.density / gas.mass * avg)
    return np.array(out)


def rate_tensor(
    model: ScatteringModel, gas: GasParams, basis: ChannelBasis, spec: QuadratureSpec = DEFAULT_SPEC
) -> RateTensor:
    if model.n_channels != basis.size:
        raise InputError(
            "DIMENSION_MISMATCH", f"model has {model.n_channels} channels, basis has {basis.size}"
        )
    n = basis.size
    m = np.zeros((n, n, n, n), dtype=complex)
    for de, pairs in _groups(basis):
        gram = refine(
            lambda level, de=de, pairs=pairs: _group_gram(model, gas, de, pairs, spec.refined(level)),
            spec,
            f"rate tensor (energy change {de:g})",
        )
        for i, (a, a0) in enumerate(pairs):
            for j, (b, b0) in enumerate(pairs):
                m[a, b, a0, b0] = gram[i, j]
    rt = RateTensor(m=m, eps=energy_shifts(model, gas, spec), energies=np.array(basis.energies))
    scale = max(max_norm(m), 1e-300)
    if rt.hermiticity_defect() > 1e-12 * scale:
        raise AssertionError("rate tensor lost its Hermitian symmetry")
    return rt


def mc_rate_entry(
    model: ScatteringModel,
    gas: GasParams,
    basis: ChannelBasis,
    index: tuple,
    n_samples: int,
    seed,
):
    """Monte Carlo estimate of one tensor entry ``m[alpha, beta, alpha0, beta0]``.

    Samples p0 from the Maxwell distribution and the outgoing direction
    uniformly on the sphere.  Returns ``(estimate, std_error)``.
    """
    a, b, a0, b0 = index
    if not chi(basis, a, b, a0, b0):
        return 0j, 0.0
    mass = gas.mass
    de = basis.transition(a, a0)

    def sampler(rng, k):
        p0 = rng.normal(0.0, gas.thermal_momentum, size=(k, 3))
        n = rng.normal(size=(k, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return p0, n

    def f(sample):
        p0, n = sample
        rad = np.sum(p0 * p0, axis=1) - 2.0 * mass * de
        open_ = rad > 0
        pa = np.sqrt(np.where(open_, rad, 0.0))
        p_out = pa[:, None] * n
        fa = model.amplitude(a, p_out, a0, p0)
        fb = model.amplitude(b, p_out, b0, p0)
        vals = (gas.density / mass) * pa * 4.0 * math.pi * fa * np.conj(fb)
        return np.where(open_, vals, 0.0)

    return mc_integrate(f, sampler, n_samples, seed)


def generator_apply(rt: RateTensor, rho) -> np.ndarray:
    """d rho / dt = -i omega o rho + sum M rho - (1/2)(A^T rho + rho A^T)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (rt.n, rt.n):
        raise InputError("DIMENSION_MISMATCH", f"state has shape {rho.shape}, tensor has {rt.n} channels")
    at = rt.loss.T
    gain = np.einsum("abxy,xy->ab", rt.m, rho)
    return -1j * rt.omega * rho + gain - 0.5 * (at @ rho + rho @ at)


def jump_choi(rt: RateTensor) -> np.ndarray:
    """Choi matrix of the gain (jump) part of the generator."""
    n = rt.n
    return rt.m.transpose(2, 0, 3, 1).reshape(n * n, n * n)


def dissipator_choi(rt: RateTensor) -> np.ndarray:
    """Choi matrix of the full dissipator (gain and loss, no frequencies)."""
    zero = RateTensor(m=rt.m, eps=np.zeros(rt.n), energies=np.zeros(rt.n))
    return choi_matrix(lambda e: generator_apply(zero, e), rt.n)


def positivity_report(rt: RateTensor) -> dict:
    """Eigenvalue diagnostics for complete positivity, in units of the largest rate."""
    scale = max(max_norm(rt.m), 1e-300)
    cm = rt.coefficient_matrix()
    return {
        "coefficient_min_eig": float(np.linalg.eigvalsh(0.5 * (cm + cm.conj().T)).min()) / scale,
        "conditional_min_eig": conditional_min_eigenvalue(dissipator_choi(rt), rt.n) / scale,
        "hermiticity_defect": hermiticity_defect(cm) / scale,
    }


def coherence_decay_rate_elastic(gas: GasParams, c0: complex, c1: complex) -> float:
    """2 pi n <v> |c0 - c1|^2 for two degenerate channels with constant elastic amplitudes."""
    from colldeco.gasenv import mean_speed

    return 2.0 * math.pi * gas.density * mean_speed(gas) * abs(c0 - c1) ** 2


def two_state_populations(rt: RateTensor, p_excited0: float, times) -> np.ndarray:
    """Closed-form solution of the two-state rate equation for the upper population."""
    w = rt.rate_matrix()
    up, down = w[1, 0], w[0, 1]
    total = up + down
    times = np.asarray(times, dtype=float)
    if total == 0:
        return np.full(times.shape, p_excited0)
    eq = up / total
    return eq + (p_excited0 - eq) * np.exp(-total * times)
