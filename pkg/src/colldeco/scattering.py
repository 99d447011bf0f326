"""Multichannel scattering amplitudes and cross sections.

A model maps ``(alpha_f, p_out, alpha_i, p_in)`` to the complex amplitude
``f_{alpha_f alpha_i}(p_out, p_in)`` (units of length).  Momentum arguments
are arrays whose last axis holds Cartesian components; all leading axes are
broadcast, so one call evaluates the amplitude on a whole quadrature grid.

Channel kinematics: a gas particle of mass ``m`` arriving with momentum p in
channel alpha leaves channel alpha_f with ``p_f**2 = p**2 - 2 m (E_f - E_alpha)``.
Final channels with a non-positive right-hand side are closed.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from colldeco.errors import InputError
from colldeco.quad import DEFAULT_SPEC, QuadratureSpec, integrate_sphere

ON_SHELL_RTOL = 1e-9
_ZHAT = np.array([0.0, 0.0, 1.0])
_RESCALE = 1e100


def spherical_bessel(l_max: int, x) -> tuple[np.ndarray, np.ndarray]:
    """j_l(x) and y_l(x) for l = 0..l_max and x > 0; shape (l_max+1,) + x.shape.

    y_l by upward recurrence (stable for the growing solution), j_l by
    downward Miller recurrence normalized with sum (2l+1) j_l^2 = 1.
    """
    x0 = np.asarray(x, dtype=float)
    x = x0.reshape(-1)
    shape = (l_max + 1,) + x.shape
    s, c = np.sin(x), np.cos(x)
    y = np.empty(shape)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        y[0] = -c / x
        if l_max >= 1:
            y[1] = -c / (x * x) - s / x
        for ell in range(1, l_max):
            y[ell + 1] = (2 * ell + 1) / x * y[ell] - y[ell - 1]

    top = max(l_max, float(np.max(x, initial=0.0)))
    start = int(top + 30 + math.sqrt(60.0 * top))
    j = np.zeros(shape)
    nxt = np.zeros(x.shape)
    cur = np.ones(x.shape)
    norm = np.zeros(x.shape)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for ell in range(start, -1, -1):
            if ell <= l_max:
                j[ell] = cur
            norm += (2 * ell + 1) * cur * cur
            big = np.abs(cur) > _RESCALE
            if big.any():
                cur[big] /= _RESCALE
                nxt[big] /= _RESCALE
                norm[big] /= _RESCALE * _RESCALE
                j[:, big] /= _RESCALE
            if ell > 0:
                cur, nxt = (2 * ell + 1) / x * cur - nxt, cur
        j /= np.sqrt(norm)
        # fix the overall sign against whichever of j_0, j_1 is better conditioned
        j0 = s / x
        j1 = s / (x * x) - c / x
        ref = np.where(np.abs(j0) >= np.abs(j1), j0 * j[0], j1 * (j[1] if l_max >= 1 else 1.0))
        j *= np.where(ref < 0, -1.0, 1.0)
    out_shape = (l_max + 1,) + x0.shape
    return j.reshape(out_shape), y.reshape(out_shape)


class ScatteringModel:
    """Base class for amplitude models.

    Subclasses set ``n_channels`` and ``energies`` and implement
    :meth:`_amplitude`.  Class attributes declare model properties:

    ``isotropic``
        f(R p', R p) = f(p', p) for every rotation R.
    ``unitary``
        the amplitudes satisfy the optical theorem.
    ``on_shell_only``
        the amplitude is defined only for energy-conserving arguments.
    """

    name = "model"
    isotropic = True
    unitary = False
    on_shell_only = False
    n_channels: int = 1
    energies: tuple = (0.0,)

    def amplitude(self, alpha_f: int, p_out, alpha_i: int, p_in) -> np.ndarray:
        self._check_channel(alpha_f)
        self._check_channel(alpha_i)
        p_out = np.asarray(p_out, dtype=float)
        p_in = np.asarray(p_in, dtype=float)
        return self._amplitude(alpha_f, p_out, alpha_i, p_in)

    def _amplitude(self, alpha_f, p_out, alpha_i, p_in):  # pragma: no cover - abstract
        raise NotImplementedError

    def cross_section(self, p, alpha: int = 0, mass: float = 1.0) -> np.ndarray:
        """Total cross section sigma(p, alpha) for an array of momentum moduli."""
        p = np.asarray(p, dtype=float)
        flat = [total_cross_section(self, float(x), alpha, mass=mass) for x in p.ravel()]
        return np.array(flat).reshape(p.shape)

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"type": self.name, **self.params()}

    def fingerprint(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def _check_channel(self, alpha):
        if int(alpha) != alpha or not 0 <= alpha < self.n_channels:
            raise InputError("UNKNOWN_CHANNEL", f"channel {alpha!r} not in 0..{self.n_channels - 1}")

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class ConstantAmplitude(ScatteringModel):
    """f_{ab}(p', p) = c[a, b], independent of the momenta.

    ``c`` may be a scalar (one channel), a 1-d array (purely elastic,
    ``c_a delta_ab``) or a full square matrix indexed ``[final, initial]``.
    """

    name = "constant"

    def __init__(self, c, energies=None):
        c = np.asarray(c, dtype=complex)
        if c.ndim == 0:
            c = c.reshape(1, 1)
        elif c.ndim == 1:
            c = np.diag(c)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InputError("VALIDATION_ERROR", "amplitude matrix must be square")
        self.c = c
        self.n_channels = c.shape[0]
        if energies is None:
            energies = np.zeros(self.n_channels)
        energies = tuple(float(e) for e in energies)
        if len(energies) != self.n_channels:
            raise InputError("VALIDATION_ERROR", "one energy per channel required")
        self.energies = energies

    def _amplitude(self, alpha_f, p_out, alpha_i, p_in):
        shape = np.broadcast_shapes(p_out.shape[:-1], p_in.shape[:-1])
        return np.full(shape, self.c[alpha_f, alpha_i])

    def cross_section(self, p, alpha=0, mass=1.0):
        p = np.asarray(p, dtype=float)
        sigma = np.zeros_like(p)
        for af in range(self.n_channels):
            pf2 = p * p - 2.0 * mass * (self.energies[af] - self.energies[alpha])
            pf = np.sqrt(np.clip(pf2, 0.0, None))
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(pf2 > 0, pf / np.where(p > 0, p, 1.0), 0.0)
            sigma = sigma + ratio * 4.0 * math.pi * abs(self.c[af, alpha]) ** 2
        return sigma

    def params(self):
        return {
            "c_real": self.c.real.tolist(),
            "c_imag": self.c.imag.tolist(),
            "energies": list(self.energies),
        }


class TwoChannelToy(ConstantAmplitude):
    """Two internal levels with a constant 2x2 amplitude matrix, for inelastic tests."""

    name = "two_channel_toy"

    def __init__(self, energies, amplitudes):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (2, 2) or len(energies) != 2:
            raise InputError("VALIDATION_ERROR", "TwoChannelToy needs 2 energies and a 2x2 amplitude matrix")
        super().__init__(amplitudes, energies)


class HardSphere(ScatteringModel):
    """Elastic scattering off an impenetrable sphere of radius ``radius``.

    Partial-wave series with phase shifts ``tan delta_l = j_l(pa) / y_l(pa)``,
    truncated at ``l_max`` (default ``max(20, ceil(3 p a))``).
    """

    name = "hard_sphere"
    unitary = True
    on_shell_only = True

    def __init__(self, radius: float, l_max: int | None = None):
        if not radius > 0:
            raise InputError("VALIDATION_ERROR", "hard sphere radius must be positive")
        if l_max is not None and (int(l_max) != l_max or l_max < 0):
            raise InputError("VALIDATION_ERROR", "l_max must be a non-negative integer")
        self.radius = float(radius)
        self.l_max = None if l_max is None else int(l_max)

    def params(self):
        return {"radius": self.radius, "l_max": self.l_max}

    def lmax_for(self, p) -> int:
        if self.l_max is not None:
            return self.l_max
        pmax = float(np.max(p)) if np.size(p) else 0.0
        return max(20, int(math.ceil(3.0 * pmax * self.radius)))

    def partial_amplitudes(self, p, l_max: int | None = None) -> np.ndarray:
        """``exp(i delta_l) sin(delta_l)`` for l = 0..l_max; shape (l_max+1,) + p.shape."""
        p = np.asarray(p, dtype=float)
        lm = self.lmax_for(p) if l_max is None else l_max
        x = p * self.radius
        j, y = spherical_bessel(lm, np.where(x > 0, x, 1.0))
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = np.where(x > 0, j / (y - 1j * j), 0.0)
        # x == 0: every phase shift vanishes
        return np.where(np.isfinite(out), out, 0.0)

    def phase_shifts(self, p, l_max: int | None = None) -> np.ndarray:
        a = self.partial_amplitudes(p, l_max)
        return np.angle(a) * (np.abs(a) > 0)

    def amplitude_angle(self, p, cos_theta, l_max: int | None = None) -> np.ndarray:
        """f as a function of the momentum modulus and the scattering angle."""
        p, cos_theta = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(cos_theta, dtype=float))
        lm = self.lmax_for(p) if l_max is None else l_max
        flat_p, flat_c = p.reshape(-1), cos_theta.reshape(-1)
        out = np.empty(flat_p.shape, dtype=complex)
        # bound the (l_max + 1) x block work arrays to a few tens of MB
        block = max(1024, (1 << 22) // (lm + 1))
        for s in range(0, flat_p.size, block):
            out[s : s + block] = self._series(flat_p[s : s + block], flat_c[s : s + block], lm)
        return out.reshape(p.shape)

    def _series(self, p, cos_theta, lm):
        a = self.partial_amplitudes(p, lm)
        total = np.zeros(p.shape, dtype=complex)
        p_prev = np.ones_like(cos_theta)
        p_cur = cos_theta.copy()
        for ell in range(lm + 1):
            leg = p_prev if ell == 0 else p_cur
            total += (2 * ell + 1) * a[ell] * leg
            if ell >= 1:
                p_prev, p_cur = p_cur, ((2 * ell + 1) * cos_theta * p_cur - ell * p_prev) / (ell + 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = total / p
        return np.where(p > 0, f, -self.radius)

    def _amplitude(self, alpha_f, p_out, alpha_i, p_in):
        k_out = np.linalg.norm(p_out, axis=-1)
        k_in = np.linalg.norm(p_in, axis=-1)
        k_out, k_in = np.broadcast_arrays(k_out, k_in)
        scale = np.maximum(np.maximum(k_out, k_in), 1e-300)
        if np.any(np.abs(k_out - k_in) > ON_SHELL_RTOL * scale):
            worst = float(np.max(np.abs(k_out - k_in) / scale))
            raise InputError("OFF_SHELL_REQUEST", f"|p_out| != |p_in| (relative mismatch {worst:.3g})")
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_t = np.sum(p_out * p_in, axis=-1) / (k_out * k_in)
        cos_t = np.clip(np.nan_to_num(cos_t, nan=1.0), -1.0, 1.0)
        return self.amplitude_angle(k_in, cos_t)

    def cross_section(self, p, alpha=0, mass=1.0):
        self._check_channel(alpha)
        p = np.asarray(p, dtype=float)
        lm = self.lmax_for(p)
        a = self.partial_amplitudes(p, lm)
        ell = np.arange(lm + 1).reshape((-1,) + (1,) * p.ndim)
        s = np.sum((2 * ell + 1) * np.abs(a) ** 2, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            sigma = 4.0 * math.pi * s / (p * p)
        return np.where(p > 0, sigma, 4.0 * math.pi * self.radius**2)


class GaussianBorn(ScatteringModel):
    """First Born amplitude of the potential ``v0 * exp(-r^2 / (2 r0^2))``.

    ``f_B = -mass * v0 * sqrt(2 pi) * r0^3 * exp(-q^2 r0^2 / 2)`` with
    ``q = p_out - p_in``; ``mass`` is the mass of the relative motion.
    """

    name = "gaussian_born"

    def __init__(self, v0: float, r0: float, mass: float = 1.0):
        if not r0 > 0 or not mass > 0:
            raise InputError("VALIDATION_ERROR", "GaussianBorn needs r0 > 0 and mass > 0")
        self.v0 = float(v0)
        self.r0 = float(r0)
        self.mass = float(mass)

    @property
    def strength(self) -> float:
        return self.mass * self.v0 * math.sqrt(2.0 * math.pi) * self.r0**3

    def params(self):
        return {"v0": self.v0, "r0": self.r0, "mass": self.mass}

    def amplitude_transfer(self, q2) -> np.ndarray:
        return -self.strength * np.exp(-0.5 * np.asarray(q2) * self.r0**2)

    def _amplitude(self, alpha_f, p_out, alpha_i, p_in):
        q = p_out - p_in
        return self.amplitude_transfer(np.sum(q * q, axis=-1)).astype(complex)

    def cross_section(self, p, alpha=0, mass=1.0):
        p = np.asarray(p, dtype=float)
        x = 4.0 * p * p * self.r0**2
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(x > 1e-12, -np.expm1(-x) / x, 1.0 - 0.5 * x)
        return 4.0 * math.pi * self.strength**2 * ratio


# --------------------------------------------------------------------------
# module-level operations


def amplitude(model: ScatteringModel, alpha_f: int, p_out, alpha_i: int, p_in):
    """f_{alpha_f alpha_i}(p_out, p_in); a Python complex for single momenta."""
    out = model.amplitude(alpha_f, p_out, alpha_i, p_in)
    return complex(out) if np.ndim(out) == 0 else out


def final_momentum(model: ScatteringModel, p: float, alpha_i: int, alpha_f: int, mass: float = 1.0):
    """On-shell outgoing modulus for alpha_i -> alpha_f, or None if the channel is closed."""
    pf2 = p * p - 2.0 * mass * (model.energies[alpha_f] - model.energies[alpha_i])
    return math.sqrt(pf2) if pf2 > 0 else None


def total_cross_section(
    model: ScatteringModel, p: float, alpha: int, *, mass: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """sigma(p, alpha) = sum over open final channels of (p_f/p) int dOmega |f|^2.

    The incoming momentum is taken along z.  The flux factor p_f/p equals one
    for elastic channels.
    """
    if not p > 0:
        raise InputError("NEGATIVE_MOMENTUM", f"momentum modulus must be positive, got {p!r}")
    model._check_channel(alpha)
    order = spec.angular_order
    if isinstance(model, HardSphere):
        order = max(order, model.lmax_for(p) + 2)
    sphere_spec = QuadratureSpec(
        radial_nodes=spec.radial_nodes,
        angular_order=order,
        plane_nodes_per_axis=spec.plane_nodes_per_axis,
        rel_tol=spec.rel_tol,
        max_refinements=spec.max_refinements,
    )
    p_in = p * _ZHAT
    sigma = 0.0
    for af in range(model.n_channels):
        pf = final_momentum(model, p, alpha, af, mass)
        if pf is None:
            continue

        def dsigma(n, af=af, pf=pf):
            return np.abs(model.amplitude(af, pf * n, alpha, p_in)) ** 2

        sigma += (pf / p) * float(np.real(integrate_sphere(dsigma, sphere_spec)))
    return sigma


def optical_theorem_defect(
    model: ScatteringModel, p: float, alpha: int, *, mass: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """``[Im f_aa(p z, p z) - p sigma / 4 pi] / scale``; zero for unitary models.

    ``scale`` is the larger of the two terms, so the result lies in [-1, 1].
    """
    forward = complex(model.amplitude(alpha, p * _ZHAT, alpha, p * _ZHAT))
    rhs = p * total_cross_section(model, p, alpha, mass=mass, spec=spec) / (4.0 * math.pi)
    scale = max(abs(forward.imag), abs(rhs))
    if scale == 0.0:
        return 0.0
    return (forward.imag - rhs) / scale
