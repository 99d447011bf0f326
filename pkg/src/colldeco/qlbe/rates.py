"""Rate functions of the quantum linear Boltzmann equation.

``L(K, P; Q)`` is the collision amplitude for a Brownian particle with
momentum P that receives the momentum transfer Q, with K the in-plane
(perpendicular to Q) component of the gas momentum.  The in-rate

    M_in(P, P'; Q) = int_{K perp Q} dK L(K, P - Q; Q) conj(L(K, P' - Q; Q))

is a complex density in Q; its diagonal is the classical linear Boltzmann
kernel for the transition P - Q -> P.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import i0e

from colldeco.errors import InputError
from colldeco.gasenv import maxwell_density_sq
from colldeco.quad import DEFAULT_SPEC, QuadratureSpec, plane_rule, radial_rule, refine, refine_entries, span_rule
from colldeco.qlbe.kinematics import PERP_RTOL, Collision, decompose, plane_basis
from colldeco.quad import CUTOFF

VARIANTS = ("monitoring", "diosi")
_CHUNK = 1 << 21  # complex entries per block in batched evaluations


def _norm(v):
    return np.linalg.norm(v, axis=-1)


def _prefactor(coll: Collision, qn):
    return np.sqrt(coll.gas.density * coll.m / (qn * coll.m_star**2))


def _check_q(qn):
    if np.any(qn == 0):
        raise InputError("ZERO_Q", "momentum transfer Q must be nonzero")


def _amp(coll: Collision, p_out, p_in):
    return coll.model.amplitude(0, p_out, 0, p_in)


def L_fn(K, P, Q, coll: Collision) -> np.ndarray:
    """Monitoring collision amplitude L(K, P; Q); K must lie in the plane perpendicular to Q."""
    K, P, Q = (np.asarray(x, dtype=float) for x in (K, P, Q))
    qn = _norm(Q)
    _check_q(qn)
    kq = np.abs(np.sum(K * Q, axis=-1))
    if np.any(kq > PERP_RTOL * np.maximum(_norm(K) * qn, 1e-300)):
        raise InputError("K_NOT_PERPENDICULAR", "K must be perpendicular to Q")
    p_par, p_perp = decompose(P, Q)
    k_perp = decompose(K, Q)[1]
    mu_arg = k_perp + 0.5 * coll.a * Q + coll.ratio * p_par
    u = coll.rel(k_perp, p_perp)
    mu = maxwell_density_sq(coll.gas, np.sum(mu_arg * mu_arg, axis=-1))
    return _prefactor(coll, qn) * np.sqrt(mu) * _amp(coll, u - 0.5 * Q, u + 0.5 * Q)


def L_diosi(K, P, Q, coll: Collision) -> np.ndarray:
    """Variant whose amplitude arguments do not depend on P."""
    K, P, Q = (np.asarray(x, dtype=float) for x in (K, P, Q))
    qn = _norm(Q)
    _check_q(qn)
    mu_arg = K + 0.5 * coll.a * Q + coll.ratio * P
    u = (coll.m_star / coll.m) * K
    mu = maxwell_density_sq(coll.gas, np.sum(mu_arg * mu_arg, axis=-1))
    return _prefactor(coll, qn) * np.sqrt(mu) * _amp(coll, u - 0.5 * Q, u + 0.5 * Q)


def _batch3(*arrays):
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in arrays))
    shape = arrs[0].shape[:-1]
    return shape, [a.reshape(-1, 3) for a in arrs]


def m_in(P1, P2, Q, coll: Collision, spec: QuadratureSpec = DEFAULT_SPEC, variant: str = "monitoring"):
    """Complex in-rate M_in(P1, P2; Q) by Gauss-Hermite quadrature over the K plane.

    Arguments broadcast over leading axes.  Every entry is refined until it
    converges, so M_in(P1, P2; Q) and M_in(P2, P1; Q) are exact conjugates.
    """
    if variant not in VARIANTS:
        raise InputError("VALIDATION_ERROR", f"variant must be one of {VARIANTS}")
    shape, (p1, p2, q) = _batch3(P1, P2, Q)
    _check_q(_norm(q))
    e1, e2 = plane_basis(q)
    pin1, pin2 = p1 - q, p2 - q
    lfun = L_fn if variant == "monitoring" else L_diosi
    if variant == "diosi":
        # the Gaussian factor is centred where K + (m/M) (P1perp + P2perp) / 2 = 0
        mid = 0.5 * (decompose(pin1, q)[1] + decompose(pin2, q)[1])
        center = -coll.ratio * np.stack([np.sum(mid * e1, -1), np.sum(mid * e2, -1)], axis=-1)
    else:
        center = np.zeros((q.shape[0], 2))
    width = coll.gas.thermal_momentum

    def evaluate(level, idx):
        x, w = plane_rule(spec.refined(level).plane_nodes_per_axis, width)
        out = np.zeros(idx.size, dtype=complex)
        scale = np.zeros(idx.size)
        step = max(1, _CHUNK // x.shape[0])
        block = min(x.shape[0], _CHUNK)
        for s in range(0, idx.size, step):
            sl = slice(s, s + step)
            ii = idx[sl]
            same = np.array_equal(pin1[ii], pin2[ii])
            for b in range(0, x.shape[0], block):
                xs = x[None, b : b + block, :] + center[ii, None, :]
                wb = w[b : b + block]
                k = xs[..., 0:1] * e1[ii, None, :] + xs[..., 1:2] * e2[ii, None, :]
                qq = q[ii, None, :]
                l1 = lfun(k, pin1[ii, None, :], qq, coll)
                if same:
                    v = np.sum(wb * np.abs(l1) ** 2, axis=-1)
                    out[sl] += v
                    scale[sl] += v
                    continue
                l2 = lfun(k, pin2[ii, None, :], qq, coll)
                out[sl] += np.sum(wb * l1 * np.conj(l2), axis=-1)
                scale[sl] += np.sum(wb * np.abs(l1) * np.abs(l2), axis=-1)
        return out, scale

    res = refine_entries(evaluate, q.shape[0], spec, f"M_in ({variant})")
    return res.reshape(shape)


def diagonal_core(qn, p_par, p_perp, coll: Collision, n_radial: int) -> np.ndarray:
    """Diagonal in-rate for an isotropic model from the transfer modulus and the
    parallel/perpendicular components of the incoming Brownian momentum.

    The K-plane integral reduces to a radial integral over the modulus r of the
    in-plane relative momentum after the azimuthal average:

        M = n m a^2 / (Q m*^2) mu0 2 pi exp(-beta c^2 / 2m)
            int r dr |f(r; Q)|^2 exp(-beta (a r - b)^2 / 2m) i0e(beta a r b / m)

    with a = m/m*, b = (m/M) P_perp and c = a Q/2 + (m/M) P_par.  One radial
    rule, wide enough for the largest b, is shared by all entries and
    |f|^2 is evaluated once per distinct Q.
    """
    qn = np.asarray(qn, dtype=float).ravel()
    p_par = np.asarray(p_par, dtype=float).ravel()
    p_perp = np.asarray(p_perp, dtype=float).ravel()
    gas = coll.gas
    m, a, beta = coll.m, coll.a, gas.beta
    width = gas.thermal_momentum / a
    b = coll.ratio * p_perp
    hi = float(np.max(b, initial=0.0)) / a + CUTOFF * width
    r, wr = span_rule(n_radial, 0.0, hi, width)
    uq, inv = np.unique(qn, return_inverse=True)
    f2 = np.empty((uq.size, r.size))
    step = max(1, _CHUNK // r.size)
    for s in range(0, uq.size, step):
        qs = uq[s : s + step, None]
        p_out = np.stack(np.broadcast_arrays(r[None, :], 0.0, -0.5 * qs), axis=-1)
        p_in = np.stack(np.broadcast_arrays(r[None, :], 0.0, 0.5 * qs), axis=-1)
        f2[s : s + step] = np.abs(_amp(coll, p_out, p_in)) ** 2
    f2 *= wr * r
    out = np.empty(qn.size)
    for s in range(0, qn.size, step):
        sl = slice(s, s + step)
        bb = b[sl, None]
        env = np.exp(-beta * (a * r[None, :] - bb) ** 2 / (2.0 * m)) * i0e(beta * a * r[None, :] * bb / m)
        out[sl] = np.sum(f2[inv[sl]] * env, axis=-1)
    c = 0.5 * a * qn + coll.ratio * p_par
    mu0 = (2.0 * math.pi * m / beta) ** -1.5
    pref = gas.density * m * a * a / (qn * coll.m_star**2) * mu0 * 2.0 * math.pi
    return pref * np.exp(-beta * c * c / (2.0 * m)) * out


def m_in_diagonal(P, Q, coll: Collision, spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """Real, non-negative M_in(P, P; Q); radial fast path for isotropic models."""
    shape, (p, q) = _batch3(P, Q)
    qn = _norm(q)
    _check_q(qn)
    if not coll.model.isotropic:
        return np.real(m_in(p, p, q, coll, spec)).reshape(shape)
    pin = p - q
    par, perp = decompose(pin, q)
    p_par = np.sum(pin * q, axis=-1) / qn
    p_perp = _norm(perp)
    res = refine(
        lambda level: (lambda v: (v, v))(diagonal_core(qn, p_par, p_perp, coll, spec.refined(level).radial_nodes)),
        spec,
        "M_in diagonal",
    )
    return res.reshape(shape)


def m_out_cl(P, coll: Collision, spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """Classical loss rate n int d^3p0 mu(p0) |rel| / m* sigma(|rel|), with rel = rel(p0, P).

    Substituting the relative momentum p and averaging over its direction
    analytically leaves a single radial integral:

        n a^3 mu0 4 pi int p^2 dp (p/m*) sigma(p) exp(-beta (a p - b)^2 / 2m) (1 - e^{-2k}) / 2k,

    with b = (m/M)|P| and k = beta a p b / m.
    """
    P = np.asarray(P, dtype=float)
    shape = P.shape[:-1]
    b = coll.ratio * _norm(P.reshape(-1, 3))
    gas = coll.gas
    m, a, beta = coll.m, coll.a, gas.beta
    mu0 = (2.0 * math.pi * m / beta) ** -1.5
    width = gas.thermal_momentum / a

    def integrand(p):
        bb = b[:, None]
        kappa = beta * a * p * bb / m
        with np.errstate(invalid="ignore", divide="ignore"):
            ang = np.where(kappa > 1e-12, -np.expm1(-2.0 * kappa) / (2.0 * kappa), 1.0 - kappa)
        sigma = coll.model.cross_section(p, 0, coll.m_star)
        gauss = np.exp(-beta * (a * p - bb) ** 2 / (2.0 * m))
        return gas.density * a**3 * mu0 * 4.0 * math.pi * p * p * (p / coll.m_star) * sigma * gauss * ang

    def evaluate(level):
        r, w = radial_rule(spec.refined(level).radial_nodes, width, b / a)
        terms = integrand(r) * w
        return terms.sum(axis=-1), np.abs(terms).sum(axis=-1)

    return refine(evaluate, spec, "M_out").reshape(shape)


# --------------------------------------------------------------------------
# Monte Carlo oracles


def mc_classical_kernel(P_in, centers, side: float, coll: Collision, n_samples: int, seed):
    """Classical collision kernel averaged over cubic bins of momentum transfer.

    For a Brownian particle with momentum ``P_in``, gas momenta are drawn from
    the Maxwell distribution and the outgoing relative direction uniformly on
    the sphere; each sample carries the weight n (|p|/m*) 4 pi |f(p', p)|^2
    and deposits its transfer Q = p - p' into a bin.  Returns the bin-averaged
    rate densities and their standard errors.
    """
    from colldeco.quad import mc_integrate

    P_in = np.asarray(P_in, dtype=float)
    centers = np.asarray(centers, dtype=float)
    gas = coll.gas
    vol = side**3

    def sampler(rng, k):
        p0 = rng.normal(0.0, gas.thermal_momentum, size=(k, 3))
        n = rng.normal(size=(k, 3))
        n /= _norm(n)[:, None]
        return p0, n

    def f(sample):
        p0, n = sample
        p = coll.rel(p0, P_in)
        pn = _norm(p)
        p_out = pn[:, None] * n
        weight = gas.density * (pn / coll.m_star) * 4.0 * math.pi * np.abs(_amp(coll, p_out, p)) ** 2
        q = p - p_out
        inside = np.all(np.abs(q[:, None, :] - centers[None, :, :]) <= 0.5 * side, axis=-1)
        return weight[:, None] * inside / vol

    return mc_integrate(f, sampler, n_samples, seed)


def bin_average_diagonal(P_in, centers, side: float, coll: Collision, spec: QuadratureSpec = DEFAULT_SPEC, order: int = 4):
    """Average of M_in(P_in + Q, P_in + Q; Q) over cubic Q bins (Gauss-Legendre product rule)."""
    x, w = np.polynomial.legendre.leggauss(order)
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    wt = np.prod(np.stack(np.meshgrid(w, w, w, indexing="ij"), axis=-1).reshape(-1, 3), axis=-1) / 8.0
    centers = np.asarray(centers, dtype=float)
    q = centers[:, None, :] + 0.5 * side * grid[None, :, :]
    vals = m_in_diagonal(np.asarray(P_in, dtype=float) + q, q, coll, spec)
    return np.sum(vals * wt, axis=-1)


def mc_out_rate(P, coll: Collision, n_samples: int, seed, proposal_scale: float = 1.25):
    """Five-dimensional Monte Carlo estimate of int dQ M_in(P + Q, P + Q; Q).

    Q is drawn from an isotropic Gaussian centred where the Maxwell factor of
    L peaks; K from the plane Gaussian matching that factor.  Returns
    ``(estimate, std_error)``.
    """
    from colldeco.quad import mc_integrate

    P = np.asarray(P, dtype=float)
    gas = coll.gas
    a = coll.a
    sq = proposal_scale * 2.0 * gas.thermal_momentum / a
    cq = -2.0 * coll.ratio * P / a
    sk = gas.thermal_momentum

    def sampler(rng, k):
        return rng.normal(size=(k, 3)), rng.normal(size=(k, 2))

    def f(sample):
        zq, zk = sample
        q = cq + sq * zq
        gq = np.exp(-0.5 * np.sum(zq * zq, -1)) / (2.0 * math.pi * sq * sq) ** 1.5
        e1, e2 = plane_basis(q)
        kk = sk * (zk[:, 0:1] * e1 + zk[:, 1:2] * e2)
        gk = np.exp(-0.5 * np.sum(zk * zk, -1)) / (2.0 * math.pi * sk * sk)
        lval = L_fn(kk, np.broadcast_to(P, q.shape), q, coll)
        return np.abs(lval) ** 2 / (gq * gk)

    return mc_integrate(f, sampler, n_samples, seed)
