"""Limiting-case and cross-check reductions, each returning a uniform report entry.

Every check returns a dict with ``name``, ``passed``, ``measured``,
``tolerance`` and check-specific details.  The runner's ``limits-suite``
mode and the acceptance tests are thin layers over these functions.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from colldeco.gasenv import GasParams
from colldeco.qlbe.kinematics import BrownianParams, Collision
from colldeco.qlbe import rates
from colldeco.quad import DEFAULT_SPEC, QuadratureSpec, radial_rule, sphere_rule


OFFDIAG_REL_TOL = 1e-6


def _children(seed, n: int) -> list:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


def _entry(name, passed, measured, tolerance, **details):
    return {"name": name, "passed": bool(passed), "measured": float(measured), "tolerance": float(tolerance), **details}


def sample_points(coll: Collision, n: int, seed, scale: float = 1.0):
    """Reproducible (P, Q) samples at thermal scales, Q bounded away from zero."""
    rng = np.random.default_rng(seed)
    pth = coll.brownian.thermal_momentum(coll.gas.beta)
    qth = 2.0 * coll.gas.thermal_momentum / coll.a
    p = scale * pth * rng.normal(size=(n, 3))
    q = qth * rng.normal(size=(n, 3))
    qn = np.linalg.norm(q, axis=-1, keepdims=True)
    q = np.where(qn < 0.2 * qth, q * (0.2 * qth / qn), q)
    return p, q


def diosi_comparison(coll: Collision, n_points: int = 20, seed=0, spec: QuadratureSpec = DEFAULT_SPEC) -> dict:
    """Monitoring vs Diosi in-rates: equal on the diagonal, different off it."""
    p, q = sample_points(coll, n_points, seed)
    mon = rates.m_in(p, p, q, coll, spec)
    dio = rates.m_in(p, p, q, coll, spec, variant="diosi")
    diag = np.abs(mon - dio) / np.abs(mon)
    rng = np.random.default_rng(_children(seed, 1)[0])
    dp = coll.brownian.thermal_momentum(coll.gas.beta) * rng.normal(size=p.shape)
    # off the diagonal the integrand has a cone at vanishing relative momentum and
    # converges only algebraically; the difference is reported, not asserted
    off_spec = replace(spec, rel_tol=max(spec.rel_tol, OFFDIAG_REL_TOL))
    mon_off = rates.m_in(p, p + dp, q, coll, off_spec)
    dio_off = rates.m_in(p, p + dp, q, coll, off_spec, variant="diosi")
    off = np.abs(mon_off - dio_off) / np.abs(mon_off)
    tol = 10.0 * spec.rel_tol
    return _entry(
        "diosi_diagonal_coincidence",
        np.all(diag < tol),
        diag.max(),
        tol,
        n_points=int(n_points),
        offdiagonal_relative_difference_max=float(off.max()),
        offdiagonal_relative_difference_median=float(np.median(off)),
        offdiagonal_rel_tol=off_spec.rel_tol,
    )


def classical_kernel_check(
    coll: Collision, p_in_list, centers, side: float, n_samples: int, seed, spec: QuadratureSpec = DEFAULT_SPEC
) -> dict:
    """Diagonal in-rate against the Monte Carlo classical collision kernel (bin averages)."""
    zs, rows = [], []
    seeds = _children(seed, len(p_in_list))
    for p_in, ss in zip(p_in_list, seeds):
        est, err = rates.mc_classical_kernel(p_in, centers, side, coll, n_samples, ss)
        quad = rates.bin_average_diagonal(p_in, centers, side, coll, spec)
        z = np.abs(est - quad) / np.maximum(err, 1e-300)
        zs.append(z)
        rows.extend(
            {"p_in": list(map(float, p_in)), "q_center": list(map(float, c)), "mc": float(e), "stderr": float(s), "quadrature": float(v)}
            for c, e, s, v in zip(centers, est, err, quad)
        )
    zs = np.concatenate(zs)
    return _entry("classical_boltzmann_diagonal", np.all(zs < 3.0), zs.max(), 3.0, n_points=len(zs), points=rows)


def out_rate_consistency(coll: Collision, p_list, n_samples: int, seed, spec: QuadratureSpec = DEFAULT_SPEC) -> dict:
    """Five-dimensional Monte Carlo of int dQ M_in against the classical loss rate."""
    ref = rates.m_out_cl(np.asarray(p_list, dtype=float), coll, spec)
    zs, rows = [], []
    for p, r, ss in zip(p_list, ref, _children(seed, len(p_list))):
        est, err = rates.mc_out_rate(p, coll, n_samples, ss)
        zs.append(abs(est - r) / err)
        rows.append({"p": list(map(float, p)), "mc": float(est), "stderr": float(err), "m_out_cl": float(r)})
    zs = np.array(zs)
    return _entry("out_rate_5d_vs_3d", np.all(zs < 3.0), zs.max(), 3.0, points=rows)


def _q_rule(coll: Collision, n_radial: int, order: int):
    width = 2.0 * coll.gas.thermal_momentum / coll.a
    r, wr = radial_rule(n_radial, width)
    n, wn = sphere_rule(order)
    q = (r[:, None, None] * n[None, :, :]).reshape(-1, 3)
    w = (wr[:, None] * r[:, None] ** 2 * wn[None, :]).reshape(-1)
    return q, w


def pure_decoherence_check(
    coll: Collision,
    separations,
    n_points: int = 4,
    seed=0,
    spec: QuadratureSpec = DEFAULT_SPEC,
    q_radial: int = 48,
    q_order: int = 16,
) -> dict:
    """Heavy-particle limit: populations stay put while spatial coherences decay.

    The Q integral is done by a spherical product rule in units of the gas
    thermal momentum.  Populations are the thermal distribution of the
    Brownian particle; coherences are the cross term of a superposition of
    two positions separated by ``dx``, taken on the momentum diagonal.  Their
    decay rate is compared with int dQ M_in(Q) (1 - cos(Q . dx)).
    """
    q, wq = _q_rule(coll, q_radial, q_order)
    beta, big_m = coll.gas.beta, coll.big_m
    rng = np.random.default_rng(seed)
    pth = coll.brownian.thermal_momentum(beta)

    def g2(p):
        return np.exp(-beta * np.sum(np.asarray(p) ** 2, axis=-1) / (2.0 * big_m))

    pop_rel, coh = [], []
    for _ in range(n_points):
        p = pth * rng.normal(size=3)
        m_gain = rates.m_in_diagonal(p, q, coll, spec)
        m_loss = rates.m_in_diagonal(p + q, q, coll, spec)
        loss = float(np.sum(wq * m_loss))
        deriv = float(np.sum(wq * m_gain * g2(p - q))) - loss * g2(p)
        pop_rel.append(abs(deriv) / (g2(p) * loss))
        for dx in separations:
            dx = np.asarray(dx, dtype=float)
            # momentum-diagonal component of the cross term, where M_in(P, P; Q) is exact
            gain = float(np.sum(wq * m_gain * g2(p - q) / g2(p) * np.cos(q @ dx)))
            rate = loss - gain
            limit = float(np.sum(wq * m_gain * (1.0 - np.cos(q @ dx))))
            coh.append({"dx": dx.tolist(), "decay_rate": rate, "limit_rate": limit, "loss_rate": loss,
                        "relative_difference": abs(rate - limit) / limit})
    pop_max = max(pop_rel)
    ok = pop_max < 1e-4 and all(c["decay_rate"] > 1e-3 * c["loss_rate"] and c["relative_difference"] < 1e-3 for c in coh)
    return _entry(
        "pure_decoherence_limit",
        ok,
        pop_max,
        1e-4,
        mass_ratio=coll.ratio,
        coherences=coh,
    )


def maxwell_stationarity(generator, grid, brownian: BrownianParams, beta: float, tol: float = 1e-3) -> dict:
    from colldeco.qlbe.grid import thermal_state

    rho = thermal_state(grid, brownian, beta)
    d = generator(rho)
    scale = float(np.max(np.abs(generator.m_out * rho)))
    resid = float(np.max(np.abs(d))) / scale
    return _entry("maxwell_stationarity", resid < tol, resid, tol)


def channel_rate_oracle(gas: GasParams, c: complex, rate: float, tol: float = 1e-6) -> dict:
    from colldeco.gasenv import mean_speed

    expected = gas.density * 4.0 * math.pi * abs(c) ** 2 * mean_speed(gas)
    rel = abs(rate - expected) / expected
    return _entry("constant_amplitude_rate", rel < tol, rel, tol, expected=expected, computed=rate)
