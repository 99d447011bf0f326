"""Mode implementations.  Each mode writes its files into the output directory
and returns their names; :func:`run` adds the manifest and error handling."""

from __future__ import annotations

import json
import os
import platform
import sys
import time
from dataclasses import replace

import numpy as np

from colldeco.errors import ColldecoError, InputError, OutputError
from colldeco.runner.scenario import Scenario


def write_json(out_dir: str, name: str, payload) -> str:
    path = os.path.join(out_dir, name)
    try:
        with open(path, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_default)
            fh.write("\n")
    except OSError as exc:
        raise OutputError("IO_ERROR", f"cannot write {path}: {exc}") from exc
    return name


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _spec(sc: Scenario, tol: float | None):
    from colldeco.quad import QuadratureSpec

    spec = sc.quadrature() if "quadrature" in sc.data else QuadratureSpec()
    return replace(spec, rel_tol=tol) if tol is not None else spec


# --------------------------------------------------------------------------


def montecore_check(sc: Scenario, out: str, spec) -> list:
    from colldeco import linalg, montecore as mc

    cfg = sc.section("montecore")
    n_models = int(cfg.get("n_models", 100))
    dt = float(cfg.get("dt", 1e-4))
    rng = np.random.default_rng(sc.seed)
    rows = []
    for k in range(n_models):
        ds = int(cfg.get("dim_system", rng.integers(2, 5)))
        dp = int(cfg.get("dim_probe", rng.integers(2, 5)))
        model = mc.random_model(rng, ds, dp)
        rho = linalg.random_density(rng, ds)
        gen = mc.generator_apply(model, rho)
        conv = mc.convergence_check(model, rho, dt)
        jump = np.linalg.eigvalsh(mc.choi_of(mc.jump_apply, model)).min()
        ccp = linalg.conditional_min_eigenvalue(mc.choi_of(mc.dissipator_apply, model), ds)
        scale = linalg.max_norm(model.gamma) * 4.0
        rows.append(
            {
                "dim_system": ds,
                "dim_probe": dp,
                "t_relation_residual": mc.t_relation_residual(model.t_matrix) / model.dim,
                "generator_trace": abs(np.trace(gen)),
                "generator_hermiticity": linalg.hermiticity_defect(gen),
                "jump_choi_min_eig": float(jump) / scale,
                "conditional_choi_min_eig": float(ccp) / scale,
                **conv,
            }
        )

    def worst(key, fn=max):
        return float(fn(r[key] for r in rows))

    checks = {
        "t_relation": {"measured": worst("t_relation_residual"), "tolerance": 1e-12},
        "generator_trace": {"measured": worst("generator_trace"), "tolerance": 1e-12},
        "generator_hermiticity": {"measured": worst("generator_hermiticity"), "tolerance": 1e-12},
        "jump_part_positivity": {"measured": worst("jump_choi_min_eig", min), "tolerance": -1e-10},
        "conditional_complete_positivity": {"measured": worst("conditional_choi_min_eig", min), "tolerance": -1e-10},
        "finite_dt_convergence": {"measured": worst("extrapolated_mismatch"), "tolerance": 1e-8},
    }
    for name, c in checks.items():
        c["passed"] = c["measured"] >= c["tolerance"] if c["tolerance"] < 0 else c["measured"] < c["tolerance"]
    return [write_json(out, "montecore_report.json", {"n_models": n_models, "dt": dt, "checks": checks, "models": rows})]


def _rate_tensor(sc: Scenario, spec):
    from colldeco import channelme

    return channelme.rate_tensor(sc.model(), sc.gas(), sc.basis(), spec)


def channel_rates(sc: Scenario, out: str, spec) -> list:
    from colldeco import channelme

    rt = _rate_tensor(sc, spec)
    payload = rt.to_dict()
    payload["positivity"] = channelme.positivity_report(rt)
    payload["rate_matrix"] = rt.rate_matrix().tolist()
    return [write_json(out, "rate_tensor.json", payload)]


def _initial_matrix(sc: Scenario, n: int) -> np.ndarray:
    init = sc.section("initial")
    if "amplitudes" in init:
        psi = np.asarray(init["amplitudes"], dtype=complex)
        if psi.shape != (n,):
            raise InputError("VALIDATION_ERROR", f"initial.amplitudes needs {n} entries", field="initial.amplitudes")
        psi = psi / np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    rho = np.asarray(init["rho"], dtype=float) + 1j * np.asarray(init.get("rho_imag", np.zeros((n, n))), dtype=float)
    if rho.shape != (n, n):
        raise InputError("VALIDATION_ERROR", f"initial.rho must be {n}x{n}", field="initial.rho")
    return rho


def _fits(traj) -> dict:
    from colldeco.evolve import fit_exponential_rate

    fits = {}
    for name, series in traj.observables.items():
        if not name.startswith("abs_rho"):
            continue
        v = np.asarray(series)
        if v.size >= 10 and np.all(v > 0):
            f = fit_exponential_rate(traj.times, v)
            fits[name] = {"rate": f.rate, "stderr": f.stderr, "residual": f.residual}
    return fits


def channel_evolve(sc: Scenario, out: str, spec) -> list:
    from colldeco.evolve import evolve

    rt = _rate_tensor(sc, spec)
    rho0 = _initial_matrix(sc, rt.n)
    traj = evolve(rt, rho0, sc.evolution())
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    summary = {"evolution": traj.summary(), "fits": _fits(traj), "max_rate": rt.max_rate}
    return [write_json(out, "rate_tensor.json", rt.to_dict()), "trajectory.csv", write_json(out, "summary.json", summary)]


def _default_momenta(sc: Scenario) -> np.ndarray:
    pts = sc.section("points")
    if "momenta" in pts:
        return np.asarray(pts["momenta"], dtype=float).reshape(-1, 3)
    pth = sc.brownian().thermal_momentum(sc.gas().beta)
    return np.array([[x * pth, 0.0, 0.0] for x in (0.0, 0.5, 1.0, 2.0, 3.0)])


def qlbe_rates(sc: Scenario, out: str, spec) -> list:
    from colldeco.qlbe import rates

    coll = sc.collision()
    variant = sc.section("qlbe").get("diosi_mode", "monitoring")
    momenta = _default_momenta(sc)
    payload = {
        "m_star": coll.m_star,
        "mass_ratio": coll.ratio,
        "momenta": momenta.tolist(),
        "m_out_cl": rates.m_out_cl(momenta, coll, spec).tolist(),
    }
    transfers = sc.section("points").get("transfers")
    if transfers is not None:
        q = np.asarray(transfers, dtype=float).reshape(-1, 3)
        # every (P, Q) pair
        p = np.repeat(momenta, len(q), axis=0)
        q = np.tile(q, (len(momenta), 1))
        vals = rates.m_in(p, p, q, coll, spec, variant)
        payload["m_in_diagonal"] = [{"p": pp.tolist(), "q": qq.tolist(), "value": float(v.real)} for pp, qq, v in zip(p, q, vals)]
        payload["variant"] = variant
    return [write_json(out, "qlbe_rates.json", payload)]


def _qlbe_generator(sc: Scenario, out: str, spec):
    from colldeco.qlbe import grid as G

    coll = sc.collision()
    grid = sc.grid()
    q = sc.section("qlbe")
    cache = q.get("cache")
    if cache is not None and not os.path.isabs(cache):
        cache = os.path.join(out, cache)
    kernel = G.build_diagonal_kernel(grid, coll, spec, cache_path=cache)
    trace_mode = q.get("trace_mode", "discrete")
    m_out = G.loss_rates(grid, coll, spec) if trace_mode == "continuous" else None
    diag = G.DiagonalGenerator(kernel, coll.brownian, m_out=m_out, trace_mode=trace_mode)
    variant = q.get("diosi_mode", "monitoring")
    if q.get("dense", False):
        return coll, grid, G.DenseGenerator(diag, coll, spec, variant, q.get("kinetic", False)), "dense"
    shifts = q.get("coherence_shifts", [])
    if shifts:
        return coll, grid, G.SectorGenerator(diag, coll, shifts, spec, variant, q.get("kinetic", False)), "sectors"
    return coll, grid, diag, "diagonal"


def _cache_outputs(sc: Scenario, out: str) -> list:
    cache = sc.section("qlbe").get("cache")
    if cache is None:
        return []
    path = cache if os.path.isabs(cache) else os.path.join(out, cache)
    rel = os.path.relpath(path, out)
    return [] if rel.startswith(os.pardir) else [rel]


def _qlbe_initial(sc: Scenario, grid, coll, gen, layout):
    from colldeco.qlbe import grid as G

    init = sc.section("initial")
    kind = init.get("kind", "thermal")
    if kind == "thermal":
        pop = G.thermal_state(grid, coll.brownian, coll.gas.beta)
    elif kind == "gaussian":
        pop = G.gaussian_state(grid, init.get("center", [0.0, 0.0, 0.0]), init["width"])
    else:
        raise InputError("VALIDATION_ERROR", "initial.kind must be 'thermal' or 'gaussian'", field="initial.kind")
    if layout == "diagonal":
        return pop
    amp = np.sqrt(pop)
    if layout == "dense":
        return np.outer(amp, amp).astype(complex)
    state = np.zeros(gen.shape, dtype=complex)
    state[0] = pop
    for k, s in enumerate(gen.shifts, start=1):
        pos = G.sector_positions(grid, s)
        state[k, pos] = amp[pos] * amp[grid.index(grid.ints[pos] - np.array(s))]
    return state


def qlbe_evolve(sc: Scenario, out: str, spec) -> list:
    from colldeco.evolve import evolve

    coll, grid, gen, layout = _qlbe_generator(sc, out, spec)
    state = _qlbe_initial(sc, grid, coll, gen, layout)
    traj = evolve(gen, state, sc.evolution())
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    ke = traj.series("kinetic_energy")
    summary = {
        "layout": layout,
        "grid": grid.describe(),
        "max_rate": gen.max_rate,
        "evolution": traj.summary(),
        "kinetic_energy_initial": float(ke[0]),
        "kinetic_energy_final": float(ke[-1]),
        "kinetic_energy_thermal": 1.5 / coll.gas.beta,
    }
    return ["trajectory.csv", write_json(out, "summary.json", summary)] + _cache_outputs(sc, out)


def compare_diosi(sc: Scenario, out: str, spec) -> list:
    from colldeco.limits import diosi_comparison

    n = int(sc.section("limits").get("n_points", 20))
    return [write_json(out, "diosi_comparison.json", diosi_comparison(sc.collision(), n, sc.seed, spec))]


# Brownian momenta (units of its thermal momentum) for the 5D/3D loss-rate check
OUT_RATE_POINTS = (
    [0, 0, 0], [0.5, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 2],
    [-1, 0.5, 0.5], [0, -1.5, 1], [2, 0, -1], [0.3, 0.3, -0.3], [-2.5, 0, 0],
)


def limits_suite(sc: Scenario, out: str, spec) -> list:
    from colldeco import limits as L
    from colldeco.qlbe import grid as G
    from colldeco.qlbe.kinematics import BrownianParams, Collision
    from colldeco.scattering import optical_theorem_defect

    cfg = sc.section("limits")
    default = ["diosi_diagonal", "classical_kernel", "out_rate", "pure_decoherence", "maxwell_stationarity", "optical_theorem"]
    wanted = cfg.get("checks", default)
    n_mc = int(cfg.get("mc_samples", 400_000))
    n_points = int(cfg.get("n_points", 20))
    coll = sc.collision()
    seeds = iter(np.random.SeedSequence(sc.seed).spawn(len(default)))
    report = []
    for name in default:
        seed = next(seeds)
        if name not in wanted:
            continue
        if name == "diosi_diagonal":
            report.append(L.diosi_comparison(coll, n_points, seed, spec))
        elif name == "classical_kernel":
            w = coll.gas.thermal_momentum
            side = 0.5 * w
            centers = [[x, y, z] for x in (-0.75, 0.75) for y in (-0.25, 0.75) for z in (-0.75, 0.25, 1.25)]
            centers = np.asarray(centers) * w
            pth = coll.brownian.thermal_momentum(coll.gas.beta)
            report.append(L.classical_kernel_check(coll, [np.array([0.5, 0.0, -0.8]) * pth, np.array([0.0, 1.0, 0.3]) * pth], centers, side, n_mc, seed, spec))
        elif name == "out_rate":
            pth = coll.brownian.thermal_momentum(coll.gas.beta)
            p_list = [np.array(v) * pth for v in OUT_RATE_POINTS]
            report.append(L.out_rate_consistency(coll, p_list, n_mc, seed, spec))
        elif name == "pure_decoherence":
            heavy = Collision(coll.model, coll.gas, BrownianParams(coll.m * 1e6))
            q_th = coll.gas.thermal_momentum
            report.append(L.pure_decoherence_check(heavy, [[0.5 / q_th, 0, 0], [5.0 / q_th, 0, 0]], 2, seed, spec))
        elif name == "maxwell_stationarity":
            grid = sc.grid()
            kernel = G.build_diagonal_kernel(grid, coll, spec)
            gen = G.DiagonalGenerator(kernel, coll.brownian)
            report.append(L.maxwell_stationarity(gen, grid, coll.brownian, coll.gas.beta))
        elif name == "optical_theorem":
            if coll.model.unitary:
                p = coll.gas.thermal_momentum
                d = max(abs(optical_theorem_defect(coll.model, x * p, 0)) for x in (0.1, 1.0, 3.0))
                report.append(L._entry("optical_theorem", d < 1e-8, d, 1e-8))
            else:
                report.append(L._entry("optical_theorem", True, 0.0, 0.0, skipped="model declared non-unitary"))
    status = all(r["passed"] for r in report)
    return [write_json(out, "limits_report.json", {"all_passed": status, "checks": report})]


DISPATCH = {
    "montecore-check": montecore_check,
    "channel-rates": channel_rates,
    "channel-evolve": channel_evolve,
    "qlbe-rates": qlbe_rates,
    "qlbe-evolve": qlbe_evolve,
    "compare-diosi": compare_diosi,
    "limits-suite": limits_suite,
}


def _versions() -> dict:
    import scipy

    from colldeco import __version__

    return {"colldeco": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def run(scenario: Scenario, output_dir: str, *, tol: float | None = None) -> int:
    """Execute a scenario; always writes ``run_manifest.json``.  Returns the exit status."""
    start = time.perf_counter()
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {output_dir}: {exc}", file=sys.stderr)
        return OutputError.exit_status
    manifest = {
        "mode": scenario.mode,
        "scenario": scenario.echo(),
        "seed": scenario.seed,
        "threads": scenario.threads,
        "tol_override": tol,
        "versions": _versions(),
        "warnings": list(scenario.warnings),
    }
    try:
        files = DISPATCH[scenario.mode](scenario, output_dir, _spec(scenario, tol))
        status = 0
    except ColldecoError as exc:
        files = [write_json(output_dir, "error.json", {**exc.to_dict(), "exit_status": exc.exit_status})]
        status = exc.exit_status
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable error
        files = [write_json(output_dir, "error.json", {"code": "INTERNAL_ERROR", "message": repr(exc), "exit_status": 1})]
        status = 1
    manifest["outputs"] = files
    manifest["exit_status"] = status
    manifest["timings"] = {"total_seconds": time.perf_counter() - start}
    write_json(output_dir, "run_manifest.json", manifest)
    return status
