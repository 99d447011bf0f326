"""Scenario files: TOML sections and keys, validated into typed objects.

Validation collects every problem before failing, so a single run reports
all bad fields at once.  Unknown keys produce warnings, not errors.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from colldeco.errors import InputError, OutputError

MODES = (
    "montecore-check",
    "channel-rates",
    "channel-evolve",
    "qlbe-rates",
    "qlbe-evolve",
    "compare-diosi",
    "limits-suite",
)

MODEL_TYPES = ("constant", "hard_sphere", "gaussian_born", "two_channel_toy")

# sections each mode reads; "required" ones must be present in the file
_REQUIRED = {
    "montecore-check": (),
    "channel-rates": ("gas", "channels", "model"),
    "channel-evolve": ("gas", "channels", "model", "evolution", "initial"),
    "qlbe-rates": ("gas", "brownian", "model"),
    "qlbe-evolve": ("gas", "brownian", "model", "evolution"),
    "compare-diosi": ("gas", "brownian", "model"),
    "limits-suite": ("gas", "brownian", "model"),
}

_KNOWN = {
    "": {"mode", "seed", "threads", "gas", "channels", "model", "brownian", "grid", "quadrature", "evolution", "initial", "qlbe", "montecore", "output", "limits", "points"},
    "gas": {"mass", "beta", "density"},
    "channels": {"energies", "labels"},
    "model": {"type", "c", "c_imag", "radius", "l_max", "v0", "r0", "mass", "amplitudes", "amplitudes_imag"},
    "brownian": {"mass"},
    "grid": {"points", "pmax"},
    "quadrature": {"radial_nodes", "angular_order", "plane_nodes_per_axis", "rel_tol", "max_refinements"},
    "evolution": {"t_end", "dt", "method", "renormalize", "monitor_every"},
    "initial": {"rho", "rho_imag", "amplitudes", "kind", "center", "width"},
    "qlbe": {"diosi_mode", "trace_mode", "kinetic", "coherence_shifts", "cache", "dense"},
    "montecore": {"n_models", "dim_system", "dim_probe", "dt"},
    "output": {"prefix"},
    "limits": {"n_points", "mc_samples", "checks"},
    "points": {"momenta", "transfers"},
}


@dataclass
class Scenario:
    mode: str
    data: dict
    seed: int = 0
    threads: int = 1
    warnings: list = field(default_factory=list)
    source: str | None = None

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    # typed views ---------------------------------------------------------

    def gas(self):
        from colldeco.gasenv import GasParams

        g = self.section("gas")
        return GasParams(g["mass"], g["beta"], g["density"])

    def brownian(self):
        from colldeco.qlbe.kinematics import BrownianParams

        return BrownianParams(self.section("brownian")["mass"])

    def basis(self):
        from colldeco.channelme import ChannelBasis

        ch = self.section("channels")
        return ChannelBasis(tuple(ch["energies"]), tuple(ch["labels"]) if "labels" in ch else None)

    def quadrature(self):
        from colldeco.quad import QuadratureSpec

        return QuadratureSpec(**self.section("quadrature"))

    def evolution(self):
        from colldeco.evolve import EvolutionConfig

        return EvolutionConfig(**self.section("evolution"))

    def model(self):
        return build_model(self.section("model"), self.section("channels"), self._born_mass())

    def _born_mass(self) -> float:
        g = self.section("gas")
        if "brownian" in self.data:
            m, big_m = g["mass"], self.section("brownian")["mass"]
            return m * big_m / (m + big_m)
        return g["mass"]

    def collision(self):
        from colldeco.qlbe.kinematics import Collision

        return Collision(self.model(), self.gas(), self.brownian())

    def grid(self):
        from colldeco.qlbe.grid import MomentumGrid3

        gr = self.section("grid")
        brownian = self.brownian()
        default = MomentumGrid3.default(brownian, self.gas().beta)
        return MomentumGrid3(gr.get("points", default.points_per_axis), gr.get("pmax", default.pmax))

    def echo(self) -> dict:
        return {"mode": self.mode, "seed": self.seed, "threads": self.threads, **self.data}


def _complex(re_part, im_part):
    import numpy as np

    re_arr = np.asarray(re_part, dtype=float)
    im_arr = np.zeros_like(re_arr) if im_part is None else np.asarray(im_part, dtype=float)
    return re_arr + 1j * im_arr


def build_model(model: dict, channels: dict, born_mass: float = 1.0):
    from colldeco import scattering as sc

    kind = model["type"]
    if kind == "constant":
        c = _complex(model["c"], model.get("c_imag"))
        return sc.ConstantAmplitude(c, channels.get("energies"))
    if kind == "hard_sphere":
        return sc.HardSphere(model["radius"], model.get("l_max"))
    if kind == "gaussian_born":
        return sc.GaussianBorn(model["v0"], model["r0"], model.get("mass", born_mass))
    if kind == "two_channel_toy":
        return sc.TwoChannelToy(channels["energies"], _complex(model["amplitudes"], model.get("amplitudes_imag")))
    raise InputError("VALIDATION_ERROR", f"unknown model type {kind!r}", field="model.type")


# --------------------------------------------------------------------------
# validation


class _Collector:
    def __init__(self):
        self.errors: list[dict] = []

    def add(self, path: str, reason: str) -> None:
        self.errors.append({"field": path, "reason": reason})

    def number(self, sec: dict, path: str, key: str, *, positive=False, nonneg=False, required=True, integer=False):
        if key not in sec:
            if required:
                self.add(f"{path}.{key}", "missing")
            return
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.add(f"{path}.{key}", "must be a finite number")
            return
        if integer and int(v) != v:
            self.add(f"{path}.{key}", "must be an integer")
        if positive and not v > 0:
            self.add(f"{path}.{key}", "must be positive")
        if nonneg and v < 0:
            self.add(f"{path}.{key}", "must be non-negative")


def _is_num_list(x) -> bool:
    return isinstance(x, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x)


def _validate(data: dict, mode: str, col: _Collector) -> None:
    for sec in _REQUIRED[mode]:
        if sec not in data:
            col.add(sec, f"section required for mode {mode}")
    gas = data.get("gas")
    if isinstance(gas, dict):
        for k in ("mass", "beta", "density"):
            col.number(gas, "gas", k, positive=True)
    br = data.get("brownian")
    if isinstance(br, dict):
        col.number(br, "brownian", "mass", positive=True)
    ch = data.get("channels")
    if isinstance(ch, dict):
        if not (_is_num_list(ch.get("energies")) and ch.get("energies")):
            col.add("channels.energies", "must be a non-empty list of numbers")
        if "labels" in ch and (not isinstance(ch["labels"], list) or len(ch["labels"]) != len(ch.get("energies") or [])):
            col.add("channels.labels", "must be a list matching channels.energies")
    model = data.get("model")
    if isinstance(model, dict):
        kind = model.get("type")
        if kind not in MODEL_TYPES:
            col.add("model.type", f"must be one of {MODEL_TYPES}")
        elif kind == "constant":
            if "c" not in model:
                col.add("model.c", "missing")
        elif kind == "hard_sphere":
            col.number(model, "model", "radius", positive=True)
            col.number(model, "model", "l_max", nonneg=True, required=False, integer=True)
        elif kind == "gaussian_born":
            col.number(model, "model", "v0")
            col.number(model, "model", "r0", positive=True)
            col.number(model, "model", "mass", positive=True, required=False)
        elif kind == "two_channel_toy":
            amp = model.get("amplitudes")
            if not (isinstance(amp, list) and len(amp) == 2 and all(_is_num_list(r) and len(r) == 2 for r in amp)):
                col.add("model.amplitudes", "must be a 2x2 list of numbers")
            if isinstance(ch, dict) and len(ch.get("energies") or []) != 2:
                col.add("channels.energies", "two_channel_toy needs exactly two energies")
    grid = data.get("grid")
    if isinstance(grid, dict):
        col.number(grid, "grid", "points", positive=True, required=False, integer=True)
        if isinstance(grid.get("points"), int) and grid["points"] % 2 == 0:
            col.add("grid.points", "must be odd")
        col.number(grid, "grid", "pmax", positive=True, required=False)
    quad = data.get("quadrature")
    if isinstance(quad, dict):
        for k in ("radial_nodes", "angular_order", "plane_nodes_per_axis"):
            col.number(quad, "quadrature", k, positive=True, required=False, integer=True)
        col.number(quad, "quadrature", "max_refinements", nonneg=True, required=False, integer=True)
        col.number(quad, "quadrature", "rel_tol", positive=True, required=False)
    ev = data.get("evolution")
    if isinstance(ev, dict):
        col.number(ev, "evolution", "t_end", nonneg=True)
        col.number(ev, "evolution", "dt", positive=True)
        col.number(ev, "evolution", "monitor_every", positive=True, required=False, integer=True)
        if ev.get("method", "rk4") not in ("rk4", "euler"):
            col.add("evolution.method", "must be 'rk4' or 'euler'")
    q = data.get("qlbe")
    if isinstance(q, dict):
        if q.get("diosi_mode", "monitoring") not in ("monitoring", "diosi"):
            col.add("qlbe.diosi_mode", "must be 'monitoring' or 'diosi'")
        if q.get("trace_mode", "discrete") not in ("discrete", "continuous"):
            col.add("qlbe.trace_mode", "must be 'discrete' or 'continuous'")
        shifts = q.get("coherence_shifts", [])
        if not (isinstance(shifts, list) and all(isinstance(s, list) and len(s) == 3 and all(isinstance(x, int) for x in s) for s in shifts)):
            col.add("qlbe.coherence_shifts", "must be a list of integer 3-vectors")
    mc = data.get("montecore")
    if isinstance(mc, dict):
        col.number(mc, "montecore", "n_models", positive=True, required=False, integer=True)
        for k in ("dim_system", "dim_probe"):
            col.number(mc, "montecore", k, positive=True, required=False, integer=True)
            if isinstance(mc.get(k), int) and mc[k] > 4:
                col.add(f"montecore.{k}", "must be at most 4")
        col.number(mc, "montecore", "dt", positive=True, required=False)
    init = data.get("initial")
    if isinstance(init, dict) and mode == "channel-evolve":
        if "rho" not in init and "amplitudes" not in init:
            col.add("initial", "needs 'rho' (matrix) or 'amplitudes' (pure state)")
    for key in ("seed", "threads"):
        if key in data:
            col.number(data, "", key, nonneg=key == "seed", positive=key == "threads", integer=True)


def _unknown_keys(data: dict) -> list[str]:
    out = []
    for key, val in data.items():
        if key not in _KNOWN[""]:
            out.append(key)
        elif isinstance(val, dict) and key in _KNOWN:
            out.extend(f"{key}.{k}" for k in val if k not in _KNOWN[key])
    return out


def parse_scenario_text(text: str, mode: str | None = None, *, source: str | None = None) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, column = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise InputError("PARSE_ERROR", str(exc), line=line, column=column, source=source) from exc
    mode = mode or data.get("mode")
    col = _Collector()
    if mode not in MODES:
        col.add("mode", f"must be one of {MODES}")
        raise InputError("VALIDATION_ERROR", "invalid scenario", errors=col.errors)
    _validate(data, mode, col)
    if col.errors:
        summary = "; ".join(f"{e['field']}: {e['reason']}" for e in col.errors)
        raise InputError("VALIDATION_ERROR", summary, errors=col.errors)
    warnings = [f"unknown key '{k}' ignored" for k in _unknown_keys(data)]
    body = {k: v for k, v in data.items() if k not in ("mode", "seed", "threads")}
    sc = Scenario(mode=mode, data=body, seed=int(data.get("seed", 0)), threads=int(data.get("threads", 1)), warnings=warnings, source=source)
    # construct typed objects once so constructor-level checks surface as validation errors
    try:
        if "gas" in body:
            sc.gas()
        if "quadrature" in body:
            sc.quadrature()
        if "evolution" in body:
            sc.evolution()
        if "model" in body:
            sc.model()
    except InputError as exc:
        errs = exc.context.get("errors") or [{"field": exc.context.get("field", exc.code), "reason": exc.detail}]
        raise InputError("VALIDATION_ERROR", exc.detail, errors=errs) from exc
    return sc


def parse_scenario(path, mode: str | None = None) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OutputError("IO_ERROR", f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario_text(text, mode, source=str(path))
