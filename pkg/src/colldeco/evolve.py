"""Fixed-step time integration of master equations with trace and positivity monitoring.

A generator is any callable ``state -> d state / dt``.  Objects may also
provide ``max_rate`` (spectral radius bound, used for the step-size check),
``trace``, ``positivity`` (most negative eigenvalue or population relative
to the largest), ``hermiticity_defect`` and ``observables``.  Plain callables
acting on density matrices get these from :class:`MatrixGenerator`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from colldeco.errors import InputError, NumericalError, OutputError

WARN_RATE = 0.1
MAX_RATE = 1.0
POSITIVITY_TOL = 1e-6
METHODS = ("rk4", "euler")


@dataclass(frozen=True)
class EvolutionConfig:
    t_end: float
    dt: float
    method: str = "rk4"
    renormalize: bool = False
    monitor_every: int = 1

    def __post_init__(self):
        errors = []
        if not (isinstance(self.dt, (int, float)) and self.dt > 0):
            errors.append("evolution.dt must be positive")
        if not (isinstance(self.t_end, (int, float)) and self.t_end >= 0):
            errors.append("evolution.t_end must be non-negative")
        if self.method not in METHODS:
            errors.append(f"evolution.method must be one of {METHODS}")
        if int(self.monitor_every) != self.monitor_every or self.monitor_every < 1:
            errors.append("evolution.monitor_every must be a positive integer")
        if errors:
            raise InputError("VALIDATION_ERROR", "; ".join(errors), errors=errors)


class MatrixGenerator:
    """Adapter giving a plain density-matrix generator the monitoring interface."""

    def __init__(self, fn, max_rate: float | None = None):
        self.fn = fn
        self._max_rate = max_rate

    def __call__(self, rho):
        return self.fn(rho)

    def estimate_max_rate(self, dim: int, iterations: int = 40) -> float:
        """Power-iteration estimate of the spectral radius of the linear map."""
        rng = np.random.default_rng(12345)
        x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        x = x + x.conj().T
        est = 0.0
        for _ in range(iterations):
            nx = np.linalg.norm(x)
            if nx == 0:
                return 0.0
            x = x / nx
            y = np.asarray(self.fn(x))
            est = float(np.linalg.norm(y))
            x = y
        return est

    def max_rate_for(self, rho) -> float:
        if self._max_rate is None:
            self._max_rate = self.estimate_max_rate(np.asarray(rho).shape[0])
        return self._max_rate

    @staticmethod
    def trace(rho) -> float:
        return float(np.real(np.trace(rho)))

    @staticmethod
    def positivity(rho) -> float:
        w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        return float(min(w.min(), 0.0) / max(w.max(), 1e-300))

    @staticmethod
    def hermiticity_defect(rho) -> float:
        return float(np.max(np.abs(rho - rho.conj().T), initial=0.0))

    @staticmethod
    def observables(rho) -> dict:
        n = rho.shape[0]
        obs = {f"pop_{i}": float(rho[i, i].real) for i in range(n)}
        for i in range(min(n, 4)):
            for j in range(i + 1, min(n, 4)):
                obs[f"abs_rho_{i}_{j}"] = float(abs(rho[i, j]))
        w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        obs["min_eig"] = float(w.min())
        return obs


def as_generator(generator):
    if isinstance(generator, MatrixGenerator):
        return generator
    if hasattr(generator, "max_rate") and hasattr(generator, "trace"):
        return generator
    return MatrixGenerator(generator, getattr(generator, "max_rate", None))


def _max_rate(gen, state) -> float:
    if isinstance(gen, MatrixGenerator):
        return gen.max_rate_for(state)
    return float(gen.max_rate)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    observables: dict = field(default_factory=dict)
    final_state: np.ndarray | None = None
    max_trace_drift: float = 0.0
    max_hermiticity_defect: float = 0.0
    min_positivity: float = 0.0
    steps: int = 0
    warnings: list = field(default_factory=list)

    def record(self, t: float, obs: dict) -> None:
        if self.times and not t > self.times[-1]:
            return
        self.times.append(float(t))
        for k, v in obs.items():
            self.observables.setdefault(k, []).append(float(v))

    def series(self, name: str) -> np.ndarray:
        return np.asarray(self.observables[name])

    def to_csv(self, path) -> None:
        names = list(self.observables)
        lines = [",".join(["time"] + names)]
        for i, t in enumerate(self.times):
            lines.append(",".join(repr(float(x)) for x in [t] + [self.observables[n][i] for n in names]))
        try:
            with open(path, "w", newline="\n") as fh:
                fh.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise OutputError("IO_ERROR", f"cannot write {path}: {exc}") from exc

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "samples": len(self.times),
            "t_end": self.times[-1] if self.times else 0.0,
            "max_trace_drift": self.max_trace_drift,
            "max_hermiticity_defect": self.max_hermiticity_defect,
            "min_positivity": self.min_positivity,
            "warnings": list(self.warnings),
        }


def _step(gen, y, h, method):
    if method == "euler":
        return y + h * gen(y)
    k1 = gen(y)
    k2 = gen(y + 0.5 * h * k1)
    k3 = gen(y + 0.5 * h * k2)
    k4 = gen(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(generator, state, config: EvolutionConfig) -> Trajectory:
    """Integrate d state/dt = generator(state) from t = 0 to ``config.t_end``."""
    gen = as_generator(generator)
    y = np.array(state, dtype=complex if np.iscomplexobj(state) else float, copy=True)
    scale = max(float(np.max(np.abs(y), initial=0.0)), 1e-300)
    if gen.hermiticity_defect(y) > 1e-10 * scale:
        raise InputError("STATE_INVALID", "initial state is not Hermitian")
    rate = _max_rate(gen, y)
    traj = Trajectory()
    if config.dt * rate > MAX_RATE:
        raise NumericalError(
            "STEP_TOO_LARGE", f"dt * max_rate = {config.dt * rate:.3g} exceeds {MAX_RATE}", max_rate=rate
        )
    if config.dt * rate > WARN_RATE:
        msg = f"dt * max_rate = {config.dt * rate:.3g} exceeds {WARN_RATE}; accuracy may suffer"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        traj.warnings.append(msg)
    tr0 = gen.trace(y)
    n_steps = int(math.ceil(config.t_end / config.dt - 1e-9)) if config.t_end > 0 else 0

    def monitor(t, y):
        drift = abs(gen.trace(y) - tr0)
        traj.max_trace_drift = max(traj.max_trace_drift, drift)
        herm = gen.hermiticity_defect(y)
        traj.max_hermiticity_defect = max(traj.max_hermiticity_defect, herm)
        pos = gen.positivity(y)
        traj.min_positivity = min(traj.min_positivity, pos)
        if pos < -POSITIVITY_TOL:
            raise NumericalError(
                "POSITIVITY_VIOLATION",
                f"state lost positivity at t = {t:.6g} (relative eigenvalue {pos:.3g})",
                time=t,
                value=pos,
                step=traj.steps,
            )
        obs = {"trace_drift": gen.trace(y) - tr0, "positivity": pos}
        obs.update(gen.observables(y))
        traj.record(t, obs)

    monitor(0.0, y)
    t = 0.0
    for k in range(1, n_steps + 1):
        h = min(config.dt, config.t_end - t) if k == n_steps else config.dt
        y = _step(gen, y, h, config.method)
        t = config.t_end if k == n_steps else k * config.dt
        traj.steps = k
        if config.renormalize:
            y = y * (tr0 / gen.trace(y))
        if not np.all(np.isfinite(y)):
            raise NumericalError("NON_FINITE_STATE", f"state became non-finite at t = {t:.6g}")
        if k % config.monitor_every == 0 or k == n_steps:
            monitor(t, y)
    traj.final_state = y
    return traj


@dataclass(frozen=True)
class RateFit:
    rate: float
    stderr: float
    residual: float
    intercept: float


def fit_exponential_rate(times, values) -> RateFit:
    """Least-squares fit of log(values) = c - rate * t.

    ``residual`` is the root-mean-square deviation of the log data from the fit.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise InputError("VALIDATION_ERROR", "times and values must be 1-d arrays of equal length")
    if v.size < 10:
        raise InputError("VALIDATION_ERROR", "at least 10 points are needed for a rate fit")
    if np.any(~(v > 0)):
        raise InputError("NON_POSITIVE_SERIES", "all values must be positive for a logarithmic fit")
    y = np.log(v)
    if np.ptp(y) == 0:
        return RateFit(0.0, 0.0, 0.0, float(y[0]))
    fit = stats.linregress(t, y)
    resid = y - (fit.intercept + fit.slope * t)
    return RateFit(float(-fit.slope), float(fit.stderr), float(np.sqrt(np.mean(resid**2))), float(fit.intercept))
