"""Quadrature engine for Gaussian-weighted momentum integrals.

All rules are tensor products of one-dimensional Gauss rules:

* radial integrals use composite Gauss-Legendre panels on a finite interval
  that covers the Gaussian envelope out to ``CUTOFF`` standard deviations;
* the unit sphere uses Gauss-Legendre in cos(theta) times a uniform rule in
  phi, exact for spherical polynomials of degree < ``2 * angular_order``;
* planes use a Gauss-Hermite product rule scaled to the envelope width.

Every public integrator refines by doubling its node counts until two
successive estimates agree to ``rel_tol``.  Refinement monotonicity is not
assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_hermite, roots_legendre

from colldeco.errors import InputError, NumericalError
from colldeco.gasenv import GasParams, maxwell_density_sq

# Gaussian tails beyond this many standard deviations are dropped (exp(-40.5)).
CUTOFF = 9.0
# Panel length in units of the envelope width.
PANEL_WIDTHS = 3.0


@dataclass(frozen=True)
class QuadratureSpec:
    radial_nodes: int = 48
    angular_order: int = 32
    plane_nodes_per_axis: int = 40
    rel_tol: float = 1e-8
    max_refinements: int = 4

    def __post_init__(self):
        for name in ("radial_nodes", "angular_order", "plane_nodes_per_axis"):
            value = getattr(self, name)
            if int(value) != value or value < 4:
                raise InputError("VALIDATION_ERROR", f"quadrature.{name} must be an integer >= 4, got {value!r}")
        if not (0.0 < self.rel_tol <= 1e-2):
            raise InputError("VALIDATION_ERROR", f"quadrature.rel_tol must lie in (0, 1e-2], got {self.rel_tol!r}")
        if int(self.max_refinements) != self.max_refinements or self.max_refinements < 0:
            raise InputError("VALIDATION_ERROR", "quadrature.max_refinements must be a non-negative integer")

    def refined(self, level: int) -> "QuadratureSpec":
        """The spec with every node count multiplied by ``2**level``."""
        k = 2**level
        return replace(
            self,
            radial_nodes=self.radial_nodes * k,
            angular_order=self.angular_order * k,
            plane_nodes_per_axis=self.plane_nodes_per_axis * k,
        )


DEFAULT_SPEC = QuadratureSpec()


# --------------------------------------------------------------------------
# one-dimensional rules


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=32)
def _hermite_scaled(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes with weights multiplied by exp(x^2)."""
    x, w = roots_hermite(n)
    with np.errstate(divide="ignore"):
        ws = np.exp(np.log(w) + x * x)
    ws[~np.isfinite(ws)] = 0.0
    x.setflags(write=False)
    ws.setflags(write=False)
    return x, ws


@lru_cache(maxsize=64)
def _composite_unit(panels: int, per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, 1]."""
    x, w = _legendre(per_panel)
    h = 1.0 / panels
    left = np.arange(panels) * h
    nodes = (left[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
    weights = np.broadcast_to(0.5 * h * w, (panels, per_panel)).ravel().copy()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def radial_rule(n_nodes: int, width, shift=0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int_0^inf g(r) dr`` with g ~ exp(-(r-shift)^2 / 2 width^2).

    ``width`` and ``shift`` may be arrays (broadcast together); the result then
    has shape ``broadcast_shape + (N,)`` with one interval per element.  The
    number of nodes per panel is ``ceil(n_nodes / 3)``; the panel count grows
    with the interval length so that every panel spans at most three widths.
    """
    width = np.asarray(width, dtype=float)
    shift = np.asarray(shift, dtype=float)
    lo = np.maximum(shift - CUTOFF * width, 0.0)
    hi = shift + CUTOFF * width
    return span_rule(n_nodes, lo, hi, width)


def span_rule(n_nodes: int, lo, hi, width) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [lo, hi] with panels at most three ``width`` long."""
    lo = np.asarray(lo, dtype=float)
    width = np.asarray(width, dtype=float)
    length = np.asarray(hi, dtype=float) - lo
    ratio = float(np.max(length / width)) if length.size else 1.0
    panels = max(1, int(math.ceil(ratio / PANEL_WIDTHS - 1e-12)))
    per_panel = max(4, int(math.ceil(n_nodes / 3)))
    t, wt = _composite_unit(panels, per_panel)
    r = lo[..., None] + length[..., None] * t
    w = length[..., None] * wt
    return r, w


@lru_cache(maxsize=16)
def sphere_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the unit sphere: ``order`` cos(theta) nodes x ``2*order`` phi nodes.

    Returns unit vectors of shape (N, 3) and weights summing to 4 pi.
    """
    u, wu = _legendre(order)
    nphi = 2 * order
    phi = 2.0 * math.pi * (np.arange(nphi) + 0.5) / nphi
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    vec = np.empty((order, nphi, 3))
    vec[..., 0] = s[:, None] * np.cos(phi)[None, :]
    vec[..., 1] = s[:, None] * np.sin(phi)[None, :]
    vec[..., 2] = u[:, None]
    w = np.broadcast_to(wu[:, None] * (2.0 * math.pi / nphi), (order, nphi)).ravel().copy()
    vec = vec.reshape(-1, 3)
    vec.setflags(write=False)
    w.setflags(write=False)
    return vec, w


def plane_rule(n: int, width: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite product rule for ``int d^2x g(x)`` with envelope exp(-x^2 / 2 width^2)."""
    x, ws = _hermite_scaled(n)
    s = math.sqrt(2.0) * width
    xx, yy = np.meshgrid(s * x, s * x, indexing="ij")
    nodes = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    weights = (s * s) * np.outer(ws, ws).ravel()
    return nodes, weights


# --------------------------------------------------------------------------
# refinement driver


def refine(evaluate: Callable[[int], tuple], spec: QuadratureSpec, what: str = "integral"):
    """Run ``evaluate(level)`` for level = 0, 1, ... until successive estimates agree.

    ``evaluate`` returns ``(estimate, scale)`` where ``scale`` bounds the
    magnitude of the integrand contributions (used as an absolute floor for
    integrals that cancel to zero).  Array estimates converge entry by entry;
    an entry keeps the first estimate at which it converged.
    """
    prev, _ = evaluate(0)
    prev = np.asarray(prev)
    result = np.array(prev, copy=True)
    done = np.zeros(prev.shape, dtype=bool)
    diff = np.full(prev.shape, np.inf)
    for level in range(1, spec.max_refinements + 1):
        cur, scale = evaluate(level)
        cur = np.asarray(cur)
        floor = spec.rel_tol * 1e-6 * np.asarray(scale, dtype=float)
        diff = np.abs(cur - prev)
        ok = diff <= spec.rel_tol * np.maximum(np.abs(cur), floor)
        newly = ok & ~done
        result[newly] = cur[newly]
        done |= ok
        if done.all():
            return result[()] if result.ndim == 0 else result
        prev = cur
    raise NumericalError(
        "NO_CONVERGENCE",
        f"{what} did not converge to rel_tol={spec.rel_tol} after {spec.max_refinements} refinements",
        max_difference=float(np.max(diff[~done])) if (~done).any() else 0.0,
    )


def refine_entries(evaluate: Callable[[int, np.ndarray], tuple], n: int, spec: QuadratureSpec, what: str = "integral"):
    """Entry-wise :func:`refine` that only re-evaluates entries still unconverged.

    ``evaluate(level, idx)`` returns ``(estimate, scale)`` for the entries ``idx``.
    """
    idx = np.arange(n)
    prev, _ = evaluate(0, idx)
    result = np.array(prev, copy=True)
    diff = np.full(n, np.inf)
    for level in range(1, spec.max_refinements + 1):
        cur, scale = evaluate(level, idx)
        floor = spec.rel_tol * 1e-6 * np.asarray(scale, dtype=float)
        d = np.abs(cur - prev)
        ok = d <= spec.rel_tol * np.maximum(np.abs(cur), floor)
        result[idx[ok]] = cur[ok]
        diff[idx] = d
        idx, prev = idx[~ok], cur[~ok]
        if idx.size == 0:
            return result
    raise NumericalError(
        "NO_CONVERGENCE",
        f"{what} did not converge to rel_tol={spec.rel_tol} after {spec.max_refinements} refinements",
        max_difference=float(np.max(diff[idx])),
    )


# --------------------------------------------------------------------------
# integrators


def integrate_maxwell_3d(f: Callable, gas: GasParams, spec: QuadratureSpec = DEFAULT_SPEC):
    """Thermal average ``int d^3p mu(p) f(p)``.

    ``f`` receives an array of momenta with shape (N, 3) and returns N values.
    """
    width = gas.thermal_momentum

    def evaluate(level):
        s = spec.refined(level)
        r, wr = radial_rule(s.radial_nodes, width)
        n, wn = sphere_rule(s.angular_order)
        p = (r[:, None, None] * n[None, :, :]).reshape(-1, 3)
        vals = np.asarray(f(p)).reshape(r.size, n.shape[0])
        radial_w = wr * r * r * maxwell_density_sq(gas, r * r)
        terms = radial_w[:, None] * wn[None, :] * vals
        return terms.sum(), np.abs(terms).sum()

    return refine(evaluate, spec, "integrate_maxwell_3d")


def integrate_sphere(f: Callable, spec: QuadratureSpec = DEFAULT_SPEC):
    """``int dOmega f(n)`` over unit vectors n (f maps (N, 3) -> N values)."""

    def evaluate(level):
        n, w = sphere_rule(spec.refined(level).angular_order)
        terms = w * np.asarray(f(n))
        return terms.sum(), np.abs(terms).sum()

    return refine(evaluate, spec, "integrate_sphere")


def integrate_plane(f: Callable, gaussian_width: float, spec: QuadratureSpec = DEFAULT_SPEC, center=(0.0, 0.0)):
    """``int d^2x f(x)`` for f decaying like a Gaussian of the given width about ``center``.

    ``f`` maps an (N, 2) array of plane points to N values, or to an array of
    shape (..., N) to integrate several functions on the same nodes at once.
    """
    if not gaussian_width > 0:
        raise InputError("VALIDATION_ERROR", "gaussian_width must be positive")
    c = np.asarray(center, dtype=float)

    def evaluate(level):
        x, w = plane_rule(spec.refined(level).plane_nodes_per_axis, gaussian_width)
        terms = np.asarray(f(x + c)) * w
        return terms.sum(axis=-1), np.abs(terms).sum(axis=-1)

    return refine(evaluate, spec, "integrate_plane")


def integrate_radial(f: Callable, width, spec: QuadratureSpec = DEFAULT_SPEC, shift=0.0):
    """``int_0^inf f(r) dr`` for integrands with a Gaussian envelope about ``shift``.

    ``width``/``shift`` may be arrays of a common batch shape B; ``f`` then
    receives nodes of shape B + (N,) and must return values of that shape.
    """

    def evaluate(level):
        r, w = radial_rule(spec.refined(level).radial_nodes, width, shift)
        terms = np.asarray(f(r)) * w
        return terms.sum(axis=-1), np.abs(terms).sum(axis=-1)

    return refine(evaluate, spec, "integrate_radial")


def mc_integrate(f: Callable, sampler: Callable, n_samples: int, seed, chunk: int = 1 << 16):
    """Plain Monte Carlo mean of ``f`` under ``sampler``.

    ``sampler(rng, k)`` draws k samples; ``f`` maps them to k (real or complex)
    values, or to an array of shape (k, ...) for several integrands at once.
    Returns ``(estimate, std_error)``.  Samples are drawn in fixed chunks so a
    given seed always reproduces the same estimate.
    """
    if n_samples < 1000:
        raise InputError("VALIDATION_ERROR", "mc_integrate needs at least 1000 samples")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        vals = np.asarray(f(sampler(rng, k)))
        total = total + vals.sum(axis=0)
        total_sq = total_sq + (np.abs(vals) ** 2).sum(axis=0)
        done += k
    mean = total / n_samples
    var = np.maximum(total_sq / n_samples - np.abs(mean) ** 2, 0.0)
    err = np.sqrt(var / (n_samples - 1))
    if np.ndim(mean) == 0:
        return mean[()] if isinstance(mean, np.ndarray) else mean, float(err)
    return mean, err
