"""Cartesian momentum grid, precomputed collision kernels and grid generators.

Momenta live on ``P = spacing * i`` with integer vectors ``i`` in
``[-h, h]^3`` and ``h = (points_per_axis - 1) / 2``.  Momentum transfers are
grid differences, so the Q-integral becomes a sum with cell volume
``spacing**3``; the singular transfer Q = 0 is omitted.

Three state layouts are supported:

* populations only: a real vector rho(P) with sum(rho) * cell = 1;
* populations plus coherence sectors: row ``k`` of a complex (S + 1, N)
  array holds rho(P, P - s_k), row 0 being the populations;
* dense rho(P, P') for small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from colldeco.errors import InputError, NumericalError
from colldeco.qlbe.kinematics import BrownianParams, Collision
from colldeco.qlbe.rates import diagonal_core, m_in, m_in_diagonal, m_out_cl
from colldeco.quad import DEFAULT_SPEC, QuadratureSpec, refine

DENSE_MAX_POINTS = 13
_BLOCK = 192


@dataclass(frozen=True)
class MomentumGrid3:
    points_per_axis: int
    pmax: float

    def __post_init__(self):
        n = self.points_per_axis
        if int(n) != n or n < 3 or n % 2 == 0:
            raise InputError("VALIDATION_ERROR", "grid.points must be an odd integer >= 3", field="grid.points")
        if not (math.isfinite(self.pmax) and self.pmax > 0):
            raise InputError("VALIDATION_ERROR", "grid.pmax must be positive", field="grid.pmax")
        object.__setattr__(self, "points_per_axis", int(n))
        object.__setattr__(self, "pmax", float(self.pmax))

    @classmethod
    def default(cls, brownian: BrownianParams, beta: float, points: int = 21) -> "MomentumGrid3":
        return cls(points, 5.0 * brownian.thermal_momentum(beta))

    @property
    def half(self) -> int:
        return (self.points_per_axis - 1) // 2

    @property
    def spacing(self) -> float:
        return self.pmax / self.half

    @property
    def cell(self) -> float:
        return self.spacing**3

    @property
    def size(self) -> int:
        return self.points_per_axis**3

    @property
    def ints(self) -> np.ndarray:
        h = self.half
        r = np.arange(-h, h + 1)
        return np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)

    @property
    def momenta(self) -> np.ndarray:
        return self.spacing * self.ints

    def index(self, ints) -> np.ndarray:
        """Flat index of integer vectors; -1 outside the grid."""
        ints = np.asarray(ints)
        h, n = self.half, self.points_per_axis
        inside = np.all(np.abs(ints) <= h, axis=-1)
        k = ints + h
        flat = (k[..., 0] * n + k[..., 1]) * n + k[..., 2]
        return np.where(inside, flat, -1)

    def describe(self) -> dict:
        return {"points": self.points_per_axis, "pmax": self.pmax}


# --------------------------------------------------------------------------
# states


def thermal_state(grid: MomentumGrid3, brownian: BrownianParams, beta: float) -> np.ndarray:
    """Discrete Maxwell populations exp(-beta P^2 / 2M), normalized on the grid."""
    p2 = np.sum(grid.momenta**2, axis=-1)
    rho = np.exp(-beta * p2 / (2.0 * brownian.mass))
    return rho / (rho.sum() * grid.cell)


def gaussian_state(grid: MomentumGrid3, center, width: float) -> np.ndarray:
    d = grid.momenta - np.asarray(center, dtype=float)
    rho = np.exp(-np.sum(d * d, axis=-1) / (2.0 * width**2))
    return rho / (rho.sum() * grid.cell)


# --------------------------------------------------------------------------
# diagonal (population) kernel


def _invariants(grid: MomentumGrid3, a_int: np.ndarray, out_int: np.ndarray):
    """Integer invariants (|a|^2, |q|^2, a.q) of incoming momentum a and transfer q = out - a."""
    q = out_int[None, :, :] - a_int[:, None, :]
    a2 = np.broadcast_to(np.sum(a_int * a_int, axis=-1)[:, None], q.shape[:-1])
    return a2, np.sum(q * q, axis=-1), np.sum(q * a_int[:, None, :], axis=-1)


class _KeyCodec:
    def __init__(self, half: int):
        self.q2r = 12 * half * half + 1
        self.off = 6 * half * half
        self.aqr = 2 * self.off + 1

    def encode(self, a2, q2, aq):
        return (a2.astype(np.int64) * self.q2r + q2) * self.aqr + (aq + self.off)

    def decode(self, keys):
        aq = keys % self.aqr - self.off
        rest = keys // self.aqr
        return rest // self.q2r, rest % self.q2r, aq


@dataclass(eq=False)
class DiagonalKernel:
    """Classical collision kernel on the grid.

    ``keys``/``values`` hold M_in(P, P; Q) for every distinct triple of
    integer invariants; :meth:`matrix` expands them into the dense transition
    matrix ``A[out, in] = M_in(P_out, P_out; P_out - P_in) * cell``.
    """

    grid: MomentumGrid3
    keys: np.ndarray
    values: np.ndarray
    header: dict = field(default_factory=dict)
    _matrix: np.ndarray | None = field(default=None, repr=False)

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            g = self.grid
            ints = g.ints
            codec = _KeyCodec(g.half)
            a = np.zeros((g.size, g.size))
            for s in range(0, g.size, _BLOCK):
                a2, q2, aq = _invariants(g, ints[s : s + _BLOCK], ints)
                k = codec.encode(a2, q2, aq)
                pos = np.clip(np.searchsorted(self.keys, k), 0, self.keys.size - 1)
                vals = np.where(q2 > 0, self.values[pos], 0.0)
                if np.any((q2 > 0) & (self.keys[pos] != k)):
                    raise NumericalError("GRID_MISMATCH", "kernel table does not cover the grid")
                a[:, s : s + _BLOCK] = vals.T * g.cell
            self._matrix = a
        return self._matrix

    def m_out_discrete(self) -> np.ndarray:
        """Grid-consistent loss rate: the column sums of the transition matrix."""
        return self.matrix().sum(axis=0)


def _unique_invariants(grid: MomentumGrid3) -> np.ndarray:
    ints = grid.ints
    codec = _KeyCodec(grid.half)
    parts = []
    for s in range(0, grid.size, _BLOCK):
        a2, q2, aq = _invariants(grid, ints[s : s + _BLOCK], ints)
        k = codec.encode(a2, q2, aq)
        parts.append(np.unique(k[q2 > 0]))
    return np.unique(np.concatenate(parts))


def kernel_header(grid: MomentumGrid3, coll: Collision, spec: QuadratureSpec) -> dict:
    from colldeco import __version__

    return {
        "kind": "qlbe-diagonal-kernel",
        "version": __version__,
        "grid": grid.describe(),
        "collision": coll.describe(),
        "model_hash": coll.model.fingerprint(),
        "quadrature": {"radial_nodes": spec.radial_nodes, "rel_tol": spec.rel_tol, "max_refinements": spec.max_refinements},
    }


def build_diagonal_kernel(
    grid: MomentumGrid3, coll: Collision, spec: QuadratureSpec = DEFAULT_SPEC, cache_path=None
) -> DiagonalKernel:
    """Evaluate M_in(P, P; Q) once per distinct invariant triple, optionally through a cache file."""
    from colldeco.qlbe import cache

    header = kernel_header(grid, coll, spec)
    if cache_path is not None:
        hit = cache.load_kernel(cache_path, header)
        if hit is not None:
            return DiagonalKernel(grid, hit["keys"], hit["values"], header)
    keys = _unique_invariants(grid)
    a2, q2, aq = _KeyCodec(grid.half).decode(keys)
    d = grid.spacing
    qn = d * np.sqrt(q2)
    p_par = d * aq / np.sqrt(q2)
    p_perp = d * np.sqrt(np.clip(a2 - aq * aq / q2, 0.0, None))
    if coll.model.isotropic:

        def evaluate(level):
            v = diagonal_core(qn, p_par, p_perp, coll, spec.refined(level).radial_nodes)
            return v, v

        values = refine(evaluate, spec, "grid kernel")
    else:
        # representative vectors: Q along z, incoming momentum in the x-z plane
        q = np.stack([np.zeros_like(qn), np.zeros_like(qn), qn], -1)
        p_in = np.stack([p_perp, np.zeros_like(qn), p_par], -1)
        values = m_in_diagonal(p_in + q, q, coll, spec)
    kernel = DiagonalKernel(grid, keys, np.asarray(values, dtype=float), header)
    if cache_path is not None:
        cache.save_kernel(cache_path, header, {"keys": keys, "values": kernel.values})
    return kernel


# --------------------------------------------------------------------------
# generators


class DiagonalGenerator:
    """Population dynamics d rho(P)/dt = sum_Q A rho - M_out(P) rho(P).

    ``trace_mode='discrete'`` uses the column sums of A as the loss rate, so
    gain and loss cancel exactly on the grid; ``'continuous'`` uses the
    classical loss rate evaluated at each grid point.
    """

    def __init__(self, kernel: DiagonalKernel, brownian: BrownianParams, *, m_out=None, trace_mode: str = "discrete"):
        if trace_mode not in ("discrete", "continuous"):
            raise InputError("VALIDATION_ERROR", "qlbe.trace_mode must be 'discrete' or 'continuous'")
        self.grid = kernel.grid
        self.kernel = kernel
        self.brownian = brownian
        self.trace_mode = trace_mode
        self.a = kernel.matrix()
        if trace_mode == "discrete":
            self.m_out = kernel.m_out_discrete()
        else:
            if m_out is None:
                raise InputError("VALIDATION_ERROR", "continuous trace mode needs the classical loss rates")
            self.m_out = np.asarray(m_out, dtype=float)
        p2 = np.sum(self.grid.momenta**2, axis=-1)
        self._kin = p2 / (2.0 * brownian.mass)

    @property
    def max_rate(self) -> float:
        return float(np.max(self.m_out) + np.max(self.a.sum(axis=0)))

    def _check(self, rho):
        rho = np.asarray(rho)
        if rho.shape != (self.grid.size,):
            raise InputError("GRID_MISMATCH", f"state has shape {rho.shape}, grid has {self.grid.size} points")
        return rho

    def __call__(self, rho):
        rho = self._check(rho)
        return self.a @ rho - self.m_out * rho

    def trace(self, rho) -> float:
        return float(np.real(np.sum(rho)) * self.grid.cell)

    def positivity(self, rho) -> float:
        """Most negative population relative to the largest one."""
        r = np.real(rho)
        return float(min(r.min(), 0.0) / max(r.max(), 1e-300))

    def hermiticity_defect(self, rho) -> float:
        return float(np.max(np.abs(np.imag(rho)), initial=0.0))

    def observables(self, rho) -> dict:
        r = np.real(rho) * self.grid.cell
        tr = r.sum()
        p = self.grid.momenta
        mean = (r[:, None] * p).sum(axis=0) / tr
        return {
            "trace": float(tr),
            "kinetic_energy": float((r * self._kin).sum() / tr),
            "p_mean_x": float(mean[0]),
            "p_mean_y": float(mean[1]),
            "p_mean_z": float(mean[2]),
        }


def sector_positions(grid: MomentumGrid3, shift) -> np.ndarray:
    """Indices of grid points P for which P - shift is also on the grid."""
    shift = np.asarray(shift, dtype=int)
    return np.nonzero(grid.index(grid.ints - shift) >= 0)[0]


def sector_kernel(grid: MomentumGrid3, coll: Collision, shift, spec: QuadratureSpec = DEFAULT_SPEC, variant="monitoring"):
    """B[out, in] = M_in(P_out, P_out - s; P_out - P_in) * cell on the valid positions of sector s."""
    pos = sector_positions(grid, shift)
    ints = grid.ints[pos]
    s_vec = grid.spacing * np.asarray(shift, dtype=float)
    q_int = ints[:, None, :] - ints[None, :, :]
    nz = np.any(q_int != 0, axis=-1)
    o, i = np.nonzero(nz)
    p1 = grid.spacing * ints[o]
    q = grid.spacing * q_int[o, i]
    vals = m_in(p1, p1 - s_vec, q, coll, spec, variant)
    b = np.zeros((pos.size, pos.size), dtype=complex)
    b[o, i] = vals * grid.cell
    return pos, b


class SectorGenerator:
    """Populations plus selected coherence sectors rho(P, P - s).

    Each sector is closed under the dynamics.  State layout: complex array
    of shape (len(shifts) + 1, N); entries of a sector row outside its valid
    positions are ignored and kept at zero.
    """

    def __init__(
        self,
        diagonal: DiagonalGenerator,
        coll: Collision,
        shifts,
        spec: QuadratureSpec = DEFAULT_SPEC,
        variant: str = "monitoring",
        kinetic: bool = False,
    ):
        self.diagonal = diagonal
        self.grid = diagonal.grid
        self.shifts = [tuple(int(x) for x in s) for s in shifts]
        if any(s == (0, 0, 0) for s in self.shifts):
            raise InputError("VALIDATION_ERROR", "coherence shifts must be nonzero")
        self.kinetic = kinetic
        p = self.grid.momenta
        self._sectors = []
        for s in self.shifts:
            pos, b = sector_kernel(self.grid, coll, s, spec, variant)
            other = self.grid.index(self.grid.ints[pos] - np.array(s))
            loss = 0.5 * (diagonal.m_out[pos] + diagonal.m_out[other])
            if kinetic:
                kin = (np.sum(p[pos] ** 2, -1) - np.sum(p[other] ** 2, -1)) / (2.0 * coll.big_m)
                loss = loss + 1j * kin
            self._sectors.append((pos, b, loss))

    @property
    def shape(self):
        return (len(self.shifts) + 1, self.grid.size)

    @property
    def max_rate(self) -> float:
        rate = self.diagonal.max_rate
        for _, b, loss in self._sectors:
            rate = max(rate, float(np.max(np.abs(loss)) + np.max(np.abs(b).sum(axis=0), initial=0.0)))
        return rate

    def __call__(self, state):
        state = np.asarray(state)
        if state.shape != self.shape:
            raise InputError("GRID_MISMATCH", f"state has shape {state.shape}, expected {self.shape}")
        out = np.zeros(self.shape, dtype=complex)
        out[0] = self.diagonal(np.real(state[0]))
        for k, (pos, b, loss) in enumerate(self._sectors, start=1):
            x = state[k, pos]
            out[k, pos] = b @ x - loss * x
        return out

    def trace(self, state) -> float:
        return self.diagonal.trace(state[0])

    def positivity(self, state) -> float:
        return self.diagonal.positivity(state[0])

    def hermiticity_defect(self, state) -> float:
        return float(np.max(np.abs(np.imag(state[0])), initial=0.0))

    def observables(self, state) -> dict:
        obs = self.diagonal.observables(np.real(state[0]))
        for k, s in enumerate(self.shifts, start=1):
            obs["coherence_%d_%d_%d" % s] = float(np.sum(np.abs(state[k])) * self.grid.cell)
        return obs


class DenseGenerator:
    """Full rho(P, P') on small grids, assembled from every coherence sector."""

    def __init__(self, diagonal: DiagonalGenerator, coll: Collision, spec=DEFAULT_SPEC, variant="monitoring", kinetic=False):
        grid = diagonal.grid
        if grid.points_per_axis > DENSE_MAX_POINTS:
            raise InputError("VALIDATION_ERROR", f"dense states need at most {DENSE_MAX_POINTS} points per axis")
        self.grid = grid
        self.diagonal = diagonal
        n = grid.points_per_axis
        r = np.arange(-(n - 1), n)
        all_shifts = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
        # one representative of each +-s pair; the partner follows by Hermiticity
        half = [tuple(s) for s in all_shifts if tuple(s) > (0, 0, 0)]
        self.sectors = SectorGenerator(diagonal, coll, half, spec, variant, kinetic)
        ints = grid.ints
        self._rows = []
        for s in self.sectors.shifts:
            pos = sector_positions(grid, s)
            self._rows.append((pos, grid.index(ints[pos] - np.array(s))))

    @property
    def max_rate(self) -> float:
        return self.sectors.max_rate

    def __call__(self, rho):
        rho = np.asarray(rho)
        n = self.grid.size
        if rho.shape != (n, n):
            raise InputError("GRID_MISMATCH", f"state has shape {rho.shape}, expected {(n, n)}")
        state = np.zeros(self.sectors.shape, dtype=complex)
        state[0] = np.real(np.diagonal(rho))
        for k, (pos, other) in enumerate(self._rows, start=1):
            state[k, pos] = rho[pos, other]
        d = self.sectors(state)
        out = np.zeros((n, n), dtype=complex)
        idx = np.arange(n)
        out[idx, idx] = d[0]
        for k, (pos, other) in enumerate(self._rows, start=1):
            out[pos, other] = d[k, pos]
            out[other, pos] = np.conj(d[k, pos])
        return out

    def trace(self, rho) -> float:
        return float(np.real(np.trace(rho)) * self.grid.cell)

    def positivity(self, rho) -> float:
        w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        return float(min(w.min(), 0.0) / max(w.max(), 1e-300))

    def hermiticity_defect(self, rho) -> float:
        return float(np.max(np.abs(rho - rho.conj().T), initial=0.0))

    def observables(self, rho) -> dict:
        obs = self.diagonal.observables(np.real(np.diagonal(rho)))
        off = rho - np.diag(np.diagonal(rho))
        obs["coherence_norm"] = float(np.sum(np.abs(off)) * self.grid.cell)
        return obs


def loss_rates(grid: MomentumGrid3, coll: Collision, spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """Classical loss rate at every grid point (continuous formula)."""
    return m_out_cl(grid.momenta, coll, spec)
