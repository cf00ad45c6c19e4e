"""Evaluation, quadrature, interpolation, and surrogate derivatives.

Interpolation works tensor grid by tensor grid: values at each tensor's
knots are gathered from the reduced table through the extended->reduced
map, the tensor-product Lagrange interpolant is evaluated in barycentric
form, and the results accumulate with the combination coefficients.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import ReducedGrid, SparseGrid, lattice_keys
from ._bary import barycentric_weights, basis_matrix

__all__ = [
    "EvaluationTable",
    "Domain",
    "evaluate_on_grid",
    "quadrature",
    "interpolate",
    "gradient",
    "hessian",
]

_QUERY_CHUNK = 512


class EvaluationError(RuntimeError):
    """A user function failed at a grid knot."""

    def __init__(self, knot, cause):
        super().__init__(f"function evaluation failed at knot {knot}: {cause}")
        self.knot = np.asarray(knot)
        self.cause = cause


@dataclass
class EvaluationTable:
    """Function values on a reduced grid, one column per knot."""

    values: np.ndarray
    new_evaluations: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        self.values = v

    @property
    def n_outputs(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Domain:
    """Axis-aligned bounding box; rows are lower and upper bounds."""

    bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[0] != 2:
            raise ValueError("bounds must be a 2 x dim matrix")
        finite = np.isfinite(b[0]) & np.isfinite(b[1])
        if np.any(b[0, finite] >= b[1, finite]):
            raise ValueError("lower bounds must be below upper bounds")
        object.__setattr__(self, "bounds", b)

    @property
    def dim(self) -> int:
        return self.bounds.shape[1]

    @property
    def lower(self) -> np.ndarray:
        return self.bounds[0]

    @property
    def upper(self) -> np.ndarray:
        return self.bounds[1]

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower[:, None]) & (pts <= self.upper[:, None]), axis=0)


def _call_f(f, knot):
    try:
        out = np.atleast_1d(np.asarray(f(knot), dtype=float)).ravel()
    except Exception as exc:  # attach the offending knot
        raise EvaluationError(knot, exc) from exc
    return out


def evaluate_on_grid(f, reduced: ReducedGrid, old=None, workers: int = 1) -> EvaluationTable:
    """Evaluate ``f`` at every reduced knot, recycling old evaluations.

    ``old`` is a previous (EvaluationTable, SparseGrid, ReducedGrid) triple
    (the grid entry may be None; only the reduced knots are matched).
    Columns whose knot already appears in the old reduced grid are copied
    bitwise; only genuinely new knots trigger calls of ``f``.  When
    ``workers`` exceeds one, distinct knots may be evaluated concurrently,
    so ``f`` must tolerate concurrent invocation.
    """
    knots = reduced.knots
    count = reduced.size
    copied: dict[int, np.ndarray] = {}
    if old is not None:
        old_table, _, old_reduced = old
        old_vals = old_table.values if isinstance(old_table, EvaluationTable) else np.atleast_2d(old_table)
        lookup = {
            key: p for p, key in enumerate(lattice_keys(old_reduced.knots, reduced.tol))
        }
        for p, key in enumerate(lattice_keys(knots, reduced.tol)):
            q = lookup.get(key)
            if q is not None:
                copied[p] = old_vals[:, q]
    todo = [p for p in range(count) if p not in copied]
    results: dict[int, np.ndarray] = {}
    if todo:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for p, col in zip(todo, pool.map(lambda p: _call_f(f, knots[:, p]), todo)):
                    results[p] = col
        else:
            for p in todo:
                results[p] = _call_f(f, knots[:, p])
    n_out = next(iter(results.values())).size if results else next(iter(copied.values())).size
    values = np.empty((n_out, count))
    for p, col in copied.items():
        values[:, p] = col
    for p, col in results.items():
        if col.size != n_out:
            raise ValueError("function returned outputs of inconsistent length")
        values[:, p] = col
    return EvaluationTable(values, new_evaluations=len(todo))


def quadrature(values_or_f, grid_or_reduced):
    """Integral of the grid values against the reduced weights.

    With an EvaluationTable (or plain matrix), returns the length-V vector
    of integrals.  With a callable, evaluates it first and returns the pair
    (integrals, EvaluationTable).  A SparseGrid argument is reduced on the
    fly.
    """
    if isinstance(grid_or_reduced, SparseGrid):
        from .grid import reduce_grid

        reduced = reduce_grid(grid_or_reduced)
    else:
        reduced = grid_or_reduced
    if callable(values_or_f):
        table = evaluate_on_grid(values_or_f, reduced)
        return quadrature(table, reduced), table
    vals = values_or_f.values if isinstance(values_or_f, EvaluationTable) else np.atleast_2d(np.asarray(values_or_f, dtype=float))
    if vals.shape[1] != reduced.size:
        raise ValueError(
            f"values have {vals.shape[1]} columns, reduced grid has {reduced.size} knots"
        )
    return vals @ reduced.weights


def _gather_tensor_values(grid: SparseGrid, reduced: ReducedGrid, values: np.ndarray):
    """Per-tensor value matrices, via the extended->reduced map."""
    offsets = grid.tensor_offsets()
    out = []
    for t, start in zip(grid.tensors, offsets[:-1]):
        sel = reduced.n[start : start + t.size]
        out.append(values[:, sel])
    return out


def interpolate(grid: SparseGrid, reduced: ReducedGrid, values, points) -> np.ndarray:
    """Evaluate the sparse-grid interpolant at query points (dim x Q).

    Reproduces exactly any polynomial the grid spans; for nested knot
    families the interpolant matches the data at the grid knots.
    """
    vals = values.values if isinstance(values, EvaluationTable) else np.atleast_2d(np.asarray(values, dtype=float))
    if vals.shape[1] != reduced.size:
        raise ValueError("values do not conform to the reduced grid")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] != grid.dim:
        raise ValueError(f"points must be {grid.dim} x Q")
    n_out = vals.shape[0]
    Q = points.shape[1]
    result = np.zeros((n_out, Q))
    tensor_vals = _gather_tensor_values(grid, reduced, vals)
    bary = [
        [(t.knots_per_dim[n], barycentric_weights(t.knots_per_dim[n])) for n in range(grid.dim)]
        for t in grid.tensors
    ]
    for lo in range(0, Q, _QUERY_CHUNK):
        chunk = points[:, lo : lo + _QUERY_CHUNK]
        for t, tv, tb in zip(grid.tensors, tensor_vals, bary):
            basis = None
            for n in range(grid.dim):
                nodes, bw = tb[n]
                B = basis_matrix(nodes, bw, chunk[n])
                if basis is None:
                    basis = B
                else:
                    # keep the first dimension fastest in the flat index
                    basis = (B[:, :, None] * basis[:, None, :]).reshape(chunk.shape[1], -1)
            result[:, lo : lo + chunk.shape[1]] += t.coeff * (tv @ basis.T)
    return result


def _default_steps(domain: Domain, points: np.ndarray, h: float | None) -> np.ndarray:
    """Finite-difference steps, shape like ``points``.

    Bounded directions use (b - a) / 1e5; unbounded ones scale with the
    query coordinate.
    """
    if h is not None:
        if h <= 0:
            raise ValueError("finite-difference step must be positive")
        return np.full(points.shape, float(h))
    lo, hi = domain.lower, domain.upper
    steps = np.empty(points.shape)
    for n in range(domain.dim):
        if np.isfinite(lo[n]) and np.isfinite(hi[n]):
            steps[n, :] = (hi[n] - lo[n]) / 1e5
        else:
            steps[n, :] = 1e-5 * np.maximum(1.0, np.abs(points[n, :]))
    return steps


def _warn_outside(domain: Domain, points: np.ndarray, what: str):
    if not np.all(domain.contains(points)):
        warnings.warn(
            f"{what}: query points outside the domain; the global polynomial extrapolates",
            RuntimeWarning,
            stacklevel=3,
        )


def gradient(grid: SparseGrid, reduced: ReducedGrid, values, domain: Domain,
             points, h: float | None = None) -> np.ndarray:
    """Centered-difference gradient of a scalar surrogate at each point.

    Points closer than one step to a finite boundary switch to one-sided
    second-order differences, keeping the error order uniform.
    """
    vals = values.values if isinstance(values, EvaluationTable) else np.atleast_2d(np.asarray(values, dtype=float))
    if vals.shape[0] != 1:
        raise ValueError("gradient requires a single-output value table")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _warn_outside(domain, points, "gradient")
    N, Q = points.shape
    steps = _default_steps(domain, points, h)
    lo, hi = domain.lower, domain.upper
    # build all displaced points, then a single interpolate call
    batches = []
    plans = []  # (kind, n, q, step)
    for n in range(N):
        for q in range(Q):
            s = steps[n, q]
            x = points[:, q]
            if np.isfinite(hi[n]) and x[n] + s > hi[n]:
                kind = "backward"
                offs = (0.0, -s, -2.0 * s)
            elif np.isfinite(lo[n]) and x[n] - s < lo[n]:
                kind = "forward"
                offs = (0.0, s, 2.0 * s)
            else:
                kind = "centered"
                offs = (s, -s)
            for o in offs:
                p = x.copy()
                p[n] += o
                batches.append(p)
            plans.append((kind, n, q, s))
    fvals = interpolate(grid, reduced, vals, np.array(batches).T)[0]
    out = np.empty((N, Q))
    pos = 0
    for kind, n, q, s in plans:
        if kind == "centered":
            out[n, q] = (fvals[pos] - fvals[pos + 1]) / (2.0 * s)
            pos += 2
        elif kind == "forward":
            out[n, q] = (-3.0 * fvals[pos] + 4.0 * fvals[pos + 1] - fvals[pos + 2]) / (2.0 * s)
            pos += 3
        else:
            out[n, q] = (3.0 * fvals[pos] - 4.0 * fvals[pos + 1] + fvals[pos + 2]) / (2.0 * s)
            pos += 3
    return out


def hessian(grid: SparseGrid, reduced: ReducedGrid, values, domain: Domain,
            point, h: float | None = None) -> np.ndarray:
    """Centered second-difference Hessian of a scalar surrogate at one point."""
    vals = values.values if isinstance(values, EvaluationTable) else np.atleast_2d(np.asarray(values, dtype=float))
    if vals.shape[0] != 1:
        raise ValueError("hessian requires a single-output value table")
    x = np.asarray(point, dtype=float).ravel()
    N = x.size
    _warn_outside(domain, x[:, None], "hessian")
    steps = _default_steps(domain, x[:, None], h)[:, 0]
    pts = [x]
    for n in range(N):
        for sgn in (1.0, -1.0):
            p = x.copy()
            p[n] += sgn * steps[n]
            pts.append(p)
    pairs = [(n, k) for n in range(N) for k in range(n + 1, N)]
    for n, k in pairs:
        for sn, sk in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            p = x.copy()
            p[n] += sn * steps[n]
            p[k] += sk * steps[k]
            pts.append(p)
    fv = interpolate(grid, reduced, vals, np.array(pts).T)[0]
    H = np.empty((N, N))
    f0 = fv[0]
    for n in range(N):
        fp, fm = fv[1 + 2 * n], fv[2 + 2 * n]
        H[n, n] = (fp - 2.0 * f0 + fm) / steps[n] ** 2
    base = 1 + 2 * N
    for j, (n, k) in enumerate(pairs):
        fpp, fpm, fmp, fmm = fv[base + 4 * j : base + 4 * j + 4]
        val = (fpp - fpm - fmp + fmm) / (4.0 * steps[n] * steps[k])
        H[n, k] = H[k, n] = val
    return H
