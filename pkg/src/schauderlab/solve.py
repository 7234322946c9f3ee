"""Finite-difference solvers for the four operator classes on a Dirichlet box.

Nondivergence form uses central second differences plus the 4-point cross for
mixed terms; divergence form uses flux differences with face-averaged
coefficients. Parabolic problems are stepped by backward Euler with the
coefficient frozen at each step's end time (averaging across a coefficient
jump would pollute the step). Fully periodic boxes solve a mean-zero
Lagrange-augmented system instead (the plain matrix is singular there).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import CoefficientField, VectorField
from .lattice import AnisotropicGrid, GridFunction, GridError

DIRECT_LIMIT = 60_000  # unknown count up to which a sparse LU is preferred


class SolveError(RuntimeError):
    pass


@dataclass
class SolveReport:
    residual: float
    iterations: int
    wall_time: float
    method: str


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    tol: float
    maxiter: int


# -- stencil fields --------------------------------------------------------------


def _shift_values(arr: np.ndarray, offset: tuple[int, ...], periodic: tuple[bool, ...]) -> np.ndarray:
    """out[x] = arr[x + offset], wrapping periodic axes and clamping the rest.

    Clamped entries only feed rows that are discarded (boundary rows)."""
    out = arr
    for ax, off in enumerate(offset):
        if off == 0:
            continue
        if periodic[ax]:
            out = np.roll(out, -off, axis=ax)
        else:
            idx = np.clip(np.arange(arr.shape[ax]) + off, 0, arr.shape[ax] - 1)
            out = np.take(out, idx, axis=ax)
    return out


def _add(stencil: dict, offset: tuple[int, ...], coeff: np.ndarray) -> None:
    if offset in stencil:
        stencil[offset] = stencil[offset] + coeff
    else:
        stencil[offset] = np.array(coeff, dtype=float, copy=True)


def nondiv_stencil(grid: AnisotropicGrid, entries: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
    """Offset -> coefficient arrays for  sum_ij a^{ij} D_ij  at the nodes."""
    d = grid.d
    h = grid.spacings
    zero = (0,) * d
    st: dict[tuple[int, ...], np.ndarray] = {}
    for i in range(d):
        aii = entries[..., i, i]
        ei = tuple(1 if k == i else 0 for k in range(d))
        mei = tuple(-v for v in ei)
        _add(st, ei, aii / h[i] ** 2)
        _add(st, mei, aii / h[i] ** 2)
        _add(st, zero, -2.0 * aii / h[i] ** 2)
    for i in range(d):
        for j in range(i + 1, d):
            aij = entries[..., i, j]
            c = 2.0 * aij / (4.0 * h[i] * h[j])
            for si in (1, -1):
                for sj in (1, -1):
                    off = tuple(si if k == i else (sj if k == j else 0) for k in range(d))
                    _add(st, off, si * sj * c)
    return st


def div_stencil(grid: AnisotropicGrid, entries: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
    """Offset -> coefficient arrays for  sum_i D_i(a^{ij} D_j u)  in flux form
    with arithmetic face averages."""
    d = grid.d
    h = grid.spacings
    periodic = tuple(b == "periodic" for b in grid.boundary)
    zero = (0,) * d
    st: dict[tuple[int, ...], np.ndarray] = {}
    for i in range(d):
        ei = tuple(1 if k == i else 0 for k in range(d))
        mei = tuple(-v for v in ei)
        for j in range(d):
            aij = entries[..., i, j]
            a_plus = 0.5 * (aij + _shift_values(aij, ei, periodic))
            a_minus = 0.5 * (aij + _shift_values(aij, mei, periodic))
            if j == i:
                _add(st, ei, a_plus / h[i] ** 2)
                _add(st, mei, a_minus / h[i] ** 2)
                _add(st, zero, -(a_plus + a_minus) / h[i] ** 2)
            else:
                ej = tuple(1 if k == j else 0 for k in range(d))
                c = 1.0 / (4.0 * h[i] * h[j])
                for sj in (1, -1):
                    oj = tuple(sj * v for v in ej)
                    _add(st, oj, sj * c * a_plus)
                    _add(st, tuple(x + y for x, y in zip(ei, oj)), sj * c * a_plus)
                    _add(st, oj, -sj * c * a_minus)
                    _add(st, tuple(x + y for x, y in zip(mei, oj)), -sj * c * a_minus)
    return st


def apply_stencil(grid: AnisotropicGrid, stencil: dict, values: np.ndarray) -> np.ndarray:
    """Apply a stencil field to full-grid values; rows on a Dirichlet boundary
    are zeroed (the stencil is one-sided-undefined there)."""
    periodic = tuple(b == "periodic" for b in grid.boundary)
    out = np.zeros_like(values)
    for off, coeff in stencil.items():
        out += coeff * _shift_values(values, off, periodic)
    mask = _unknown_mask(grid)
    out[~mask] = 0.0
    return out


# -- assembly ---------------------------------------------------------------------


def _unknown_mask(grid: AnisotropicGrid) -> np.ndarray:
    mask = np.ones(grid.counts, dtype=bool)
    for ax in range(grid.d):
        if grid.boundary[ax] == "periodic":
            continue
        sl = [slice(None)] * grid.d
        sl[ax] = 0
        mask[tuple(sl)] = False
        sl[ax] = -1
        mask[tuple(sl)] = False
    return mask


def _index_map(grid: AnisotropicGrid) -> tuple[np.ndarray, int]:
    mask = _unknown_mask(grid)
    idx = np.full(grid.counts, -1, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    return idx, int(mask.sum())


def _shift_index(idx: np.ndarray, offset: tuple[int, ...], periodic: tuple[bool, ...]) -> np.ndarray:
    """Index of the neighbour at x + offset; -1 where it falls off the box."""
    out = idx
    for ax, off in enumerate(offset):
        if off == 0:
            continue
        if periodic[ax]:
            out = np.roll(out, -off, axis=ax)
        else:
            n = idx.shape[ax]
            src = np.arange(n) + off
            valid = (src >= 0) & (src < n)
            taken = np.take(out, np.clip(src, 0, n - 1), axis=ax)
            shape = [1] * out.ndim
            shape[ax] = n
            out = np.where(valid.reshape(shape), taken, -1)
    return out


def assemble(grid: AnisotropicGrid, stencil: dict) -> tuple[sp.csr_matrix, np.ndarray, int]:
    """Sparse matrix over the unknown nodes (zero Dirichlet data folded in)."""
    periodic = tuple(b == "periodic" for b in grid.boundary)
    idx, m = _index_map(grid)
    mask = idx >= 0
    rows_list, cols_list, data_list = [], [], []
    own = idx[mask]
    for off, coeff in stencil.items():
        nb = _shift_index(idx, off, periodic)[mask]
        c = np.broadcast_to(coeff, grid.counts)[mask]
        keep = nb >= 0
        rows_list.append(own[keep])
        cols_list.append(nb[keep])
        data_list.append(c[keep])
    A = sp.coo_matrix(
        (np.concatenate(data_list), (np.concatenate(rows_list), np.concatenate(cols_list))),
        shape=(m, m),
    ).tocsr()
    return A, idx, m


# -- linear solves ----------------------------------------------------------------


def _relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(b - A @ x) / nb)


def _solve_linear(
    A: sp.csr_matrix,
    b: np.ndarray,
    tol: float,
    maxiter: int = 4000,
    prefer_direct: bool = True,
) -> tuple[np.ndarray, int, str]:
    m = A.shape[0]
    if m <= DIRECT_LIMIT and (prefer_direct or m <= 5000):
        x = spla.splu(A.tocsc()).solve(b)
        return x, 1, "splu"
    # algebraic multigrid with Krylov acceleration for large (3-D) systems
    ml = pyamg.smoothed_aggregation_solver(A.tocsr(), max_coarse=500)
    residuals: list[float] = []
    x = ml.solve(b, tol=tol, accel="bicgstab", maxiter=maxiter, residuals=residuals)
    if _relative_residual(A, x, b) > tol * 10.0:
        raise SolveError(f"AMG-BiCGStab failed to reach rtol={tol} within {maxiter} cycles")
    return x, max(0, len(residuals) - 1), "amg-bicgstab"


def _solve_periodic(A: sp.csr_matrix, b: np.ndarray, tol: float) -> tuple[np.ndarray, int, str, float]:
    """Mean-zero gauge for the all-periodic (singular) system via a Lagrange
    row. The multiplier absorbs any component of b outside range(A) (possible
    for nondivergence operators with variable coefficients), so the residual
    is measured against the augmented system."""
    m = A.shape[0]
    ones = np.ones((m, 1))
    K = sp.bmat([[A, ones], [ones.T, None]], format="csc")
    rhs = np.concatenate([b, [0.0]])
    sol = spla.splu(K).solve(rhs)
    res = float(np.linalg.norm(rhs - K @ sol) / max(np.linalg.norm(rhs), 1e-300))
    return sol[:m], 1, "splu-augmented", res


@dataclass
class _Factorized:
    solve: object
    A: sp.csr_matrix


def _spatial_grid(grid: AnisotropicGrid) -> AnisotropicGrid:
    if grid.time_axis is None:
        return grid
    return AnisotropicGrid(grid.d, grid.q, grid.extents, grid.counts, grid.boundary, None)


def _check_elliptic_inputs(a: CoefficientField, data_grid: AnisotropicGrid) -> None:
    if a.time_dependent:
        raise SolveError("elliptic solves require time-independent coefficients")
    if a.grid.counts != data_grid.counts or a.grid.extents != data_grid.extents:
        raise SolveError("coefficients and data live on different grids")
    if not np.allclose(a.values, np.swapaxes(a.values, -1, -2), atol=1e-12):
        raise SolveError("nondivergence solves require symmetric coefficients")


def _divergence_rhs(grid: AnisotropicGrid, comps: list[np.ndarray]) -> np.ndarray:
    """Discrete divergence of face-interpolated components (telescopes to
    central differences)."""
    periodic = tuple(b == "periodic" for b in grid.boundary)
    out = np.zeros(grid.counts)
    for i in range(grid.d):
        ei = tuple(1 if k == i else 0 for k in range(grid.d))
        mei = tuple(-v for v in ei)
        out += (_shift_values(comps[i], ei, periodic) - _shift_values(comps[i], mei, periodic)) / (2.0 * grid.spacing(i))
    return out


def _finish(grid: AnisotropicGrid, x: np.ndarray, idx: np.ndarray) -> GridFunction:
    vals = np.zeros(grid.counts)
    vals[idx >= 0] = x
    return GridFunction(grid, vals)


def solve_elliptic_nondiv(
    a: CoefficientField,
    f: GridFunction,
    tol: float = 1e-10,
) -> tuple[GridFunction, SolveReport]:
    """a^{ij} D_ij u = f with zero Dirichlet data on the box boundary."""
    grid = f.grid
    if grid.has_time:
        raise SolveError("elliptic right-hand side must not carry a time axis")
    _check_elliptic_inputs(a, grid)
    t0 = time.perf_counter()
    st = nondiv_stencil(grid, a.spatial_entries())
    A, idx, m = assemble(grid, st)
    b = f.values[idx >= 0]
    if all(bd == "periodic" for bd in grid.boundary):
        x, iters, method, res = _solve_periodic(A, b, tol)
    else:
        x, iters, method = _solve_linear(A, b, tol, prefer_direct=grid.d <= 2)
        res = _relative_residual(A, x, b)
    if res > max(tol * 10.0, 1e-8):
        raise SolveError(f"solver residual {res} above tolerance {tol}")
    return _finish(grid, x, idx), SolveReport(res, iters, time.perf_counter() - t0, method)


def solve_elliptic_div(
    a: CoefficientField,
    fvec: VectorField,
    tol: float = 1e-10,
) -> tuple[GridFunction, SolveReport]:
    """D_i(a^{ij} D_j u) = div f with zero Dirichlet data."""
    grid = fvec.grid
    if grid.has_time:
        raise SolveError("elliptic right-hand side must not carry a time axis")
    _check_elliptic_inputs(a, grid)
    t0 = time.perf_counter()
    st = div_stencil(grid, a.spatial_entries())
    A, idx, m = assemble(grid, st)
    b = _divergence_rhs(grid, [c.values for c in fvec.components])[idx >= 0]
    if all(bd == "periodic" for bd in grid.boundary):
        x, iters, method, res = _solve_periodic(A, b, tol)
    else:
        x, iters, method = _solve_linear(A, b, tol, prefer_direct=grid.d <= 2)
        res = _relative_residual(A, x, b)
    if res > max(tol * 10.0, 1e-8):
        raise SolveError(f"solver residual {res} above tolerance {tol}")
    return _finish(grid, x, idx), SolveReport(res, iters, time.perf_counter() - t0, method)


def _parabolic_setup(a: CoefficientField, f_grid: AnisotropicGrid, u0: GridFunction):
    if f_grid.time_axis is None:
        raise SolveError("parabolic solves need data on a grid with a time axis")
    spatial = _spatial_grid(f_grid)
    if u0.grid.counts != spatial.counts or u0.grid.extents != spatial.extents:
        raise SolveError("initial data does not match the spatial grid")
    if a.grid.counts != f_grid.counts:
        raise SolveError("coefficients and data live on different grids")
    if not np.allclose(a.values, np.swapaxes(a.values, -1, -2), atol=1e-12):
        raise SolveError("parabolic solves require symmetric coefficients")
    if any(bd == "periodic" for bd in f_grid.boundary):
        raise SolveError("parabolic solves support Dirichlet boxes only")
    return spatial


def _parabolic_run(
    a: CoefficientField,
    grid: AnisotropicGrid,
    u0: GridFunction,
    rhs_at,
    form: str,
    tol: float,
    reuse_factorization: bool = True,
) -> tuple[GridFunction, SolveReport]:
    spatial = _spatial_grid(grid)
    ta = grid.time_axis
    tau = ta.tau
    t0 = time.perf_counter()
    idx, m = _index_map(spatial)
    eye = sp.identity(m, format="csr")
    cache: dict[int, object] = {}
    make_stencil = nondiv_stencil if form == "nondiv" else div_stencil

    u_all = np.zeros(grid.shape)
    u_all[0] = u0.values
    for ax in range(grid.d):
        sl = [slice(None)] * grid.d
        sl[ax] = 0
        u_all[(0,) + tuple(sl)] = 0.0
        sl[ax] = -1
        u_all[(0,) + tuple(sl)] = 0.0

    total_iters = 0
    worst_res = 0.0
    u_prev = u_all[0][idx >= 0]
    for n in range(1, ta.n):
        key = a.t_cell(n) if reuse_factorization else n
        fac = cache.get(key)
        if fac is None:
            entries = a.spatial_entries(n if a.time_dependent else None)
            A, _, _ = assemble(spatial, make_stencil(spatial, entries))
            B = (eye - tau * A).tocsc()
            fac = _Factorized(spla.splu(B).solve, B.tocsr())
            cache[key] = fac
        b = u_prev + tau * rhs_at(n)[idx >= 0]
        x = fac.solve(b)
        worst_res = max(worst_res, _relative_residual(fac.A, x, b))
        total_iters += 1
        u_prev = x
        u_all[n][idx >= 0] = x
    if worst_res > max(tol * 10.0, 1e-8):
        raise SolveError(f"step residual {worst_res} above tolerance {tol}")
    rep = SolveReport(worst_res, total_iters, time.perf_counter() - t0, "backward-euler/splu")
    return GridFunction(grid, u_all), rep


def solve_parabolic_nondiv(
    a: CoefficientField,
    f: GridFunction,
    u0: GridFunction,
    tol: float = 1e-10,
    reuse_factorization: bool = True,
) -> tuple[GridFunction, SolveReport]:
    """u_t - a^{ij}(t, x'') D_ij u = f by backward Euler, zero lateral data."""
    _parabolic_setup(a, f.grid, u0)
    return _parabolic_run(a, f.grid, u0, lambda n: f.values[n], "nondiv", tol, reuse_factorization)


def solve_parabolic_div(
    a: CoefficientField,
    fvec: VectorField,
    u0: GridFunction,
    tol: float = 1e-10,
    reuse_factorization: bool = True,
) -> tuple[GridFunction, SolveReport]:
    """u_t - D_i(a^{ij}(t, x'') D_j u) = div f by backward Euler."""
    grid = fvec.grid
    _parabolic_setup(a, grid, u0)
    spatial = _spatial_grid(grid)

    def rhs_at(n: int) -> np.ndarray:
        return _divergence_rhs(spatial, [c.values[n] for c in fvec.components])

    return _parabolic_run(a, grid, u0, rhs_at, "div", tol, reuse_factorization)
