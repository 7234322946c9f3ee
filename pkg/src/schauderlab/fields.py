"""Coefficient-field and synthetic-data generators.

Coefficient fields are piecewise constant on seeded random partitions of their
dependence support (a stand-in for merely measurable coefficients that stays
resolvable on desk-scale grids). Cell matrices are built as Q diag(lam) Q^T
with Q a seeded random orthogonal matrix, so two-sided ellipticity holds by
construction. Partition breakpoints are drawn as fractions of the axis, which
keeps the field stable under grid refinement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .lattice import AnisotropicGrid, GridFunction, GridError, load_grid_function, save_grid_function
from .mollify import plateau_bump

PATTERNS = ("constant", "t-only", "xpp-only", "t-and-xpp", "xprime-hoelder")


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric matrix field a^{ij} with a declared dependence pattern.

    ``values`` holds one (d, d) matrix per point of the dependence support:
    shape () for constant, (n_t,) for t-only, the x''-lattice shape for
    xpp-only (with t prepended for t-and-xpp), and the full spatial lattice
    for xprime-hoelder; trailing axes are always (d, d).
    """

    grid: AnisotropicGrid
    pattern: str
    nu: float
    values: np.ndarray
    symmetric: bool = True
    frobenius_bound: bool = False
    degenerate: bool = False
    hoelder_K: float = 0.0
    hoelder_delta: float | None = None
    seed: int | None = None
    t_cell_ids: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def time_dependent(self) -> bool:
        return self.pattern in ("t-only", "t-and-xpp")

    def t_cell(self, t_index: int) -> int:
        """Partition cell of a time level; keys factorization reuse."""
        if not self.time_dependent:
            return 0
        if self.t_cell_ids is not None:
            return int(self.t_cell_ids[t_index])
        return int(t_index)

    def spatial_entries(self, t_index: int | None = None) -> np.ndarray:
        """Matrix at every spatial lattice point, shape counts + (d, d)."""
        g = self.grid
        target = g.counts + (g.d, g.d)
        if self.pattern == "constant":
            return np.broadcast_to(self.values, target)
        if self.pattern == "xpp-only":
            v = self.values.reshape((1,) * g.q + self.values.shape)
            return np.broadcast_to(v, target)
        if self.pattern == "xprime-hoelder":
            return self.values
        if t_index is None:
            raise FieldError(f"pattern {self.pattern!r} needs a time index")
        v = self.values[t_index]
        if self.pattern == "t-only":
            return np.broadcast_to(v, target)
        v = v.reshape((1,) * g.q + v.shape)
        return np.broadcast_to(v, target)

    def entry_function(self, i: int, j: int, t_index: int | None = None) -> GridFunction:
        """One coefficient entry as a spatial grid function."""
        g = self.grid
        spatial = AnisotropicGrid(g.d, g.q, g.extents, g.counts, g.boundary, None)
        return GridFunction(spatial, np.ascontiguousarray(self.spatial_entries(t_index)[..., i, j], dtype=float))

    def support_matrices(self) -> np.ndarray:
        return self.values.reshape(-1, self.d, self.d)


def check_ellipticity(field: CoefficientField, tol: float = 1e-12) -> None:
    """Eigenvalue test of the declared ellipticity at every support point."""
    mats = field.support_matrices()
    nu = field.nu
    w = np.linalg.eigvalsh(mats)
    if w.max() > 1.0 / nu + tol:
        raise FieldError(f"upper ellipticity bound violated: {w.max()} > {1.0 / nu}")
    if field.degenerate:
        q = field.grid.q
        wq = np.linalg.eigvalsh(mats[:, :q, :q])
        if wq.min() < nu - tol:
            raise FieldError(f"x'-block lower bound violated: {wq.min()} < {nu}")
    elif w.min() < nu - tol:
        raise FieldError(f"lower ellipticity bound violated: {w.min()} < {nu}")
    if field.frobenius_bound:
        fro2 = np.sum(mats * mats, axis=(1, 2))
        if fro2.max() > 1.0 / nu**2 + tol:
            raise FieldError("divergence-form Frobenius bound violated")


@dataclass(frozen=True)
class VectorField:
    components: tuple[GridFunction, ...]

    def __post_init__(self) -> None:
        grids = {id(c.grid) for c in self.components}
        if len(grids) != 1:
            raise FieldError("vector field components must share one grid")

    @property
    def grid(self) -> AnisotropicGrid:
        return self.components[0].grid

    @property
    def d(self) -> int:
        return len(self.components)


# -- random partitions and SPD sampling -----------------------------------------


def _axis_cells(n: int, rng: np.random.Generator) -> np.ndarray:
    """Cell id per index: 4..16 cells with breakpoints at random axis fractions."""
    m = int(rng.integers(4, 17))
    fracs = np.sort(rng.uniform(0.05, 0.95, size=m - 1))
    pos = np.arange(n) / max(n - 1, 1)
    return np.searchsorted(fracs, pos, side="right")


def _random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))


def _spd_matrix(d: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    Q = _random_orthogonal(d, rng)
    lam = rng.uniform(lo, hi, size=d)
    A = (Q * lam) @ Q.T
    return (A + A.T) / 2.0


def _support_layout(grid: AnisotropicGrid, pattern: str, rng: np.random.Generator):
    """Cell-id array over the dependence support plus the time cell ids."""
    axes_ids: list[np.ndarray] = []
    t_ids = None
    if pattern in ("t-only", "t-and-xpp"):
        if grid.time_axis is None:
            raise FieldError(f"pattern {pattern!r} needs a grid with a time axis")
        t_ids = _axis_cells(grid.time_axis.n, rng)
        axes_ids.append(t_ids)
    if pattern in ("xpp-only", "t-and-xpp"):
        for ax in range(grid.q, grid.d):
            axes_ids.append(_axis_cells(grid.counts[ax], rng))
    if not axes_ids:
        return np.zeros((), dtype=int), 1, None
    mesh = np.meshgrid(*axes_ids, indexing="ij")
    cell = np.zeros(mesh[0].shape, dtype=int)
    stride = 1
    for ids, m in zip(reversed(mesh), reversed([a.max() + 1 for a in axes_ids])):
        cell += ids * stride
        stride *= m
    return cell, stride, t_ids


def random_rough_coefficients(
    grid: AnisotropicGrid,
    nu: float,
    pattern: str,
    seed: int,
    frobenius_bound: bool = False,
) -> CoefficientField:
    """Piecewise-constant SPD field with the requested dependence pattern and
    eigenvalues in [nu, 1/nu] (capped at 1/(nu sqrt(d)) under the
    divergence-form Frobenius convention)."""
    if pattern not in ("constant", "t-only", "xpp-only", "t-and-xpp"):
        raise FieldError(f"unsupported pattern {pattern!r}")
    if not (0.0 < nu <= 1.0):
        raise FieldError(f"ellipticity constant must be in (0, 1], got {nu}")
    d = grid.d
    hi = 1.0 / nu
    if frobenius_bound:
        hi = 1.0 / (nu * np.sqrt(d))
        if hi <= nu:
            raise FieldError(f"no eigenvalue range satisfies both bounds at nu={nu}, d={d}")
    rng = np.random.default_rng(seed)
    cell, ncells, t_ids = _support_layout(grid, pattern, rng)
    mats = np.stack([_spd_matrix(d, nu, hi, rng) for _ in range(ncells)])
    values = mats[cell] if cell.shape else mats[0]
    return CoefficientField(
        grid=grid,
        pattern=pattern,
        nu=nu,
        values=values,
        frobenius_bound=frobenius_bound,
        seed=seed,
        t_cell_ids=t_ids,
    )


def degenerate_coefficients(grid: AnisotropicGrid, nu: float, seed: int) -> CoefficientField:
    """Block field varying in x'' only: the x'-block keeps the full two-sided
    bound while the x''-block has at least one eigenvalue well below nu."""
    if not (0.0 < nu <= 1.0):
        raise FieldError(f"ellipticity constant must be in (0, 1], got {nu}")
    d, q = grid.d, grid.q
    rng = np.random.default_rng(seed)
    cell, ncells, _ = _support_layout(grid, "xpp-only", rng)
    mats = np.zeros((ncells, d, d))
    for c in range(ncells):
        mats[c, :q, :q] = _spd_matrix(q, nu, 1.0 / nu, rng)
        Qpp = _random_orthogonal(d - q, rng)
        lam = rng.uniform(0.0, 1.0 / nu, size=d - q)
        lam[0] = rng.uniform(0.002, 0.02) * nu  # genuinely degenerate direction
        App = (Qpp * lam) @ Qpp.T
        mats[c, q:, q:] = (App + App.T) / 2.0
    return CoefficientField(
        grid=grid,
        pattern="xpp-only",
        nu=nu,
        values=mats[cell],
        degenerate=True,
        seed=seed,
    )


def hoelder_coefficients(
    grid: AnisotropicGrid,
    nu: float,
    K: float,
    delta: float,
    seed: int,
    headroom_K: float | None = None,
) -> CoefficientField:
    """x''-rough base field plus K * rho(x') * B(x''), where rho is a
    unit-seminorm delta-cusp centred on the lattice and B has unit Frobenius
    norm, so the x'-Holder seminorm of every entry stays <= K. Eigenvalues are
    clipped to [nu, 1/nu]; headroom in the base draw keeps the clip inactive.

    headroom_K reserves eigenvalue headroom for a larger perturbation than K,
    so a sweep over K values shares one base field (same seed)."""
    if K < 0:
        raise FieldError("K must be nonnegative")
    if headroom_K is None:
        headroom_K = K
    if headroom_K < K:
        raise FieldError("headroom_K must be at least K")
    if not (0.0 < delta < 1.0):
        raise FieldError(f"delta must be in (0, 1), got {delta}")
    if not (0.0 < nu <= 1.0):
        raise FieldError(f"ellipticity constant must be in (0, 1], got {nu}")
    d, q = grid.d, grid.q
    rng = np.random.default_rng(seed)

    centre = tuple(float(grid.coords(ax)[grid.counts[ax] // 2]) for ax in range(q))
    r2 = None
    for ax in range(q):
        dx = grid.coords(ax) - centre[ax]
        dx = dx.reshape((-1,) + (1,) * (q - 1 - ax))
        r2 = dx * dx if r2 is None else r2 + dx * dx
    rho = np.power(np.sqrt(r2), delta)  # over the x' lattice, unit seminorm
    sup_rho = float(rho.max())

    headroom = headroom_K * sup_rho
    if 2.0 * headroom >= 1.0 / nu - nu:
        raise FieldError(f"K={headroom_K} too large relative to nu={nu}: clipping would destroy the perturbation")

    cell, ncells, _ = _support_layout(grid, "xpp-only", rng)
    base = np.stack([_spd_matrix(d, nu + headroom, 1.0 / nu - headroom, rng) for _ in range(ncells)])
    Bs = np.empty((ncells, d, d))
    for c in range(ncells):
        M = rng.standard_normal((d, d))
        B = (M + M.T) / 2.0
        Bs[c] = B / np.linalg.norm(B)
    a0 = base[cell]  # xpp_shape + (d, d)
    B = Bs[cell]

    full = a0.reshape((1,) * q + a0.shape) + rho.reshape(rho.shape + (1,) * (grid.d - q + 2)) * K * B
    full = np.broadcast_to(full, grid.counts + (d, d)).copy()
    # safety clip (inactive when the headroom was sufficient)
    w, V = np.linalg.eigh(full)
    w = np.clip(w, nu, 1.0 / nu)
    full = np.einsum("...ij,...j,...kj->...ik", V, w, V)
    full = (full + np.swapaxes(full, -1, -2)) / 2.0
    return CoefficientField(
        grid=grid,
        pattern="xprime-hoelder",
        nu=nu,
        values=full,
        hoelder_K=K,
        hoelder_delta=delta,
        seed=seed,
    )


def constant_coefficients(grid: AnisotropicGrid, matrix: np.ndarray, nu: float) -> CoefficientField:
    A = np.asarray(matrix, dtype=float)
    if A.shape != (grid.d, grid.d) or not np.allclose(A, A.T):
        raise FieldError("constant coefficient matrix must be symmetric d x d")
    return CoefficientField(grid=grid, pattern="constant", nu=nu, values=(A + A.T) / 2.0)


# -- synthetic right-hand sides --------------------------------------------------


@lru_cache(maxsize=32)
def cusp_profile_seminorm(delta: float, inner: float, outer: float, rmax: float) -> float:
    """Brute-force delta-Holder seminorm of r^delta * cutoff on a fine 1-D grid.

    The profile is radial, so this bounds the seminorm of the cusp in any
    dimension."""
    r = np.linspace(0.0, rmax, 2001)
    g = np.power(r, delta) * plateau_bump(r, inner, outer)
    best = 0.0
    for i in range(r.size - 1):
        dist = r[i + 1:] - r[i]
        quot = np.abs(g[i + 1:] - g[i]) / np.power(dist, delta)
        best = max(best, float(quot.max()))
    return best


@dataclass(frozen=True)
class SyntheticRhs:
    field: GridFunction
    xprime_bound: float  # analytic upper bound for [f]_{x',delta}
    delta: float
    kind: str
    seed: int
    centres: tuple[tuple[float, ...], ...] = dc_field(default=())


def synthetic_rhs(
    grid: AnisotropicGrid,
    delta: float,
    roughness_seed: int,
    kind: str = "rough-xpp",
    n_terms: int = 3,
) -> SyntheticRhs:
    """Sum of delta-cusps in x' modulated by bounded factors of x'' (and t).

    kinds: "smooth" (modulators identically 1), "rough-xpp" (piecewise-constant
    in x''), "time-dependent" (additionally piecewise-constant in t).
    """
    if not (0.0 < delta < 1.0):
        raise FieldError(f"delta must be in (0, 1), got {delta}")
    if kind not in ("smooth", "rough-xpp", "time-dependent"):
        raise FieldError(f"unknown synthetic kind {kind!r}")
    if kind == "time-dependent" and grid.time_axis is None:
        raise FieldError("time-dependent synthetic data needs a time axis")
    rng = np.random.default_rng(roughness_seed)
    q, d = grid.q, grid.d
    L = min(b - a for a, b in grid.extents[:q])
    inner, outer = 0.125 * L, 0.25 * L
    mesh = grid.meshgrid()
    xprime = mesh[grid.lead : grid.lead + q]
    xpp = mesh[grid.lead + q :]

    profile = cusp_profile_seminorm(delta, inner, outer, rmax=2.0 * outer)
    total = np.zeros(grid.shape)
    bound = 0.0
    centres = []
    for _ in range(max(1, n_terms)):
        c = float(rng.uniform(0.5, 1.5))
        centre = []
        for ax in range(q):
            a, b = grid.extents[ax]
            frac = (4 + int(rng.integers(0, 9))) / 16.0  # on-lattice for n-1 divisible by 16
            centre.append(a + frac * (b - a))
        centres.append(tuple(centre))
        r2 = None
        for ax in range(q):
            dx = xprime[ax] - centre[ax]
            r2 = dx * dx if r2 is None else r2 + dx * dx
        r = np.sqrt(r2)
        phi = np.power(r, delta) * plateau_bump(r, inner, outer)

        psi = np.ones(())
        sup_psi = 1.0
        if kind in ("rough-xpp", "time-dependent"):
            psi = np.ones(())
            for ax in range(q, d):
                ids = _axis_cells(grid.counts[ax], rng)
                vals = rng.choice([-1.0, 1.0], size=ids.max() + 1) * rng.uniform(0.3, 1.0, size=ids.max() + 1)
                shaped = vals[ids].reshape((-1,) + (1,) * (d - 1 - ax))
                psi = psi * shaped
            sup_psi = float(np.max(np.abs(np.broadcast_to(psi, grid.counts[q:])))) if d > q else 1.0
        chi = np.ones(())
        sup_chi = 1.0
        if kind == "time-dependent":
            ids = _axis_cells(grid.time_axis.n, rng)
            vals = rng.uniform(0.5, 1.5, size=ids.max() + 1)
            chi = vals[ids].reshape((-1,) + (1,) * d)
            sup_chi = float(vals[np.unique(ids)].max())

        term = c * phi * np.broadcast_to(psi, grid.counts) * chi
        total = total + np.broadcast_to(term, grid.shape)
        bound += abs(c) * sup_psi * sup_chi * profile
    return SyntheticRhs(
        field=GridFunction(grid, np.ascontiguousarray(total)),
        xprime_bound=bound,
        delta=delta,
        kind=kind,
        seed=roughness_seed,
        centres=tuple(centres),
    )


def synthetic_vector_rhs(
    grid: AnisotropicGrid,
    delta: float,
    seed: int,
    kind: str = "rough-xpp",
    n_terms: int = 2,
) -> VectorField:
    comps = tuple(
        synthetic_rhs(grid, delta, seed + 7919 * i, kind, n_terms).field for i in range(grid.d)
    )
    return VectorField(comps)


# -- serialization ----------------------------------------------------------------


def save_coefficient_field(field: CoefficientField, basepath: str | Path) -> Path:
    """Descriptor JSON plus one GridFunction file per (i, j) upper-triangle entry."""
    base = Path(basepath)
    base.parent.mkdir(parents=True, exist_ok=True)
    g = field.grid
    desc = {
        "pattern": field.pattern,
        "nu": field.nu,
        "K": field.hoelder_K,
        "delta": field.hoelder_delta,
        "seed": field.seed,
        "symmetric": field.symmetric,
        "frobenius_bound": field.frobenius_bound,
        "degenerate": field.degenerate,
        "d": g.d,
        "entries": [[i, j] for i in range(g.d) for j in range(i, g.d)],
        "time_cells": None if field.t_cell_ids is None else [int(c) for c in field.t_cell_ids],
    }
    dpath = base.with_suffix(".coeff.json")
    dpath.write_text(json.dumps(desc, sort_keys=True, indent=2) + "\n")
    nt = g.time_axis.n if (field.time_dependent and g.time_axis is not None) else 1
    for i in range(g.d):
        for j in range(i, g.d):
            vals = np.stack([field.spatial_entries(t if field.time_dependent else None)[..., i, j] for t in range(nt)])
            gf = GridFunction(
                AnisotropicGrid(g.d, g.q, g.extents, g.counts, g.boundary, g.time_axis if field.time_dependent else None),
                np.ascontiguousarray(vals if field.time_dependent else vals[0]),
            )
            save_grid_function(gf, base.parent / f"{base.name}_a{i}{j}")
    return dpath


def load_coefficient_field(grid: AnisotropicGrid, basepath: str | Path) -> CoefficientField:
    base = Path(basepath)
    desc = json.loads(base.with_suffix(".coeff.json").read_text())
    d = desc["d"]
    if d != grid.d:
        raise FieldError("descriptor dimension does not match grid")
    nt = grid.time_axis.n if (desc["pattern"] in ("t-only", "t-and-xpp") and grid.time_axis is not None) else 1
    lead = (nt,) if desc["pattern"] in ("t-only", "t-and-xpp") else ()
    full = np.zeros(lead + grid.counts + (d, d))
    for i in range(d):
        for j in range(i, d):
            gf = load_grid_function(base.parent / f"{base.name}_a{i}{j}")
            full[..., i, j] = gf.values
            full[..., j, i] = gf.values
    values = _collapse_support(full, grid, desc["pattern"])
    return CoefficientField(
        grid=grid,
        pattern=desc["pattern"],
        nu=desc["nu"],
        values=values,
        symmetric=desc["symmetric"],
        frobenius_bound=desc["frobenius_bound"],
        degenerate=desc["degenerate"],
        hoelder_K=desc["K"],
        hoelder_delta=desc["delta"],
        seed=desc["seed"],
        t_cell_ids=None if desc["time_cells"] is None else np.asarray(desc["time_cells"], dtype=int),
    )


def _collapse_support(full: np.ndarray, grid: AnisotropicGrid, pattern: str) -> np.ndarray:
    q = grid.q
    if pattern == "constant":
        return full[(0,) * grid.d]
    if pattern == "xpp-only":
        return full[(0,) * q]
    if pattern == "xprime-hoelder":
        return full
    if pattern == "t-only":
        return full[(slice(None),) + (0,) * grid.d]
    if pattern == "t-and-xpp":
        return full[(slice(None),) + (0,) * q]
    raise FieldError(f"unknown pattern {pattern!r}")
