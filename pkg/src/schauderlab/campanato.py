"""Partial Taylor polynomials, polynomial classes, and Campanato-style quotients.

The polynomial classes keep coefficients as functions of the frozen variables:
degree-k polynomials in x' with x''-dependent coefficients ("ptilde1"/"ptilde2"),
their parabolic variants with a linear time term ("phat1"/"phat2"), and affine
polynomials in all spatial variables with t-dependent coefficients ("pbar1").
Local best-fit errors are least-squares fits per frozen slice followed by the
sup-norm of the residual, an upper bound for the Chebyshev infimum within a
dimension-dependent factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import factorial

import numpy as np

from .lattice import (
    AnisotropicGrid,
    GridError,
    GridFunction,
    fd_derivative,
    fd_xprime_alpha,
    multi_indices_upto,
)

CLASS_ORDER = {"ptilde1": 1, "ptilde2": 2, "phat1": 1, "phat2": 2, "pbar1": 1}


def _class_layout(class_tag: str, grid: AnisotropicGrid):
    """Regular array axes, per-axis fit scaling powers, and exponent tuples.

    Scaling power 2 marks the parabolic time variable ((t - t0) / r^2)."""
    q, d = grid.q, grid.d
    if class_tag in ("ptilde1", "ptilde2"):
        k = CLASS_ORDER[class_tag]
        axes = tuple(range(grid.lead, grid.lead + q))
        return axes, (1,) * q, [tuple(a) for a in multi_indices_upto(q, k)]
    if class_tag in ("phat1", "phat2"):
        if grid.time_axis is None:
            raise GridError(f"{class_tag} needs a grid with a time axis")
        axes = (0,) + tuple(range(1, 1 + q))
        if class_tag == "phat1":
            exps = [(0,) + tuple(a) for a in multi_indices_upto(q, 1)]
        else:
            exps = [(1,) + (0,) * q] + [(0,) + tuple(a) for a in multi_indices_upto(q, 2)]
        return axes, (2,) + (1,) * q, exps
    if class_tag == "pbar1":
        if grid.time_axis is None:
            raise GridError("pbar1 needs a grid with a time axis")
        axes = tuple(range(1, 1 + d))
        return axes, (1,) * d, [tuple(a) for a in multi_indices_upto(d, 1)]
    raise ValueError(f"unknown polynomial class {class_tag!r}")


@dataclass(frozen=True)
class PolynomialSlice:
    """Polynomial in the regular variables whose coefficients are arrays over
    the frozen variables."""

    class_tag: str
    grid: AnisotropicGrid
    center: tuple[float, ...]  # coordinates of the regular variables
    terms: dict[tuple[int, ...], np.ndarray]

    def regular_axes(self) -> tuple[int, ...]:
        axes, _, _ = _class_layout(self.class_tag, self.grid)
        return axes

    def evaluate(self) -> GridFunction:
        g = self.grid
        axes, _, exps = _class_layout(self.class_tag, g)
        mesh = g.meshgrid()
        out = np.zeros(g.shape)
        nd = len(g.shape)
        frozen = [ax for ax in range(nd) if ax not in axes]
        for e, coeff in self.terms.items():
            mono = np.ones(())
            for ax, p, c in zip(axes, e, self.center):
                if p:
                    mono = mono * (mesh[ax] - c) ** p
            shape = [1] * nd
            for fax, size in zip(frozen, coeff.shape):
                shape[fax] = size
            out = out + mono * coeff.reshape(shape)
        return GridFunction(g, np.ascontiguousarray(np.broadcast_to(out, g.shape).astype(float)))


# -- partial Taylor polynomials ---------------------------------------------------


def _value_at_regular(field: GridFunction, axes: tuple[int, ...], idx: tuple[int, ...]) -> np.ndarray:
    sel: list = [slice(None)] * field.values.ndim
    for ax, i in zip(axes, idx):
        sel[ax] = i
    return np.ascontiguousarray(field.values[tuple(sel)], dtype=float)


def taylor_xprime(u: GridFunction, x0_prime: tuple[float, ...], k: int) -> PolynomialSlice:
    """Order-k Taylor polynomial in x' around an on-lattice x0', coefficients
    per frozen slice from the lattice derivatives."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    g = u.grid
    q = g.q
    if len(x0_prime) != q:
        raise GridError(f"x0' needs {q} coordinates")
    idx = tuple(g.spatial_index_of(tuple(x0_prime) + tuple(g.extents[i][0] for i in range(q, g.d)))[:q])
    axes = tuple(range(g.lead, g.lead + q))
    terms = {}
    for a in multi_indices_upto(q, k):
        fact = float(np.prod([factorial(x) for x in a]))
        terms[tuple(a)] = _value_at_regular(fd_xprime_alpha(u, a), axes, idx) / fact
    tag = "ptilde2" if k == 2 else "ptilde1"
    if k == 0:
        tag = "ptilde1"
        terms = {(0,) * q: terms[(0,) * q]}
    return PolynomialSlice(tag, g, tuple(float(c) for c in x0_prime), terms)


def taylor_zprime(u: GridFunction, z0_prime: tuple[float, ...], order: int) -> PolynomialSlice:
    """First/second order Taylor polynomial in z' = (t, x'); the second order
    adds the linear time term from the time stencil."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    g = u.grid
    if g.time_axis is None:
        raise GridError("taylor_zprime needs a time axis")
    q = g.q
    if len(z0_prime) != 1 + q:
        raise GridError(f"z0' needs {1 + q} coordinates (t, x')")
    t0 = z0_prime[0]
    ta = g.time_axis
    tn = int(round((t0 - ta.t0) / ta.tau))
    if not (0 <= tn < ta.n) or abs(ta.t0 + tn * ta.tau - t0) > 1e-9 * max(1.0, ta.t1 - ta.t0):
        raise GridError("t0 is off-lattice")
    xidx = tuple(
        g.spatial_index_of(tuple(z0_prime[1:]) + tuple(g.extents[i][0] for i in range(q, g.d)))[:q]
    )
    axes = (0,) + tuple(range(1, 1 + q))
    idx = (tn,) + xidx
    terms = {}
    kmax = 1 if order == 1 else 2
    for a in multi_indices_upto(q, kmax):
        fact = float(np.prod([factorial(x) for x in a]))
        terms[(0,) + tuple(a)] = _value_at_regular(fd_xprime_alpha(u, a), axes, idx) / fact
    if order == 2:
        terms[(1,) + (0,) * q] = _value_at_regular(fd_derivative(u, "t", 1), axes, idx)
    return PolynomialSlice("phat2" if order == 2 else "phat1", g, tuple(float(c) for c in z0_prime), terms)


def taylor_x_firstorder(u: GridFunction, x0: tuple[float, ...]) -> PolynomialSlice:
    """Affine Taylor polynomial in all spatial variables, coefficients in t."""
    g = u.grid
    if g.time_axis is None:
        raise GridError("taylor_x_firstorder needs a time axis")
    if len(x0) != g.d:
        raise GridError(f"x0 needs {g.d} coordinates")
    idx = g.spatial_index_of(tuple(x0))
    axes = tuple(range(1, 1 + g.d))
    terms = {tuple([0] * g.d): _value_at_regular(u, axes, idx)}
    for i in range(g.d):
        e = tuple(1 if k == i else 0 for k in range(g.d))
        terms[e] = _value_at_regular(fd_derivative(u, i, 1), axes, idx)
    return PolynomialSlice("pbar1", g, tuple(float(c) for c in x0), terms)


# -- local best-polynomial fits ----------------------------------------------------


def _spatial_ball_offsets(grid: AnisotropicGrid, axes_range, center, r):
    """Per-axis index windows within |coord - center| <= r."""
    sels = []
    for ax, c in zip(axes_range, center):
        coords = grid.coords(ax)
        mask = np.abs(coords - c) <= r + 1e-12
        sels.append(np.nonzero(mask)[0])
    return sels


def best_fit_error(u: GridFunction, center: tuple[float, ...], r: float, class_tag: str) -> float:
    """Sup-norm residual of the per-slice least-squares fit of u by the class
    over the ball (elliptic) or backward cylinder (parabolic) of radius r.

    Max over frozen slices; slices with fewer points than the basis dimension
    are interpolated exactly (zero residual), matching the true infimum there.
    """
    g = u.grid
    axes, scale_pow, exps = _class_layout(class_tag, g)
    if class_tag.startswith("ptilde") and g.time_axis is not None:
        raise GridError("ptilde fits expect a purely spatial grid")
    q, d = g.q, g.d
    nbasis = len(exps)

    if class_tag.startswith("ptilde"):
        if len(center) != d:
            raise GridError(f"center needs {d} spatial coordinates")
        xprime_sel = _spatial_ball_offsets(g, range(q), center[:q], r)
        xp_coords = [g.coords(ax)[sel] for ax, sel in zip(range(q), xprime_sel)]
        mesh = np.meshgrid(*xp_coords, indexing="ij") if q > 1 else [xp_coords[0]]
        rp2 = sum((m - c) ** 2 for m, c in zip(mesh, center[:q]))
        rp2 = np.asarray(rp2).ravel()
        cols = [np.asarray(m).ravel() for m in mesh]
        xpp_sel = _spatial_ball_offsets(g, range(q, d), center[q:], r)
        best = 0.0
        most = 0
        for xpp_idx in np.ndindex(*[len(s) for s in xpp_sel]):
            xpp = tuple(int(s[i]) for s, i in zip(xpp_sel, xpp_idx))
            rho2 = sum((float(g.coords(q + a)[xpp[a]]) - center[q + a]) ** 2 for a in range(d - q))
            if rho2 > r * r + 1e-12:
                continue
            keep = rp2 <= r * r - rho2 + 1e-12
            npts = int(keep.sum())
            if npts == 0:
                continue
            most = max(most, npts)
            block = u.values[np.ix_(*xprime_sel, *[np.array([x]) for x in xpp])]
            y = block.reshape(-1)[keep]
            Phi = np.empty((npts, nbasis))
            for b, e in enumerate(exps):
                col = np.ones(npts)
                for a in range(q):
                    if e[a]:
                        col = col * ((cols[a][keep] - center[a]) / r) ** e[a]
                Phi[:, b] = col
            coef, *_ = np.linalg.lstsq(Phi, y, rcond=None)
            best = max(best, float(np.max(np.abs(y - Phi @ coef))) if npts else 0.0)
        if most < nbasis:
            raise GridError("underdetermined fit: no slice holds enough points for the class")
        return best

    # parabolic classes: backward cylinder (t0 - r^2, t0] x B_r(x0)
    ta = g.time_axis
    if len(center) != 1 + d:
        raise GridError(f"center needs {1 + d} coordinates (t, x)")
    t0 = center[0]
    tcoords = ta.coords()
    tmask = (tcoords > t0 - r * r - 1e-12) & (tcoords <= t0 + 1e-12)
    tsel = np.nonzero(tmask)[0]
    if tsel.size == 0:
        raise GridError("cylinder contains no time levels")

    if class_tag == "pbar1":
        sel_sp = _spatial_ball_offsets(g, range(d), center[1:], r)
        sp_coords = [g.coords(ax)[s] for ax, s in zip(range(d), sel_sp)]
        mesh = np.meshgrid(*sp_coords, indexing="ij")
        r2 = sum((m - c) ** 2 for m, c in zip(mesh, center[1:]))
        keep = np.asarray(r2).ravel() <= r * r + 1e-12
        npts = int(keep.sum())
        if npts < nbasis:
            raise GridError("underdetermined fit: spatial ball too small for pbar1")
        Phi = np.empty((npts, nbasis))
        cols = [np.asarray(m).ravel()[keep] for m in mesh]
        for b, e in enumerate(exps):
            col = np.ones(npts)
            for a in range(d):
                if e[a]:
                    col = col * ((cols[a] - center[1 + a]) / r) ** e[a]
            Phi[:, b] = col
        best = 0.0
        for tn in tsel:
            y = u.values[tn][np.ix_(*sel_sp)].reshape(-1)[keep]
            coef, *_ = np.linalg.lstsq(Phi, y, rcond=None)
            best = max(best, float(np.max(np.abs(y - Phi @ coef))))
        return best

    # phat1 / phat2: frozen x'', regular (t, x')
    xprime_sel = _spatial_ball_offsets(g, range(q), center[1 : 1 + q], r)
    xp_coords = [g.coords(ax)[s] for ax, s in zip(range(q), xprime_sel)]
    meshp = np.meshgrid(*xp_coords, indexing="ij") if q > 1 else [xp_coords[0]]
    rp2 = np.asarray(sum((m - c) ** 2 for m, c in zip(meshp, center[1 : 1 + q]))).ravel()
    xp_cols = [np.asarray(m).ravel() for m in meshp]
    xpp_sel = _spatial_ball_offsets(g, range(q, d), center[1 + q :], r)
    best = 0.0
    most = 0
    for xpp_idx in np.ndindex(*[len(s) for s in xpp_sel]):
        xpp = tuple(int(s[i]) for s, i in zip(xpp_sel, xpp_idx))
        rho2 = sum((float(g.coords(q + a)[xpp[a]]) - center[1 + q + a]) ** 2 for a in range(d - q))
        if rho2 > r * r + 1e-12:
            continue
        keep = rp2 <= r * r - rho2 + 1e-12
        nsp = int(keep.sum())
        if nsp == 0:
            continue
        npts = nsp * tsel.size
        most = max(most, npts)
        block = u.values[np.ix_(tsel, *xprime_sel, *[np.array([x]) for x in xpp])]
        y = block.reshape(tsel.size, -1)[:, keep].reshape(-1)
        Phi = np.empty((npts, nbasis))
        tcol = np.repeat((tcoords[tsel] - t0) / (r * r), nsp)
        for b, e in enumerate(exps):
            col = np.ones(npts)
            if e[0]:
                col = col * tcol ** e[0]
            for a in range(q):
                if e[1 + a]:
                    xc = np.tile((xp_cols[a][keep] - center[1 + a]) / r, tsel.size)
                    col = col * xc ** e[1 + a]
            Phi[:, b] = col
        coef, *_ = np.linalg.lstsq(Phi, y, rcond=None)
        best = max(best, float(np.max(np.abs(y - Phi @ coef))))
    if most < nbasis:
        raise GridError("underdetermined fit: no slice holds enough points for the class")
    return best


def campanato_quotient(
    u: GridFunction,
    k: int,
    delta: float,
    class_tag: str,
    centers: list[tuple[float, ...]],
    radii: list[float],
) -> float:
    """max over centers x radii of r^-(k+delta) * best_fit_error."""
    if CLASS_ORDER[class_tag] != k:
        raise ValueError(f"class {class_tag} has order {CLASS_ORDER[class_tag]}, not k={k}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    best = 0.0
    for c in centers:
        for r in radii:
            best = max(best, best_fit_error(u, c, r, class_tag) / r ** (k + delta))
    return best


def interior_centers(grid: AnisotropicGrid, per_axis: int = 3) -> list[tuple[float, ...]]:
    """Coarse sub-lattice of spatial centers in the middle half of the box."""
    picks = []
    for ax in range(grid.d):
        n = grid.counts[ax]
        lo, hi = n // 4, 3 * n // 4
        idxs = np.unique(np.linspace(lo, hi, per_axis).round().astype(int))
        picks.append(grid.coords(ax)[idxs])
    return [tuple(float(v) for v in combo) for combo in product(*picks)]
