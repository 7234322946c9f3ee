"""Anisotropic tensor-product grids, grid functions, and finite-difference calculus.

Every axis is uniform. The first ``q`` spatial axes are the "regular" directions
(written x' throughout); the remaining ``d - q`` axes are x''. An optional time
axis is stored slowest (index 0 of the value array).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

DIRICHLET = "dirichlet"
PERIODIC = "periodic"

_MAX_DIM = 4


class GridError(ValueError):
    """Invalid grid construction or grid operation."""


@dataclass(frozen=True)
class TimeAxis:
    t0: float
    t1: float
    n: int

    @property
    def tau(self) -> float:
        return (self.t1 - self.t0) / (self.n - 1)

    def coords(self) -> np.ndarray:
        return self.t0 + self.tau * np.arange(self.n)


@dataclass(frozen=True)
class AnisotropicGrid:
    d: int
    q: int
    extents: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    boundary: tuple[str, ...]
    time_axis: TimeAxis | None = None

    # -- layout -------------------------------------------------------------

    @property
    def has_time(self) -> bool:
        return self.time_axis is not None

    @property
    def lead(self) -> int:
        """Number of leading array axes before the first spatial axis."""
        return 1 if self.has_time else 0

    @property
    def shape(self) -> tuple[int, ...]:
        if self.time_axis is not None:
            return (self.time_axis.n,) + self.counts
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def spacing(self, axis: int) -> float:
        a, b = self.extents[axis]
        n = self.counts[axis]
        if self.boundary[axis] == PERIODIC:
            # periodic axes use a half-open period cell [a, b)
            return (b - a) / n
        return (b - a) / (n - 1)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(self.spacing(i) for i in range(self.d))

    @cached_property
    def _axis_coords(self) -> tuple[np.ndarray, ...]:
        out = []
        for i in range(self.d):
            a, _ = self.extents[i]
            out.append(a + self.spacing(i) * np.arange(self.counts[i]))
        return tuple(out)

    def coords(self, axis: int) -> np.ndarray:
        """1-D coordinate array of a spatial axis."""
        return self._axis_coords[axis]

    def meshgrid(self) -> list[np.ndarray]:
        """Sparse broadcastable coordinate arrays, time first when present."""
        arrs = []
        if self.time_axis is not None:
            arrs.append(self.time_axis.coords())
        arrs.extend(self.coords(i) for i in range(self.d))
        return list(np.meshgrid(*arrs, indexing="ij", sparse=True))

    # -- index <-> coordinate maps -------------------------------------------

    def point(self, index: tuple[int, ...]) -> tuple[float, ...]:
        """Coordinates of a lattice point, time first when present."""
        if len(index) != len(self.shape):
            raise GridError(f"index length {len(index)} != grid ndim {len(self.shape)}")
        out = []
        k = 0
        if self.time_axis is not None:
            out.append(self.time_axis.t0 + self.time_axis.tau * index[0])
            k = 1
        for i in range(self.d):
            out.append(float(self.coords(i)[index[k + i]]))
        return tuple(out)

    def index_of(self, point: tuple[float, ...], tol: float = 1e-9) -> tuple[int, ...]:
        """Lattice index of a point; raises if the point is off-lattice."""
        if len(point) != len(self.shape):
            raise GridError(f"point length {len(point)} != grid ndim {len(self.shape)}")
        idx = []
        vals = list(point)
        if self.time_axis is not None:
            ta = self.time_axis
            j = int(round((vals[0] - ta.t0) / ta.tau))
            if not (0 <= j < ta.n) or abs(ta.t0 + j * ta.tau - vals[0]) > tol * max(1.0, abs(ta.t1 - ta.t0)):
                raise GridError(f"time coordinate {vals[0]} is off-lattice")
            idx.append(j)
            vals = vals[1:]
        for i in range(self.d):
            a, b = self.extents[i]
            h = self.spacing(i)
            j = int(round((vals[i] - a) / h))
            if not (0 <= j < self.counts[i]) or abs(a + j * h - vals[i]) > tol * max(1.0, abs(b - a)):
                raise GridError(f"coordinate {vals[i]} is off-lattice on axis {i}")
            idx.append(j)
        return tuple(idx)

    def spatial_index_of(self, x: tuple[float, ...], tol: float = 1e-9) -> tuple[int, ...]:
        idx = []
        for i in range(self.d):
            a, b = self.extents[i]
            h = self.spacing(i)
            j = int(round((x[i] - a) / h))
            if not (0 <= j < self.counts[i]) or abs(a + j * h - x[i]) > tol * max(1.0, abs(b - a)):
                raise GridError(f"coordinate {x[i]} is off-lattice on axis {i}")
            idx.append(j)
        return tuple(idx)


@dataclass(frozen=True)
class GridFunction:
    grid: AnisotropicGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        if tuple(self.values.shape) != self.grid.shape:
            raise GridError(f"value shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("grid function contains non-finite values")

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)


def multi_indices(q: int, k: int) -> list[tuple[int, ...]]:
    """All multi-indices of length q with |alpha| exactly k."""
    return [a for a in product(range(k + 1), repeat=q) if sum(a) == k]


def multi_indices_upto(q: int, k: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for j in range(k + 1):
        out.extend(multi_indices(q, j))
    return out


def make_grid(
    d: int,
    q: int,
    extents: list[tuple[float, float]] | tuple[tuple[float, float], ...],
    counts: list[int] | tuple[int, ...],
    boundary: str | list[str] | tuple[str, ...] = DIRICHLET,
    time_axis: tuple[float, float, int] | TimeAxis | None = None,
) -> AnisotropicGrid:
    if not (2 <= d <= _MAX_DIM):
        raise GridError(f"spatial dimension must be in [2, {_MAX_DIM}], got {d}")
    if not (1 <= q < d):
        raise GridError(f"split index q must satisfy 1 <= q < d, got q={q}, d={d}")
    extents = tuple((float(a), float(b)) for a, b in extents)
    counts = tuple(int(n) for n in counts)
    if len(extents) != d or len(counts) != d:
        raise GridError("extents and counts must have exactly d entries")
    if isinstance(boundary, str):
        boundary = (boundary,) * d
    boundary = tuple(boundary)
    if len(boundary) != d or any(b not in (DIRICHLET, PERIODIC) for b in boundary):
        raise GridError(f"boundary tags must be '{DIRICHLET}' or '{PERIODIC}', one per axis")
    for (a, b), n in zip(extents, counts):
        if not b > a:
            raise GridError(f"empty extent [{a}, {b}]")
        if n < 3:
            raise GridError(f"need at least 3 points per axis, got {n}")
    ta: TimeAxis | None = None
    if time_axis is not None:
        ta = time_axis if isinstance(time_axis, TimeAxis) else TimeAxis(*time_axis)
        if ta.n < 2 or not ta.t1 > ta.t0:
            raise GridError("time axis needs n_t >= 2 and t1 > t0")
    return AnisotropicGrid(d=d, q=q, extents=extents, counts=counts, boundary=boundary, time_axis=ta)


def sample(grid: AnisotropicGrid, fn: Callable[..., np.ndarray]) -> GridFunction:
    """Evaluate fn on the lattice; fn receives broadcastable coordinate arrays."""
    vals = np.asarray(fn(*grid.meshgrid()), dtype=float)
    vals = np.broadcast_to(vals, grid.shape).copy()
    return GridFunction(grid, vals)


def zeros(grid: AnisotropicGrid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.shape))


# -- finite differences ------------------------------------------------------


def _diff1d(values: np.ndarray, axis: int, h: float, order: int, periodic: bool) -> np.ndarray:
    """Second-order accurate derivative along one array axis, full-size output."""
    v = np.moveaxis(values, axis, -1)
    n = v.shape[-1]
    out = np.empty_like(v)
    if periodic:
        vp = np.roll(v, -1, axis=-1)
        vm = np.roll(v, 1, axis=-1)
        if order == 1:
            out = (vp - vm) / (2.0 * h)
        else:
            out = (vp - 2.0 * v + vm) / (h * h)
        return np.moveaxis(out, -1, axis)
    if n < 4:
        raise GridError(f"axis too short for one-sided closures (need >= 4 points, got {n})")
    if order == 1:
        out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
        out[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * h)
        out[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * h)
    else:
        out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / (h * h)
        out[..., 0] = (2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]) / (h * h)
        out[..., -1] = (2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]) / (h * h)
    return np.moveaxis(out, -1, axis)


def fd_derivative(u: GridFunction, axis: int | str, order: int = 1) -> GridFunction:
    """Discrete derivative along a spatial axis (0..d-1) or the time axis ("t").

    Central second-order stencils inside, one-sided second-order closures at
    box boundaries; exact on per-axis polynomials of degree <= 2.
    """
    if order not in (1, 2):
        raise GridError(f"derivative order must be 1 or 2, got {order}")
    g = u.grid
    if axis == "t":
        if g.time_axis is None:
            raise GridError("grid has no time axis")
        vals = _diff1d(u.values, 0, g.time_axis.tau, order, periodic=False)
        return u.with_values(vals)
    axis = int(axis)
    if not (0 <= axis < g.d):
        raise GridError(f"spatial axis {axis} out of range for d={g.d}")
    vals = _diff1d(u.values, g.lead + axis, g.spacing(axis), order, periodic=g.boundary[axis] == PERIODIC)
    return u.with_values(vals)


def fd_mixed(u: GridFunction, axis_i: int, axis_j: int) -> GridFunction:
    """Mixed second derivative D_ij (i != j): composition of first-derivative
    stencils, which is the 4-point cross in the interior. Exact on bilinears."""
    if axis_i == axis_j:
        raise GridError("fd_mixed requires two distinct axes")
    return fd_derivative(fd_derivative(u, axis_i, 1), axis_j, 1)


def fd_second(u: GridFunction, axis_i: int, axis_j: int) -> GridFunction:
    """D_ij u for any pair of spatial axes."""
    if axis_i == axis_j:
        return fd_derivative(u, axis_i, 2)
    return fd_mixed(u, axis_i, axis_j)


def fd_xprime_alpha(u: GridFunction, alpha: tuple[int, ...]) -> GridFunction:
    """Apply the x'-multi-index derivative (|alpha| <= 2) using one stencil per axis."""
    q = u.grid.q
    if len(alpha) != q:
        raise GridError(f"multi-index length {len(alpha)} != q={q}")
    if sum(alpha) > 2 or any(a < 0 for a in alpha):
        raise GridError(f"unsupported multi-index {alpha}")
    out = u
    for axis, a in enumerate(alpha):
        if a > 0:
            out = fd_derivative(out, axis, a)
    return out


# -- slicing and restriction ---------------------------------------------------


def slices_xpp(u: GridFunction) -> Iterator[np.ndarray]:
    """Iterate over x''-slices; each is a view over x' (and t when present)."""
    g = u.grid
    lead = g.lead + g.q
    xpp_shape = g.counts[g.q:]
    for idx in np.ndindex(*xpp_shape):
        yield u.values[(slice(None),) * lead + idx]


def restrict_interior(
    u: GridFunction,
    margin_fraction: float,
    time_margin_fraction: float = 0.0,
) -> GridFunction:
    """Copy onto the sub-grid with each spatial extent shrunk symmetrically by
    margin_fraction per side; a time margin trims both time ends the same way
    (initial data layers and smoothing layers live at the ends)."""
    if not (0.0 <= margin_fraction < 0.5):
        raise GridError(f"margin_fraction must be in [0, 0.5), got {margin_fraction}")
    if not (0.0 <= time_margin_fraction < 0.5):
        raise GridError(f"time_margin_fraction must be in [0, 0.5), got {time_margin_fraction}")
    g = u.grid
    cuts = []
    for i in range(g.d):
        k = int(round(margin_fraction * (g.counts[i] - 1)))
        if k > 0 and g.boundary[i] == PERIODIC:
            raise GridError("cannot restrict a periodic axis")
        if g.counts[i] - 2 * k < 3:
            raise GridError(f"margin leaves fewer than 3 points on axis {i}")
        cuts.append(k)
    new_extents = []
    for i, k in enumerate(cuts):
        a, b = g.extents[i]
        h = g.spacing(i)
        new_extents.append((a + k * h, b - k * h))
    ta = g.time_axis
    tcut = 0
    if ta is not None and time_margin_fraction > 0.0:
        tcut = int(round(time_margin_fraction * (ta.n - 1)))
        if ta.n - 2 * tcut < 2:
            raise GridError("time margin leaves fewer than 2 time levels")
        ta = TimeAxis(ta.t0 + tcut * ta.tau, ta.t1 - tcut * ta.tau, ta.n - 2 * tcut)
    sub = AnisotropicGrid(
        d=g.d,
        q=g.q,
        extents=tuple(new_extents),
        counts=tuple(g.counts[i] - 2 * cuts[i] for i in range(g.d)),
        boundary=g.boundary,
        time_axis=ta,
    )
    sel: list[slice] = []
    if g.time_axis is not None:
        sel.append(slice(tcut, g.time_axis.n - tcut))
    sel.extend(slice(k, g.counts[i] - k) for i, k in enumerate(cuts))
    return GridFunction(sub, u.values[tuple(sel)].copy())


# -- file format ---------------------------------------------------------------


def save_grid_function(u: GridFunction, basepath: str | Path) -> tuple[Path, Path]:
    """Write ``basepath.json`` (metadata) and ``basepath.f64`` (raw little-endian
    binary64 values in row-major order, time slowest)."""
    base = Path(basepath)
    g = u.grid
    meta = {
        "d": g.d,
        "q": g.q,
        "extents": [list(e) for e in g.extents],
        "counts": list(g.counts),
        "boundary": list(g.boundary),
        "time_axis": None
        if g.time_axis is None
        else {"t0": g.time_axis.t0, "t1": g.time_axis.t1, "n": g.time_axis.n},
    }
    jpath = base.with_suffix(".json")
    dpath = base.with_suffix(".f64")
    jpath.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    dpath.write_bytes(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    return jpath, dpath


def load_grid_function(basepath: str | Path) -> GridFunction:
    base = Path(basepath)
    meta = json.loads(base.with_suffix(".json").read_text())
    ta = meta["time_axis"]
    grid = make_grid(
        d=meta["d"],
        q=meta["q"],
        extents=[tuple(e) for e in meta["extents"]],
        counts=meta["counts"],
        boundary=meta["boundary"],
        time_axis=None if ta is None else (ta["t0"], ta["t1"], ta["n"]),
    )
    raw = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    if raw.size != grid.size:
        raise GridError(f"data file holds {raw.size} values, grid needs {grid.size}")
    return GridFunction(grid, raw.reshape(grid.shape).astype(float))
