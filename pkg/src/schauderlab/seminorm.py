"""Partial Holder seminorm estimators on grid functions.

Four families are provided: quotients over the regular directions x' (with sup
over everything else), parabolic quotients over z' = (t, x') with the distance
|dx'| + |dt|^(1/2), the half-order time seminorm, and full-variable seminorms.
Pair enumeration is exact up to a budget, then falls back to seeded sampling
that always keeps nearest-neighbour pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GridFunction, GridError, fd_derivative, fd_second, fd_xprime_alpha, multi_indices

EXACT_PAIR_LIMIT = 1_000_000  # exact enumeration cap, per slice


@dataclass(frozen=True)
class PairBudget:
    mode: str  # "exact" | "sampled" | "auto"
    n_pairs: int = 200_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "sampled", "auto"):
            raise ValueError(f"unknown pair budget mode {self.mode!r}")


EXACT = PairBudget("exact")
AUTO = PairBudget("auto")


def sampled(n_pairs: int, seed: int = 0) -> PairBudget:
    return PairBudget("sampled", n_pairs=n_pairs, seed=seed)


@dataclass(frozen=True)
class SeminormSpec:
    family: str  # "xprime" | "zprime" | "time-half" | "full"
    k: int = 0
    delta: float = 0.5
    budget: PairBudget = EXACT

    def __post_init__(self) -> None:
        if self.family not in ("xprime", "zprime", "time-half", "full"):
            raise ValueError(f"unknown seminorm family {self.family!r}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not (0 <= self.k <= 2):
            raise ValueError(f"order k must be in {{0, 1, 2}}, got {self.k}")


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must be in (0, 1), got {delta}")


# -- generic pair-quotient engine ---------------------------------------------


def _pair_layout(u: GridFunction, spatial_axes: tuple[int, ...], include_time: bool):
    """Flatten values to (frozen, pair) and return per-pair-axis coordinates.

    Pair axes keep C order (time first when included), so flat strides are the
    usual row-major ones.
    """
    g = u.grid
    arr_axes = []
    cols: list[tuple[np.ndarray, bool]] = []  # (coords, is_time)
    if include_time:
        if g.time_axis is None:
            raise GridError("seminorm family needs a time axis")
        arr_axes.append(0)
        cols.append((g.time_axis.coords(), True))
    for ax in spatial_axes:
        arr_axes.append(g.lead + ax)
        cols.append((g.coords(ax), False))
    nd = u.values.ndim
    moved = np.moveaxis(u.values, arr_axes, range(nd - len(arr_axes), nd))
    pair_shape = moved.shape[nd - len(arr_axes):]
    P = int(np.prod(pair_shape))
    V = np.ascontiguousarray(moved.reshape(-1, P))
    # per-axis coordinate of each flattened pair index
    idx = np.unravel_index(np.arange(P), pair_shape)
    colvals = [c[idx[a]] for a, (c, _) in enumerate(cols)]
    is_time = [t for _, t in cols]
    return V, colvals, is_time, pair_shape


def _nn_pairs(pair_shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs adjacent along one pair axis (the small-separation pairs)."""
    P = int(np.prod(pair_shape))
    flat = np.arange(P).reshape(pair_shape)
    lo: list[np.ndarray] = []
    hi: list[np.ndarray] = []
    for ax in range(len(pair_shape)):
        sl_lo = [slice(None)] * len(pair_shape)
        sl_hi = [slice(None)] * len(pair_shape)
        sl_lo[ax] = slice(None, -1)
        sl_hi[ax] = slice(1, None)
        lo.append(flat[tuple(sl_lo)].ravel())
        hi.append(flat[tuple(sl_hi)].ravel())
    return np.concatenate(lo), np.concatenate(hi)


def _pair_dist(colvals, is_time, I, J) -> np.ndarray:
    d2 = None
    tpart = None
    for c, t in zip(colvals, is_time):
        dc = c[J] - c[I]
        if t:
            s = np.sqrt(np.abs(dc))
            tpart = s if tpart is None else tpart + s
        else:
            sq = dc * dc
            d2 = sq if d2 is None else d2 + sq
    dist = np.sqrt(d2) if d2 is not None else None
    if tpart is not None:
        dist = tpart if dist is None else dist + tpart
    return dist


def _quotient_over_pairs(V, colvals, is_time, I, J, exponent: float) -> float:
    best = 0.0
    block = max(1, int(8_000_000 // max(1, V.shape[0])))
    for s in range(0, I.size, block):
        Ib = I[s : s + block]
        Jb = J[s : s + block]
        dist = _pair_dist(colvals, is_time, Ib, Jb)
        m = np.max(np.abs(V[:, Jb] - V[:, Ib]), axis=0)
        q = m / np.power(dist, exponent)
        if q.size:
            best = max(best, float(np.max(q)))
    return best


def _max_quotient(u, spatial_axes, include_time, exponent, budget: PairBudget) -> float:
    V, colvals, is_time, pair_shape = _pair_layout(u, tuple(spatial_axes), include_time)
    P = V.shape[1]
    if P < 2:
        raise GridError("need at least 2 points in the pair directions")
    total = P * (P - 1) // 2
    mode = budget.mode
    if mode == "auto":
        mode = "exact" if total <= EXACT_PAIR_LIMIT else "sampled"
    if mode == "sampled" and budget.n_pairs >= total:
        mode = "exact"
    if mode == "exact":
        best = 0.0
        # anchor-major enumeration of all pairs i < j
        for i in range(P - 1):
            J = np.arange(i + 1, P)
            I = np.full(J.shape, i)
            best = max(best, _quotient_over_pairs(V, colvals, is_time, I, J, exponent))
        return best
    nn_i, nn_j = _nn_pairs(pair_shape)
    rng = np.random.default_rng(budget.seed)
    R = rng.integers(0, P, size=(budget.n_pairs, 2))
    keep = R[:, 0] != R[:, 1]
    I = np.concatenate([nn_i, R[keep, 0]])
    J = np.concatenate([nn_j, R[keep, 1]])
    return _quotient_over_pairs(V, colvals, is_time, I, J, exponent)


# -- public estimators ---------------------------------------------------------


def seminorm_partial(u: GridFunction, axes, delta: float, budget: PairBudget = AUTO) -> float:
    """Holder quotient over pairs varying only along the given spatial axes,
    sup over all remaining axes (and time)."""
    _check_delta(delta)
    return _max_quotient(u, tuple(axes), include_time=False, exponent=delta, budget=budget)


def seminorm_xprime(u: GridFunction, delta: float, budget: PairBudget = AUTO) -> float:
    """[u]_{x',delta}: sup over x'' (and t) of the x'-pair Holder quotient."""
    return seminorm_partial(u, range(u.grid.q), delta, budget)


def seminorm_xprime_k(u: GridFunction, k: int, delta: float, budget: PairBudget = AUTO) -> float:
    """[u]_{x',k+delta}: max over |alpha| = k of the x'-seminorm of the
    lattice derivative field."""
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k}")
    _check_delta(delta)
    q = u.grid.q
    return max(seminorm_xprime(fd_xprime_alpha(u, a), delta, budget) for a in multi_indices(q, k))


def seminorm_zprime(u: GridFunction, delta: float, budget: PairBudget = AUTO) -> float:
    """Parabolic partial quotient over z' = (t, x') pairs with the distance
    |dx'| + |dt|^(1/2), sup over x''."""
    _check_delta(delta)
    return _max_quotient(u, tuple(range(u.grid.q)), include_time=True, exponent=delta, budget=budget)


def seminorm_zprime_k(u: GridFunction, k: int, delta: float, budget: PairBudget = AUTO) -> float:
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k}")
    _check_delta(delta)
    q = u.grid.q
    return max(seminorm_zprime(fd_xprime_alpha(u, a), delta, budget) for a in multi_indices(q, k))


def seminorm_time_half(u: GridFunction, delta: float) -> float:
    """<u>_{1+delta}: sup over x of the |dt|^((1+delta)/2) quotient in time."""
    _check_delta(delta)
    return _max_quotient(u, (), include_time=True, exponent=1.0 + delta, budget=EXACT)


def seminorm_full(u: GridFunction, k: int, delta: float, budget: PairBudget = AUTO) -> float:
    """Holder quotient in all variables (parabolic metric when the grid has a
    time axis). k = 0 measures u itself; k = 1 the first spatial derivatives;
    k = 2 all second spatial derivatives."""
    _check_delta(delta)
    g = u.grid
    axes = tuple(range(g.d))
    if k == 0:
        fields = [u]
    elif k == 1:
        fields = [fd_derivative(u, i, 1) for i in range(g.d)]
    elif k == 2:
        fields = [fd_second(u, i, j) for i in range(g.d) for j in range(i, g.d)]
    else:
        raise ValueError(f"k must be in {{0, 1, 2}}, got {k}")
    return max(_max_quotient(f, axes, include_time=g.has_time, exponent=delta, budget=budget) for f in fields)


def evaluate(u: GridFunction, spec: SeminormSpec) -> float:
    """Dispatch on a SeminormSpec (the oracle module mirrors this contract)."""
    if spec.family == "xprime":
        if spec.k == 0:
            return seminorm_xprime(u, spec.delta, spec.budget)
        return seminorm_xprime_k(u, spec.k, spec.delta, spec.budget)
    if spec.family == "zprime":
        if spec.k == 0:
            return seminorm_zprime(u, spec.delta, spec.budget)
        return seminorm_zprime_k(u, spec.k, spec.delta, spec.budget)
    if spec.family == "time-half":
        return seminorm_time_half(u, spec.delta)
    return seminorm_full(u, spec.k, spec.delta, spec.budget)
