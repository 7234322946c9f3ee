"""Vanishing-moment smoothing kernels and partial mollification operators.

The 1-D kernel is (alpha + beta t^2) * exp(1/(t^2 - 1)) on (-1, 1), with alpha
and beta solved so the zeroth moment is 1 and the second moment vanishes (the
first vanishes by evenness). Convolution with its tensor products therefore
reproduces quadratics along the mollified axes. Because beta < 0 the kernel
changes sign: mollification does not preserve positivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.ndimage import convolve1d

from .lattice import GridFunction, GridError, fd_derivative, fd_xprime_alpha, multi_indices, restrict_interior
from .seminorm import AUTO, PairBudget, seminorm_xprime, seminorm_xprime_k, seminorm_zprime, seminorm_zprime_k

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=200)


def _bump(t: np.ndarray | float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(1.0 / (t[inside] ** 2 - 1.0))
    return out


def plateau_bump(t: np.ndarray | float, inner: float = 1.0, outer: float = 2.0) -> np.ndarray:
    """Smooth cutoff equal to 1 for |t| <= inner and 0 for |t| >= outer."""
    t = np.asarray(t, dtype=float)
    s = (np.abs(t) - inner) / (outer - inner)
    s = np.clip(s, 0.0, 1.0)

    def side(x):
        out = np.zeros_like(x)
        pos = x > 0
        with np.errstate(divide="ignore", over="ignore"):
            out[pos] = np.exp(-1.0 / x[pos])
        return out

    num = side(1.0 - s)
    den = num + side(s)
    return num / den


@dataclass(frozen=True)
class Kernel1D:
    """Smooth kernel supported in (-1, 1) with moments (1, 0, 0)."""

    alpha: float
    beta: float
    moments: tuple[float, float, float] = field(default=(1.0, 0.0, 0.0))

    def __call__(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (self.alpha + self.beta * t * t) * _bump(t)


@lru_cache(maxsize=1)
def build_kernel() -> Kernel1D:
    """Solve the 2x2 moment system for (alpha, beta) by adaptive quadrature."""
    b0 = quad(lambda t: _bump(t), -1, 1, **_QUAD_OPTS)[0]
    b2 = quad(lambda t: t * t * _bump(t), -1, 1, **_QUAD_OPTS)[0]
    b4 = quad(lambda t: t ** 4 * _bump(t), -1, 1, **_QUAD_OPTS)[0]
    A = np.array([[b0, b2], [b2, b4]])
    alpha, beta = np.linalg.solve(A, np.array([1.0, 0.0]))
    ker = Kernel1D(float(alpha), float(beta))
    m0 = quad(lambda t: ker(t), -1, 1, **_QUAD_OPTS)[0]
    m1 = quad(lambda t: t * ker(t), -1, 1, **_QUAD_OPTS)[0]
    m2 = quad(lambda t: t * t * ker(t), -1, 1, **_QUAD_OPTS)[0]
    if abs(m0 - 1.0) > 1e-10 or abs(m1) > 1e-10 or abs(m2) > 1e-10:
        raise RuntimeError(f"kernel moment solve failed: {(m0, m1, m2)}")
    return Kernel1D(float(alpha), float(beta), (float(m0), float(m1), float(m2)))


def _axis_weights(spacing: float, scale: float) -> np.ndarray:
    """Trapezoid-on-lattice weights for convolution at kernel scale `scale`."""
    if scale < 2.0 * spacing:
        raise GridError(f"kernel scale {scale} under-resolved (need >= 2 * spacing {spacing})")
    ker = build_kernel()
    m = int(np.floor(scale / spacing))
    offs = np.arange(-m, m + 1) * spacing
    w = ker(offs / scale) * (spacing / scale)
    # renormalise the lattice quadrature so constants survive exactly
    w = w / w.sum()
    w[m] -= w.sum() - 1.0
    return w


def _convolve_axis(values: np.ndarray, arr_axis: int, weights: np.ndarray, periodic: bool) -> np.ndarray:
    mode = "wrap" if periodic else "nearest"
    return convolve1d(values, weights, axis=arr_axis, mode=mode)


def mollify_xprime(u: GridFunction, eps: float) -> GridFunction:
    """Partial mollification along the x' axes only (scale eps per axis)."""
    g = u.grid
    vals = u.values
    for ax in range(g.q):
        w = _axis_weights(g.spacing(ax), eps)
        vals = _convolve_axis(vals, g.lead + ax, w, g.boundary[ax] == "periodic")
    return u.with_values(vals)


def mollify_zprime(u: GridFunction, eps: float) -> GridFunction:
    """Parabolic partial mollification: scale eps in x', eps^2 in t."""
    g = u.grid
    if g.time_axis is None:
        raise GridError("parabolic mollification needs a time axis")
    vals = u.values
    wt = _axis_weights(g.time_axis.tau, eps * eps)
    vals = _convolve_axis(vals, 0, wt, periodic=False)
    for ax in range(g.q):
        w = _axis_weights(g.spacing(ax), eps)
        vals = _convolve_axis(vals, g.lead + ax, w, g.boundary[ax] == "periodic")
    return u.with_values(vals)


def mollify_full(u: GridFunction, eps: float) -> GridFunction:
    """Mollification along all d spatial axes; time (when present) untouched."""
    g = u.grid
    vals = u.values
    for ax in range(g.d):
        w = _axis_weights(g.spacing(ax), eps)
        vals = _convolve_axis(vals, g.lead + ax, w, g.boundary[ax] == "periodic")
    return u.with_values(vals)


# -- lemma-rate checks ---------------------------------------------------------


@dataclass
class LemmaReport:
    eps_list: list[float]
    sup_err: list[float]
    lhs_ratio: list[float]  # bound LHS / data seminorm, per eps
    slope: float            # log-log slope of sup_err vs eps
    data_seminorm: float    # [v] at the smoothness level k + delta
    base_seminorm: float    # [v] at level delta (the bound's right-hand side)
    ratio_spread: float     # max / min of lhs_ratio

    @property
    def max_ratio(self) -> float:
        return max(self.lhs_ratio)


def _fit_slope(eps_list, errs) -> float:
    x = np.log(np.asarray(eps_list, dtype=float))
    y = np.log(np.maximum(np.asarray(errs, dtype=float), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def _sup(u: GridFunction) -> float:
    return float(np.max(np.abs(u.values)))


def _grad_xprime_sup(v: GridFunction) -> float:
    g2 = None
    for ax in range(v.grid.q):
        d = fd_derivative(v, ax, 1).values
        g2 = d * d if g2 is None else g2 + d * d
    return float(np.sqrt(np.max(g2)))


def _hess_xprime_sup(v: GridFunction) -> float:
    q = v.grid.q
    return max(_sup(fd_xprime_alpha(v, a)) for a in multi_indices(q, 2))


def check_lemma31(
    u: GridFunction,
    delta: float,
    k: int,
    eps_list: list[float],
    interior_margin: float = 0.25,
    budget: PairBudget = AUTO,
) -> LemmaReport:
    """Measure both sides of the mollification bounds on the x' family:
    gradient/Hessian growth against [v]_{x',delta} and the approximation rate
    sup|v - v_eps| ~ eps^(k+delta). Sups are taken on an interior sub-box so
    the boundary extension layer (width eps) is not measured."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    restrict = lambda w: restrict_interior(w, interior_margin)
    v_in = restrict(u)
    base = seminorm_xprime(v_in, delta, budget)
    data = base if k == 0 else seminorm_xprime_k(v_in, k, delta, budget)
    sup_err, ratios = [], []
    for eps in eps_list:
        ve = mollify_xprime(u, eps)
        ve_in = restrict(ve)
        sup_err.append(float(np.max(np.abs(ve_in.values - v_in.values))))
        lhs = eps ** (1.0 - delta) * _grad_xprime_sup(ve_in) + eps ** (2.0 - delta) * _hess_xprime_sup(ve_in)
        ratios.append(lhs / base if base > 0 else np.inf)
    finite = [r for r in ratios if np.isfinite(r)]
    spread = (max(finite) / min(finite)) if finite and min(finite) > 0 else np.inf
    return LemmaReport(
        eps_list=list(eps_list),
        sup_err=sup_err,
        lhs_ratio=ratios,
        slope=_fit_slope(eps_list, sup_err),
        data_seminorm=data,
        base_seminorm=base,
        ratio_spread=spread,
    )


def check_lemma41(
    u: GridFunction,
    delta: float,
    k: int,
    eps_list: list[float],
    interior_margin: float = 0.25,
    time_margin: float = 0.2,
    budget: PairBudget = AUTO,
) -> LemmaReport:
    """Parabolic analogue of check_lemma31 on the z' = (t, x') family."""
    if u.grid.time_axis is None:
        raise GridError("check_lemma41 needs a time axis")
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    restrict = lambda w: restrict_interior(w, interior_margin, time_margin_fraction=time_margin)
    v_in = restrict(u)
    base = seminorm_zprime(v_in, delta, budget)
    data = base if k == 0 else seminorm_zprime_k(v_in, k, delta, budget)
    sup_err, ratios = [], []
    for eps in eps_list:
        ve = mollify_zprime(u, eps)
        ve_in = restrict(ve)
        sup_err.append(float(np.max(np.abs(ve_in.values - v_in.values))))
        lhs = (
            eps ** (2.0 - delta) * _sup(fd_derivative(ve_in, "t", 1))
            + eps ** (2.0 - delta) * _hess_xprime_sup(ve_in)
            + eps ** (1.0 - delta) * _grad_xprime_sup(ve_in)
        )
        ratios.append(lhs / base if base > 0 else np.inf)
    finite = [r for r in ratios if np.isfinite(r)]
    spread = (max(finite) / min(finite)) if finite and min(finite) > 0 else np.inf
    return LemmaReport(
        eps_list=list(eps_list),
        sup_err=sup_err,
        lhs_ratio=ratios,
        slope=_fit_slope(eps_list, sup_err),
        data_seminorm=data,
        base_seminorm=base,
        ratio_spread=spread,
    )
