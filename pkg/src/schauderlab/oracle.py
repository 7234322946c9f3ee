"""Independent ground-truth generators used to validate the main modules:
an FFT solver for constant-coefficient periodic problems, closed forms for the
log-type mixed-derivative counterexample, the half-plane boundary data, a
full-enumeration seminorm reference, and a discrete Remez exchange fit.

The closed-form derivatives of u = x y sqrt(-ln(x^2+y^2)) below were derived by
hand (product rule on L = sqrt(-ln s), L_x = -x/(sL)) and double-checked both
symbolically and against centred differences; see the test suite.
"""

from __future__ import annotations

import numpy as np

from .fields import CoefficientField
from .lattice import AnisotropicGrid, GridError, GridFunction, fd_derivative, fd_second, fd_xprime_alpha, multi_indices
from .mollify import plateau_bump
from .seminorm import SeminormSpec

PAIR_BUDGET = 100_000_000


class OracleError(ValueError):
    pass


# -- spectral constant-coefficient solver -----------------------------------------


def spectral_solve_constant(
    a: np.ndarray | CoefficientField,
    f: GridFunction,
    symbol: str = "continuous",
) -> GridFunction:
    """Fourier solution of  a^{ij} D_ij u = f  on the fully periodic box.

    symbol="continuous" divides by the operator symbol -a^{ij} k_i k_j;
    symbol="stencil" divides by the symbol of the discrete 2nd-order stencil
    (the right reference when validating the finite-difference solver, which
    it matches to solver precision rather than to discretisation error).
    """
    grid = f.grid
    if grid.has_time:
        raise OracleError("spectral oracle is spatial only")
    if any(b != "periodic" for b in grid.boundary):
        raise OracleError("spectral oracle needs a fully periodic grid")
    if symbol not in ("continuous", "stencil"):
        raise OracleError(f"unknown symbol mode {symbol!r}")
    A = a.spatial_entries() if isinstance(a, CoefficientField) else np.asarray(a, dtype=float)
    if isinstance(a, CoefficientField):
        if a.pattern != "constant":
            raise OracleError("spectral oracle needs constant coefficients")
        A = a.values
    if A.shape != (grid.d, grid.d):
        raise OracleError("coefficient matrix must be d x d")
    vals = f.values
    scale = float(np.max(np.abs(vals))) or 1.0
    if abs(float(np.mean(vals))) > 1e-12 * scale:
        raise OracleError("right-hand side must be mean-zero on the torus")
    ks = []
    for ax in range(grid.d):
        h = grid.spacing(ax)
        ks.append(2.0 * np.pi * np.fft.fftfreq(grid.counts[ax], d=h))
    mesh = np.meshgrid(*ks, indexing="ij")
    if symbol == "continuous":
        sym = np.zeros(grid.counts)
        for i in range(grid.d):
            for j in range(grid.d):
                sym += A[i, j] * mesh[i] * mesh[j]
        denom = -sym
    else:
        denom = np.zeros(grid.counts)
        for i in range(grid.d):
            h = grid.spacing(i)
            denom += -A[i, i] * (4.0 / h**2) * np.sin(mesh[i] * h / 2.0) ** 2
        for i in range(grid.d):
            for j in range(grid.d):
                if i != j:
                    hi, hj = grid.spacing(i), grid.spacing(j)
                    denom += -A[i, j] * np.sin(mesh[i] * hi) * np.sin(mesh[j] * hj) / (hi * hj)
    fh = np.fft.fftn(vals)
    with np.errstate(divide="ignore", invalid="ignore"):
        uh = fh / denom
    uh[(0,) * grid.d] = 0.0
    u = np.real(np.fft.ifftn(uh))
    return GridFunction(grid, np.ascontiguousarray(u))


# -- closed-form mixed-derivative counterexample ------------------------------------

PLATEAU_R2 = 0.25  # inside |x| <= 1/2 the cutoff is identically 1


def counterexample_mixed(x, y):
    """u = x y sqrt(-ln(x^2+y^2)) and its second derivatives inside the
    cutoff plateau. Returns (u, u_xx, u_yy, u_xy); at the origin the
    continuous extensions (zero) are returned and u_xy is +inf."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = x * x + y * y
    if np.any(s > PLATEAU_R2 + 1e-15):
        raise OracleError("evaluation outside the cutoff plateau (need x^2+y^2 <= 1/4)")
    origin = s == 0.0
    s_safe = np.where(origin, 1e-300, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.sqrt(-np.log(s_safe))
        u = x * y * L
        u_xx = -x * y / (s_safe * L) - x * y * (2.0 * y * y * L + x * x / L) / (s_safe**2 * L**2)
        u_yy = -x * y / (s_safe * L) - x * y * (2.0 * x * x * L + y * y / L) / (s_safe**2 * L**2)
        u_xy = L - y * y / (s_safe * L) - x * x * (L * (s_safe - 2.0 * y * y) + y * y / L) / (s_safe**2 * L**2)
    u = np.where(origin, 0.0, u)
    u_xx = np.where(origin, 0.0, u_xx)
    u_yy = np.where(origin, 0.0, u_yy)
    u_xy = np.where(origin, np.inf, u_xy)
    return u, u_xx, u_yy, u_xy


# -- half-plane boundary counterexample data -----------------------------------------


def halfplane_counterexample_data(grid: AnisotropicGrid) -> tuple[GridFunction, float]:
    """Right-hand side eta(x1) eta(x2) 1_{x2 >= 0} on [0, X] x [-Y, Y] (X, Y >= 2)
    with the plateau bump (1 on |t| <= 1, 0 on |t| >= 2), plus the homogeneous
    Dirichlet value used on every box side (truncation of the half plane)."""
    if grid.d != 2 or grid.has_time:
        raise OracleError("half-plane data needs a 2-D spatial grid")
    (a1, b1), (a2, b2) = grid.extents
    if abs(a1) > 1e-12 or b1 < 2.0 - 1e-12 or abs(a2 + b2) > 1e-12 or b2 < 2.0 - 1e-12:
        raise OracleError("domain must be [0, X] x [-Y, Y] with X, Y >= 2")
    if any(b != "dirichlet" for b in grid.boundary):
        raise OracleError("half-plane problem is a Dirichlet box")
    x1, x2 = grid.meshgrid()
    f = plateau_bump(x1) * plateau_bump(x2) * (x2 >= 0.0)
    return GridFunction(grid, np.ascontiguousarray(np.broadcast_to(f, grid.shape).astype(float))), 0.0


# -- full-enumeration seminorm reference ----------------------------------------------


def _bf_fields(u: GridFunction, spec: SeminormSpec) -> list[GridFunction]:
    g = u.grid
    if spec.k == 0:
        return [u]
    if spec.family in ("xprime", "zprime"):
        return [fd_xprime_alpha(u, a) for a in multi_indices(g.q, spec.k)]
    if spec.family == "full":
        if spec.k == 1:
            return [fd_derivative(u, i, 1) for i in range(g.d)]
        return [fd_second(u, i, j) for i in range(g.d) for j in range(i, g.d)]
    raise OracleError(f"family {spec.family} does not take derivative orders")


def brute_force_seminorm(u: GridFunction, spec: SeminormSpec) -> float:
    """Exact maximisation over all admissible pairs; no sampling, no budgets
    beyond a hard pair-count cap. Reference for the estimator's exact mode."""
    g = u.grid
    if spec.family in ("zprime", "time-half") and not g.has_time:
        raise GridError("family needs a time axis")
    include_time = spec.family in ("zprime", "time-half") or (spec.family == "full" and g.has_time)
    if spec.family == "xprime":
        spatial = tuple(range(g.q))
    elif spec.family == "zprime":
        spatial = tuple(range(g.q))
    elif spec.family == "time-half":
        spatial = ()
    else:
        spatial = tuple(range(g.d))
    exponent = 1.0 + spec.delta if spec.family == "time-half" else spec.delta

    arr_axes = ([0] if include_time else []) + [g.lead + ax for ax in spatial]
    cols = []
    if include_time:
        cols.append((g.time_axis.coords(), True))
    cols.extend((g.coords(ax), False) for ax in spatial)

    fields = _bf_fields(u, spec)
    nd = fields[0].values.ndim
    sample = np.moveaxis(fields[0].values, arr_axes, range(nd - len(arr_axes), nd))
    pair_shape = sample.shape[nd - len(arr_axes):]
    P = int(np.prod(pair_shape))
    F = int(np.prod(sample.shape[: nd - len(arr_axes)]))
    if P * P * F * len(fields) > PAIR_BUDGET:
        raise OracleError("pair budget exceeded")

    idx = np.unravel_index(np.arange(P), pair_shape)
    dist = None
    tpart = None
    for a, (c, is_t) in enumerate(cols):
        cv = c[idx[a]]
        dc = cv[None, :] - cv[:, None]
        if is_t:
            sroot = np.sqrt(np.abs(dc))
            tpart = sroot if tpart is None else tpart + sroot
        else:
            sq = dc * dc
            dist = sq if dist is None else dist + sq
    dist_mat = np.sqrt(dist) if dist is not None else None
    if tpart is not None:
        dist_mat = tpart if dist_mat is None else dist_mat + tpart
    iu, ju = np.triu_indices(P, k=1)
    denom = np.power(dist_mat[iu, ju], exponent)

    best = 0.0
    for fgf in fields:
        V = np.moveaxis(fgf.values, arr_axes, range(nd - len(arr_axes), nd)).reshape(-1, P)
        M = np.zeros((P, P))
        for srow in range(V.shape[0]):
            row = V[srow]
            np.maximum(M, np.abs(row[None, :] - row[:, None]), out=M)
        q = M[iu, ju] / denom
        if q.size:
            best = max(best, float(np.max(q)))
    return best


# -- discrete Remez exchange ------------------------------------------------------------


def chebyshev_fit_1d(x: np.ndarray, y: np.ndarray, degree: int, maxiter: int = 60) -> float:
    """Best uniform polynomial approximation error on the sample set, by the
    exchange (discrete Remez) iteration. Returns min over degree-<=degree
    polynomials of max_i |y_i - p(x_i)|."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise OracleError("need matching 1-D sample arrays")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if np.unique(x).size < degree + 2:
        raise OracleError(f"need at least {degree + 2} distinct sample points")
    lo, hi = float(x[0]), float(x[-1])
    xs = (2.0 * x - (lo + hi)) / (hi - lo)  # scale to [-1, 1]
    m = degree + 2

    # initial reference: Chebyshev points mapped to nearest samples
    targets = np.cos(np.pi * np.arange(m) / (m - 1))[::-1]
    ref = np.unique(np.searchsorted(xs, targets).clip(0, xs.size - 1))
    j = 0
    while ref.size < m:  # pad with unused indices
        if j not in ref:
            ref = np.sort(np.append(ref, j))
        j += 1

    best_err = np.inf
    for _ in range(maxiter):
        V = np.polynomial.chebyshev.chebvander(xs[ref], degree)
        sigma = (-1.0) ** np.arange(m)
        Asys = np.hstack([V, sigma[:, None]])
        try:
            sol = np.linalg.solve(Asys, y[ref])
        except np.linalg.LinAlgError:
            raise OracleError("degenerate reference set in exchange iteration")
        coef, E = sol[:-1], sol[-1]
        r = y - np.polynomial.chebyshev.chebval(xs, coef)
        max_r = float(np.max(np.abs(r)))
        best_err = min(best_err, max_r)
        if max_r <= abs(E) * (1.0 + 1e-12) + 1e-15:
            return max_r
        # multi-point exchange: extremum of each sign run of the residual
        signs = np.sign(r)
        signs[signs == 0] = 1.0
        runs = []
        start = 0
        for i in range(1, xs.size + 1):
            if i == xs.size or signs[i] != signs[start]:
                seg = slice(start, i)
                runs.append(start + int(np.argmax(np.abs(r[seg]))))
                start = i
        if len(runs) < m:
            return max_r
        runs = np.asarray(runs)
        # keep m consecutive extrema containing the global maximum
        gi = int(np.argmax(np.abs(r[runs])))
        lo_i = min(max(0, gi - m + 1), len(runs) - m)
        window = runs[lo_i : lo_i + m]
        if np.array_equal(window, ref):
            return max_r
        ref = window
    return best_err
