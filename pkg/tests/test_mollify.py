import numpy as np
import pytest

import schauderlab as sl
from schauderlab.lattice import GridError
from schauderlab.mollify import build_kernel, check_lemma31, check_lemma41, plateau_bump


def test_kernel_moments():
    k = build_kernel()
    m0, m1, m2 = k.moments
    assert abs(m0 - 1.0) <= 1e-10
    assert abs(m1) <= 1e-10
    assert abs(m2) <= 1e-10


def test_kernel_shape():
    k = build_kernel()
    # the second-moment condition forces a negative ring
    assert k.beta < 0.0
    assert k(0.0) > 0.0
    assert k(0.95) < 0.0
    assert k(1.0) == 0.0 and k(1.5) == 0.0


def test_plateau_bump():
    t = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    v = plateau_bump(t)
    assert np.allclose(v[:3], 1.0)
    assert 0.0 < v[3] < 1.0
    assert v[4] == 0.0 and v[5] == 0.0


def _grid(nx=129, ny=9):
    return sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (nx, ny))


def test_mollify_constant_and_xpp_invariance():
    g = _grid()
    c = sl.sample(g, lambda x, y: np.full_like(x + y, 2.5))
    out = sl.mollify_xprime(c, 0.5)
    assert np.allclose(out.values, 2.5, atol=1e-13)
    v = sl.sample(g, lambda x, y: np.sign(y - 0.3) + 0 * x)
    assert np.allclose(sl.mollify_xprime(v, 0.5).values, v.values, atol=1e-13)


def test_mollify_quadratic_reproduction():
    g = _grid()
    u = sl.sample(g, lambda x, y: 1.0 + 0.5 * x - 0.7 * x * x + 0 * y)
    ue = sl.mollify_xprime(u, 0.5)
    diff = sl.restrict_interior(ue.with_values(ue.values - u.values), 0.3)
    assert np.max(np.abs(diff.values)) <= 1e-6


def test_mollify_underresolved_rejected():
    g = _grid(17, 5)
    u = sl.sample(g, lambda x, y: x + y)
    with pytest.raises(GridError):
        sl.mollify_xprime(u, 1.9 * g.spacing(0))


def test_mollify_zprime_reproduction():
    g = sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (129, 5), time_axis=(0.0, 1.0, 513))
    u = sl.sample(g, lambda t, x, y: t + 0.5 * x * x + 0 * y)
    eps = 0.25  # eps^2/tau = 32, eps/h = 16
    ue = sl.mollify_zprime(u, eps)
    diff = sl.restrict_interior(ue.with_values(ue.values - u.values), 0.3, time_margin_fraction=0.2)
    assert np.max(np.abs(diff.values)) <= 1e-6
    gs = sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (65, 5))
    with pytest.raises(GridError):
        sl.mollify_zprime(sl.sample(gs, lambda x, y: x + y), 0.25)
    xpp = sl.sample(g, lambda t, x, y: np.cos(2 * y) + 0 * x + 0 * t)
    assert np.allclose(sl.mollify_zprime(xpp, eps).values, xpp.values, atol=1e-13)


def test_mollify_full_reproduction_and_time_untouched():
    g = sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (129, 129), time_axis=(0.0, 1.0, 3))
    u = sl.sample(g, lambda t, x, y: x * x - 0.3 * x * y + y + 0 * t)
    ue = sl.mollify_full(u, 0.5)
    diff = sl.restrict_interior(ue.with_values(ue.values - u.values), 0.3)
    assert np.max(np.abs(diff.values)) <= 1e-6
    w = sl.sample(g, lambda t, x, y: np.exp(t) + 0 * x + 0 * y)
    assert np.allclose(sl.mollify_full(w, 0.5).values, w.values, atol=1e-13)


def test_positivity_not_preserved():
    # guard against silently substituting a nonnegative kernel
    g = _grid(65, 5)
    vals = np.zeros(g.shape)
    vals[32, :] = 1.0
    spike = sl.GridFunction(g, vals)
    out = sl.mollify_xprime(spike, 0.25)
    assert np.min(out.values) < -1e-6


def test_mollify_linearity():
    g = _grid(65, 7)
    rng = np.random.default_rng(0)
    u = sl.GridFunction(g, rng.standard_normal(g.shape))
    v = sl.GridFunction(g, rng.standard_normal(g.shape))
    lhs = sl.mollify_xprime(u.with_values(2 * u.values - v.values), 0.25).values
    rhs = 2 * sl.mollify_xprime(u, 0.25).values - sl.mollify_xprime(v, 0.25).values
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_mollify_commutes_with_first_derivative():
    g = _grid(129, 7)
    u = sl.sample(g, lambda x, y: np.sin(3 * x) * (1 + 0.5 * y) + np.abs(x) ** 1.5)
    eps = 0.25
    a = sl.fd_derivative(sl.mollify_xprime(u, eps), 0, 1)
    b = sl.mollify_xprime(sl.fd_derivative(u, 0, 1), eps)
    da = sl.restrict_interior(a.with_values(a.values - b.values), 0.3)
    # both are translation-invariant convolutions away from the box boundary
    assert np.max(np.abs(da.values)) <= 1e-12


@pytest.mark.parametrize("delta", [0.3, 0.5, 0.7])
def test_lemma31_rates(delta):
    g = sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (513, 9))
    cusp = sl.sample(g, lambda x, y: np.abs(x) ** delta + 0 * y)
    rep = check_lemma31(cusp, delta, 0, [0.5, 0.25, 0.125], interior_margin=0.3)
    assert abs(rep.slope - delta) <= 0.05
    assert rep.ratio_spread <= 2.0
    assert np.isfinite(rep.max_ratio)


def test_lemma31_quadratic_exact():
    g = _grid()
    u = sl.sample(g, lambda x, y: x * x * (1.0 + 0 * y))
    rep = check_lemma31(u, 0.5, 2, [0.5, 0.25], interior_margin=0.3)
    assert max(rep.sup_err) <= 1e-6


@pytest.mark.parametrize("delta", [0.3, 0.5, 0.7])
def test_lemma41_rates(delta):
    g = sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (129, 5), time_axis=(0.0, 1.0, 513))
    t, x1, x2 = g.meshgrid()
    rho = np.abs(x1) + np.sqrt(np.abs(t - 0.5))
    v = sl.GridFunction(g, np.ascontiguousarray(np.broadcast_to(rho**delta, g.shape).astype(float)))
    rep = check_lemma41(v, delta, 0, [0.5, 2**-1.5, 0.25], interior_margin=0.3, time_margin=0.25)
    assert abs(rep.slope - delta) <= 0.05
    assert rep.ratio_spread <= 2.0


def test_lemma31_ratio_constant_stable_across_halvings():
    g = sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (513, 9))
    cusp = sl.sample(g, lambda x, y: np.abs(x) ** 0.5 + 0 * y)
    rep = check_lemma31(cusp, 0.5, 0, [0.5, 0.25, 0.125], interior_margin=0.3)
    ratios = rep.lhs_ratio
    for a, b in zip(ratios, ratios[1:]):
        assert max(a, b) / min(a, b) <= 2.0
