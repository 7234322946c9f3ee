import numpy as np
import pytest

import schauderlab as sl
from schauderlab.lattice import GridError
from schauderlab.seminorm import (
    EXACT,
    SeminormSpec,
    sampled,
    seminorm_full,
    seminorm_partial,
    seminorm_time_half,
    seminorm_xprime,
    seminorm_xprime_k,
    seminorm_zprime,
)


def _grid(n=9, m=9):
    return sl.make_grid(2, 1, [(-1, 1), (-1, 1)], (n, m))


def test_xprime_vanishes_on_xpp_functions():
    g = _grid()
    u = sl.sample(g, lambda x, y: np.cos(3 * y) + 0 * x)
    assert seminorm_xprime(u, 0.5) == 0.0


def test_xprime_identity_function_endpoint_pair():
    # u = x^1: the quotient 2 / 2^delta = 2^(1-delta) is attained at the
    # endpoint pair (every other pair gives |dx|^(1-delta) < 2^(1-delta))
    g = _grid()
    u = sl.sample(g, lambda x, y: x + 0 * y)
    assert seminorm_xprime(u, 0.5) == pytest.approx(2 ** 0.5, rel=1e-12)


def test_xprime_abs_cusp_brute_force_value():
    # u = |x^1| on [-1, 1]: pairs through the kink give |x|^(1-delta) <= 1 and
    # same-sign pairs give |dx|^(1-delta) <= 1, so the exact maximum is 1
    # (attained at e.g. (0, 1)); cross-checked against the full enumeration.
    from schauderlab import oracle

    g = _grid()
    u = sl.sample(g, lambda x, y: np.abs(x) + 0 * y)
    val = seminorm_xprime(u, 0.5)
    assert val == pytest.approx(1.0, abs=1e-12)
    assert val == oracle.brute_force_seminorm(u, SeminormSpec("xprime", 0, 0.5, EXACT))


def test_homogeneity_exact():
    g = _grid()
    rng = np.random.default_rng(5)
    u = sl.GridFunction(g, rng.standard_normal(g.shape))
    a = seminorm_xprime(u, 0.5)
    b = seminorm_xprime(u.with_values(3.0 * u.values), 0.5)
    assert b == 3.0 * a


def test_triangle_inequality():
    g = _grid()
    rng = np.random.default_rng(6)
    u = sl.GridFunction(g, rng.standard_normal(g.shape))
    v = sl.GridFunction(g, rng.standard_normal(g.shape))
    s = u.with_values(u.values + v.values)
    for budget in (EXACT, sampled(40, seed=2)):
        assert seminorm_xprime(s, 0.5, budget) <= (
            seminorm_xprime(u, 0.5, budget) + seminorm_xprime(v, 0.5, budget) + 1e-12
        )


def test_sampled_below_exact_and_equal_when_covering():
    g = _grid(17, 17)
    rng = np.random.default_rng(7)
    u = sl.GridFunction(g, rng.standard_normal(g.shape))
    exact = seminorm_xprime(u, 0.4)
    assert seminorm_xprime(u, 0.4, sampled(10, seed=1)) <= exact
    # covering budget upgrades to exact enumeration
    assert seminorm_xprime(u, 0.4, sampled(10**6, seed=1)) == exact


def test_vanishing_characterisation():
    g = _grid()
    u = sl.sample(g, lambda x, y: np.sin(y) + 0 * x)
    assert seminorm_xprime(u, 0.3) == 0.0
    v = u.with_values(u.values.copy())
    v.values[2, 3] += 1e-9  # break constancy along one fiber
    assert seminorm_xprime(v, 0.3) > 0.0


def test_xprime_never_exceeds_full_order0():
    rng = np.random.default_rng(8)
    g = _grid()
    for _ in range(5):
        u = sl.GridFunction(g, rng.standard_normal(g.shape))
        assert seminorm_xprime(u, 0.5) <= seminorm_full(u, 0, 0.5) + 1e-15


def test_full_vs_partial_separation():
    # rough in x'' only: partial vanishes, full does not
    g = _grid()
    u = sl.sample(g, lambda x, y: np.sign(y - 0.1) + 0 * x)
    assert seminorm_xprime(u, 0.5) == 0.0
    assert seminorm_full(u, 0, 0.5) > 0.0


def test_xprime_k_quadratic_vanishes():
    g = _grid()
    u = sl.sample(g, lambda x, y: (1 + np.sin(2 * y)) + 0.5 * x - 0.25 * x * x * (2 + np.cos(y)))
    # D^2_{x'} u is constant along x' in every slice, so its x'-quotient is 0
    assert seminorm_xprime_k(u, 2, 0.5) <= 1e-10


def test_xprime_k_mixed_multiindex_q2():
    g = sl.make_grid(3, 2, [(-1, 1)] * 3, (9, 9, 7))
    u = sl.sample(g, lambda x, y, z: x * y * (1 + 0.5 * np.sin(3 * z)))
    # alpha = (1,1) derivative is constant in x' per slice; (2,0), (0,2) vanish
    assert seminorm_xprime_k(u, 2, 0.5) <= 1e-10


def test_xprime_k_cusp_matches_brute_force():
    from schauderlab import oracle

    g = _grid(17, 9)
    u = sl.sample(g, lambda x, y: np.abs(x) ** 2.5 + 0 * y)
    spec = SeminormSpec("xprime", 2, 0.5, EXACT)
    assert seminorm_xprime_k(u, 2, 0.5) == oracle.brute_force_seminorm(u, spec)


def test_parabolic_distance_convention():
    # rho(z1', z2') = |x1' - x2'| + |t1 - t2|^(1/2); in particular
    # rho((0,0), (1,1)) = 1 + 1 = 2
    from schauderlab.seminorm import _pair_dist

    t = np.array([0.0, 1.0])
    x = np.array([0.0, 1.0])
    dist = _pair_dist([t, x], [True, False], np.array([0]), np.array([1]))
    assert dist[0] == 2.0


def test_zprime_spike_nearest_metric():
    # a point spike is maximised at its rho-nearest neighbour, which switches
    # from the x-step (rho = h) to the time-step (rho = sqrt(tau)) as tau shrinks
    def spike_value(tau_total):
        g = sl.make_grid(2, 1, [(0, 1), (0, 1)], (3, 3), time_axis=(0.0, tau_total, 3))
        vals = np.zeros(g.shape)
        vals[0, 0, 0] = 1.0
        return seminorm_zprime(sl.GridFunction(g, vals), 0.5)

    # tau = 0.5: min rho = min(h, sqrt(tau)) = 0.5 -> quotient 1/sqrt(0.5)
    assert spike_value(1.0) == pytest.approx(1.0 / 0.5**0.5, rel=1e-12)
    # tau = 0.005: sqrt(tau) ~ 0.0707 < h -> quotient 1/0.0707^0.5
    assert spike_value(0.01) == pytest.approx(1.0 / 0.005**0.25, rel=1e-12)


def test_zprime_vanishes_on_xpp():
    g = sl.make_grid(2, 1, [(0, 1), (0, 1)], (5, 5), time_axis=(0.0, 1.0, 4))
    u = sl.sample(g, lambda t, x, y: np.cos(y) + 0 * x + 0 * t)
    assert seminorm_zprime(u, 0.5) == 0.0


def test_zprime_linear_time_matches_brute_force():
    from schauderlab import oracle

    g = sl.make_grid(2, 1, [(0, 1), (0, 1)], (5, 4), time_axis=(0.0, 1.0, 5))
    u = sl.sample(g, lambda t, x, y: t + 0 * x + 0 * y)
    spec = SeminormSpec("zprime", 0, 0.5, EXACT)
    assert seminorm_zprime(u, 0.5) == oracle.brute_force_seminorm(u, spec)
    with pytest.raises(GridError):
        seminorm_zprime(sl.sample(_grid(), lambda x, y: x + y), 0.5)


def test_time_half_examples():
    g = sl.make_grid(2, 1, [(0, 1), (0, 1)], (4, 4), time_axis=(0.0, 1.0, 9))
    const = sl.sample(g, lambda t, x, y: np.sin(x * y) + 0 * t)
    assert seminorm_time_half(const, 0.5) == 0.0
    u = sl.sample(g, lambda t, x, y: t + 0 * x + 0 * y)
    # sup |dt| / |dt|^(0.75) = |dt|^(0.25) -> 1 at the extreme pair
    assert seminorm_time_half(u, 0.5) == pytest.approx(1.0, rel=1e-12)
    assert seminorm_time_half(u.with_values(2 * u.values), 0.5) == pytest.approx(2.0, rel=1e-12)


def test_full_k1_affine_vanishes():
    g = _grid()
    u = sl.sample(g, lambda x, y: 1.0 + 2.0 * x - 3.0 * y)
    assert seminorm_full(u, 1, 0.5) <= 1e-11


def test_full_k1_cusp_matches_brute_force():
    from schauderlab import oracle

    g = _grid(9, 9)
    u = sl.sample(g, lambda x, y: (np.sqrt(x * x + y * y)) ** 1.5)
    spec = SeminormSpec("full", 1, 0.5, EXACT)
    assert seminorm_full(u, 1, 0.5) == oracle.brute_force_seminorm(u, spec)
    assert seminorm_full(u, 1, 0.5) > 0


def test_delta_validation():
    g = _grid()
    u = sl.sample(g, lambda x, y: x + y)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            seminorm_xprime(u, bad)


def test_seminorm_partial_control_direction():
    # quotient over x'' pairs only: picks up x''-roughness that [.]_{x'} ignores
    g = _grid()
    u = sl.sample(g, lambda x, y: np.sign(y) + 0 * x)
    assert seminorm_partial(u, [1], 0.5) > 1.0
    assert seminorm_partial(u, [0], 0.5) == 0.0
