"""Discrete joinings: KR solvers and bounds, disintegration, coefficients,
weak closure, and the averaging recursion."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from iet3.arith import MODE_RATIONAL
from iet3.iet_core import Iet3, apply
from iet3.joinings import (BaryState, DiscreteMeasure2D,
                           apply_Asigma, approx_by_powers, bary_recursion,
                           disintegrate, empirical_orbit_joining,
                           fiber_diameter_stats, kr_distance,
                           kr_distance_detailed, kr_lower_witness,
                           kr_upper_binned, measure_from_csv, measure_to_csv,
                           mix, product_sample, sample_power_joining, w1_1d,
                           weak_closure_check)

IET = Iet3(0.2, 0.3, 0.5)


def _rand_measure(rng, n, equal=False):
    xs, ys = rng.random(n), rng.random(n)
    if equal:
        return DiscreteMeasure2D.equal_weight(xs, ys)
    ws = rng.random(n) + 0.1
    return DiscreteMeasure2D(xs, ys, ws / ws.sum())


# -- sampling ---------------------------------------------------------------

def test_power_joining_diagonal():
    m = sample_power_joining(IET, 0, 100, seed=1)
    assert np.allclose(m.xs, m.ys)


def test_power_joining_periodic_diagonal():
    iet = Iet3(Fraction(1, 5), Fraction(2, 5), Fraction(2, 5), MODE_RATIONAL)
    # find the period of the rational exchange, then T^p gives the diagonal
    x = Fraction(3, 1000)
    cur, p = x, 0
    for i in range(1, 5000):
        cur = apply(iet, cur)
        if cur == x:
            p = i
            break
    m = sample_power_joining(iet, p, 200, seed=2)
    assert np.max(np.abs(m.xs - m.ys)) < 1e-9


def test_power_joining_marginals_near_uniform():
    for a in (0, 1, 3):
        m = sample_power_joining(IET, a, 400, seed=3)
        uniform = (np.arange(4000) + 0.5) / 4000
        dx = w1_1d(m.xs, m.ws, uniform, np.full(4000, 1 / 4000))
        dy = w1_1d(m.ys, m.ws, uniform, np.full(4000, 1 / 4000))
        assert dx <= 2 / 400
        assert dy <= 2 / 400


def test_empirical_orbit_joining():
    m = empirical_orbit_joining(IET, 0.1, 0, 5)
    assert np.allclose(m.xs, m.ys)
    m1 = empirical_orbit_joining(IET, 0.1, 3, 1)
    assert len(m1) == 1
    from iet3.iet_core import apply_pow
    assert m1.ys[0] == pytest.approx(apply_pow(IET, 3, 0.1), abs=1e-12)


# -- exact KR ---------------------------------------------------------------

def test_kr_trivial_examples():
    one = DiscreteMeasure2D(np.array([0.1]), np.array([0.2]), np.array([1.0]))
    two = DiscreteMeasure2D(np.array([0.4]), np.array([0.2]), np.array([1.0]))
    assert kr_distance(one, two) == pytest.approx(0.3, abs=1e-12)
    assert kr_distance(one, one) == 0.0
    mu = DiscreteMeasure2D(np.array([0.0, 0.9]), np.array([0.0, 0.9]),
                           np.array([0.5, 0.5]))
    nu = DiscreteMeasure2D(np.array([0.1, 0.8]), np.array([0.0, 0.9]),
                           np.array([0.5, 0.5]))
    # brute force over both matchings
    brute = min(0.5 * (0.1 + 0.1), 0.5 * ((0.8 + 0.9) + (0.9 + 0.8)))
    assert kr_distance(mu, nu) == pytest.approx(brute, abs=1e-12)


def test_kr_matching_oracle_small():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        mu = _rand_measure(rng, n, equal=True)
        nu = _rand_measure(rng, n, equal=True)
        got = kr_distance(mu, nu)
        C = (np.abs(mu.xs[:, None] - nu.xs[None, :])
             + np.abs(mu.ys[:, None] - nu.ys[None, :]))
        brute = min(np.mean([C[i, p[i]] for i in range(n)])
                    for p in itertools.permutations(range(n)))
        assert got == pytest.approx(brute, abs=1e-9)


def _transport_vertices(mu_w, nu_w):
    """All basic feasible solutions of the small transportation polytope."""
    n, m = len(mu_w), len(nu_w)
    edges = [(i, j) for i in range(n) for j in range(m)]
    for tree in itertools.combinations(edges, n + m - 1):
        A = np.zeros((n + m, len(tree)))
        for k, (i, j) in enumerate(tree):
            A[i, k] = 1
            A[n + j, k] = 1
        b = np.concatenate([mu_w, nu_w])
        sol, res, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank < len(tree):
            continue
        if np.max(np.abs(A @ sol - b)) > 1e-10:
            continue
        if np.min(sol) < -1e-10:
            continue
        yield tree, np.maximum(sol, 0.0)


def test_kr_vertex_enumeration_oracle():
    rng = np.random.default_rng(5)
    for _ in range(8):
        n, m = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        mu = _rand_measure(rng, n)
        nu = _rand_measure(rng, m)
        C = (np.abs(mu.xs[:, None] - nu.xs[None, :])
             + np.abs(mu.ys[:, None] - nu.ys[None, :]))
        best = math.inf
        for tree, flow in _transport_vertices(mu.ws, nu.ws):
            cost = sum(C[i, j] * f for (i, j), f in zip(tree, flow))
            best = min(best, cost)
        assert kr_distance(mu, nu, method="lp") == pytest.approx(best, abs=1e-9)


def test_kr_metric_axioms():
    rng = np.random.default_rng(6)
    for _ in range(60):
        sizes = rng.integers(3, 40, size=3)
        a, b, c = (_rand_measure(rng, int(s)) for s in sizes)
        dab = kr_distance(a, b)
        dba = kr_distance(b, a)
        dac = kr_distance(a, c)
        dcb = kr_distance(c, b)
        assert abs(dab - dba) < 1e-9
        assert dab <= dac + dcb + 1e-9
    same = _rand_measure(rng, 10)
    assert kr_distance(same, same) < 1e-12


def test_kr_grid_within_bound():
    rng = np.random.default_rng(7)
    a = _rand_measure(rng, 400, equal=True)
    b = _rand_measure(rng, 400, equal=True)
    exact = kr_distance(a, b, method="assignment")
    det = kr_distance_detailed(a, b, method="grid", grid=64)
    assert abs(det["value"] - exact) <= det["bound"] + 1e-9


def test_kr_bounds_bracket():
    rng = np.random.default_rng(8)
    a = _rand_measure(rng, 120, equal=True)
    b = _rand_measure(rng, 120, equal=True)
    exact = kr_distance(a, b)
    assert kr_lower_witness(a, b) <= exact + 1e-9
    assert exact <= kr_upper_binned(a, b, bins=64) + 1e-9


def test_kr_circle_metric():
    one = DiscreteMeasure2D(np.array([0.05]), np.array([0.5]), np.array([1.0]))
    two = DiscreteMeasure2D(np.array([0.95]), np.array([0.5]), np.array([1.0]))
    assert kr_distance(one, two, metric="circle") == pytest.approx(0.1, abs=1e-12)
    assert kr_distance(one, two, metric="interval") == pytest.approx(0.9, abs=1e-12)


def test_kr_unbalanced_rejected():
    a = DiscreteMeasure2D(np.array([0.1]), np.array([0.1]), np.array([1.0]))
    with pytest.raises(ValueError):
        DiscreteMeasure2D(np.array([0.1]), np.array([0.1]), np.array([0.7]))


# -- disintegration ---------------------------------------------------------

def test_disintegrate_diagonal():
    m = sample_power_joining(IET, 0, 1000, seed=9)
    d = disintegrate(m, 10)
    for b in range(10):
        if d.empty[b]:
            continue
        ys, _ = d.conditional(b)
        assert ys.min() >= b / 10 - 1e-9
        assert ys.max() < (b + 1) / 10 + 1e-9


def test_disintegrate_product_conditionals_uniform():
    m = product_sample(40000, seed=10)
    d = disintegrate(m, 20)
    grid = (np.arange(2000) + 0.5) / 2000
    gw = np.full(2000, 1 / 2000)
    for b in range(0, 20, 5):
        ys, ws = d.conditional(b)
        assert w1_1d(ys, ws, grid, gw) < 3 * 20 / math.sqrt(40000)


def test_disintegrate_reassembly():
    m = product_sample(5000, seed=11)
    d = disintegrate(m, 16)
    ys_all, ws_all = [], []
    for b in range(16):
        ys, ws = d.conditional(b)
        ys_all.append(ys)
        ws_all.append(ws * d.bin_mass[b])
    ys_all = np.concatenate(ys_all)
    ws_all = np.concatenate(ws_all)
    assert abs(ws_all.sum() - 1) < 1e-12
    assert w1_1d(ys_all, ws_all, m.ys, m.ws) < 1e-12


def test_fiber_diameter_examples():
    m = sample_power_joining(IET, 0, 2000, seed=12)
    stats = fiber_diameter_stats(disintegrate(m, 50))
    assert np.nanmax(stats["diameters"]) <= 1 / 50 + 0.01
    mixm = mix(sample_power_joining(IET, 0, 4000, seed=13),
               sample_power_joining(IET, 1, 4000, seed=13))
    dist_d = np.abs(apply(IET, np.linspace(0, 1, 1000, endpoint=False)) -
                    np.linspace(0, 1, 1000, endpoint=False))
    med = float(np.median(dist_d))
    st = fiber_diameter_stats(disintegrate(mixm, 64), threshold=med / 2)
    assert st["fraction_above"] >= 0.7
    st_floor = fiber_diameter_stats(disintegrate(mixm, 64), mass_floor=0.5)
    assert np.nanmax(st_floor["diameters"]) == 0.0


def test_apply_Asigma_cases():
    diag = sample_power_joining(IET, 0, 5000, seed=14)
    d = disintegrate(diag, 25)
    vals = apply_Asigma(d, "coord")
    centers = (np.arange(25) + 0.5) / 25
    ok = ~np.isnan(vals)
    assert np.max(np.abs(vals[ok] - centers[ok])) < 1 / 25
    prod = product_sample(60000, seed=15)
    dp = disintegrate(prod, 25)
    vp = apply_Asigma(dp, "coord")
    assert np.nanstd(vp) < 0.03
    nu2 = sample_power_joining(IET, 2, 5000, seed=16)
    d2 = disintegrate(nu2, 25)
    v2 = apply_Asigma(d2, "coord")
    from iet3.iet_core import apply_pow
    checked = 0
    for b in range(25):
        if d2.empty[b]:
            continue
        ys, _ = d2.conditional(b)
        if ys.max() - ys.min() > 2 / 25:
            continue  # bin straddles a discontinuity of the power
        expect = apply_pow(IET, 2, float(centers[b]))
        assert abs(v2[b] - expect) < 0.05
        checked += 1
    assert checked >= 10


# -- coefficients along a tower ----------------------------------------------

def test_approx_by_powers_cases(tower_iet, doc_towers):
    from iet3.towers import build_tower
    I, n = doc_towers[-1]
    tower = build_tower(tower_iet, I, n)
    nu5 = sample_power_joining(tower_iet, 5, 60000, seed=17)
    c5, _ = approx_by_powers(tower_iet, nu5, tower, bins=128)
    assert c5.dense()[5] >= 0.9
    diag = sample_power_joining(tower_iet, 0, 60000, seed=18)
    c0, e0 = approx_by_powers(tower_iet, diag, tower, bins=128)
    assert c0.dense()[0] >= 0.9
    assert e0["coord"] <= float(tower.width) + 4 / 128 + 0.05
    assert c0.total() <= 1 + 1e-12


# -- weak closure -----------------------------------------------------------

def test_weak_closure_rational_periodic():
    iet = Iet3(Fraction(1, 5), Fraction(2, 5), Fraction(2, 5), MODE_RATIONAL)
    x = Fraction(3, 1000)
    cur, p = x, 0
    for i in range(1, 5000):
        cur = apply(iet, cur)
        if cur == x:
            p = i
            break
    n, err, _ = weak_closure_check(iet, k=p, horizon=p, N=2000, seed=19)
    assert n % p == 0
    assert err < 0.05


def test_weak_closure_zero_candidate_value():
    # at n = 0 the distance is about half the mean displacement of T^k
    xs = np.linspace(0, 1, 4000, endpoint=False) + 1 / 8000
    y1 = apply(IET, xs.copy())
    mean_d = float(np.mean(np.abs(y1 - xs)))
    _, _, info = weak_closure_check(IET, k=1, horizon=3, N=4000, seed=20)
    v0 = info["scan"][0]
    assert abs(v0 - mean_d / 2) < 0.08


# -- averaging recursion ------------------------------------------------------

def test_bary_symmetric_step():
    out = bary_recursion(BaryState(d=2, gamma=[1.0, 0.0], a=0.5, b=0.5), 1)
    assert np.allclose(out["trajectory"][1], [0.5, 0.5])


def test_bary_exact_ratio():
    out = bary_recursion(BaryState(d=2, gamma=[1.0, 0.0], a=0.7, b=0.3), 16)
    assert out["gaps"][0] == 1.0
    assert out["gaps"][1] == pytest.approx(0.4, abs=1e-12)
    assert out["gaps"][2] == pytest.approx(0.16, abs=1e-12)
    assert abs(out["ratio"] - 0.4) < 1e-6
    assert out["mean_drift"] < 1e-12


def test_bary_mean_invariance():
    rng = np.random.default_rng(21)
    for _ in range(20):
        d = int(rng.integers(2, 6))
        a = float(rng.random() * 0.35 + 0.2)
        b = float(rng.random() * (0.98 - a - 0.2) + 0.2)
        st = BaryState(d=d, gamma=rng.random(d), a=a, b=b, delta=0.0)
        out = bary_recursion(st, 30)
        assert out["mean_drift"] < 1e-12
        gaps = out["gaps"]
        if d == 2:
            # exact per-pair-of-strands contraction factor |a-b|/(a+b)
            ratio_bound = 1 - 2 * min(st.a, st.b) / (st.a + st.b)
            for i in range(0, len(gaps) - d, d):
                if gaps[i] > 1e-10:
                    assert gaps[i + d] <= ratio_bound * gaps[i] + 1e-12
        else:
            # cyclic averaging still contracts over d-step windows
            for i in range(0, len(gaps) - d, d):
                if gaps[i] > 1e-10:
                    assert gaps[i + d] <= 0.9 * gaps[i] + 1e-12


# -- serialization ------------------------------------------------------------

def test_csv_round_trip():
    m = product_sample(50, seed=22)
    back = measure_from_csv(measure_to_csv(m))
    assert np.allclose(back.xs, m.xs)
    assert np.allclose(back.ys, m.ys)
    assert np.allclose(back.ws, m.ws)


# -- coefficient stability and the per-level mass surrogate -------------------

def test_coefficient_stability_on_graph_mixture(tower_iet, doc_towers):
    # along the orbit, coefficient vectors of a two-graph mixture move by at
    # most twice the conditional mass outside the doubly-refined sub-tower,
    # plus binning slack
    from iet3.towers import build_tower
    from iet3.joinings import _coefficients_from_fiber
    from iet3.iet_core import apply_pow
    I, n = doc_towers[-1]
    tower = build_tower(tower_iet, I, n)
    bins = 128
    m = mix(sample_power_joining(tower_iet, 0, 60000, seed=30),
            sample_power_joining(tower_iet, 1, 60000, seed=30))
    d = disintegrate(m, bins)
    centers = (np.arange(bins) + 0.5) / bins
    rng = np.random.default_rng(31)
    checked = 0
    for b in rng.permutation(bins)[:16]:
        if d.empty[b]:
            continue
        i = int(rng.integers(1, 50))
        xb = float(centers[b])
        xi = float(apply_pow(tower_iet, i, xb))
        b2 = min(int(xi * bins), bins - 1)
        if d.empty[b2]:
            continue
        idx1, w1, out1 = _coefficients_from_fiber(
            tower, tower_iet, d.fiber_xs[b], d.fiber_ys[b], d.fiber_ws[b])
        idx2, w2, out2 = _coefficients_from_fiber(
            tower, tower_iet, d.fiber_xs[b2], d.fiber_ys[b2], d.fiber_ws[b2])
        c1 = np.zeros(tower.height); np.add.at(c1, idx1, w1)
        c2 = np.zeros(tower.height); np.add.at(c2, idx2, w2)
        l1_gap = float(np.abs(c1 - c2).sum())
        bound = 2 * max(out1, out2) + 4 / bins + 0.12  # finite-sample slack
        assert l1_gap <= bound, (b, i, l1_gap, bound)
        checked += 1
    assert checked >= 8


def test_per_level_outside_mass_surrogate(tower_iet, doc_towers):
    # height * (average conditional mass outside the tower over one level)
    # stays below the mass outside the doubly-refined tower plus slack
    from iet3.towers import build_tower, tower_stats
    from iet3 import intervals as iv
    I, n = doc_towers[0]   # coarse tower: each level carries enough atoms
    tower = build_tower(tower_iet, I, n)
    st = tower_stats(tower, tower_iet)
    union = tower.union()
    m = sample_power_joining(tower_iet, 3, 100_000, seed=32)
    rng = np.random.default_rng(33)
    outside_tilde = 1 - st.tilde_measure
    for j in rng.permutation(tower.height)[:8]:
        lo = float(tower.level_lows[j]); hi = lo + float(tower.width)
        sel = (m.xs >= lo) & (m.xs < hi)
        if sel.sum() < 30:
            continue
        frac_out = np.mean([0.0 if iv.contains_point(union, float(y)) else 1.0
                            for y in m.ys[sel]])
        slack = 4 / math.sqrt(sel.sum())
        assert tower.height * frac_out * float(tower.width) <= outside_tilde + slack + 0.05
