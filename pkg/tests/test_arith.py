"""Exact counting kernels against brute force."""

import numpy as np
from fractions import Fraction

from iet3.arith import (RotationCounter, cf_convergents, cf_expansion,
                        cf_to_fraction, float_to_convergent, floor_sum,
                        floor_sum_vec)


def test_floor_sum_brute():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(0, 200))
        m = int(rng.integers(1, 500))
        a = int(rng.integers(0, 2000))
        b = int(rng.integers(0, 2000))
        assert floor_sum(n, m, a, b) == sum((a + b * i) // m for i in range(n))


def test_floor_sum_vec_matches_scalar():
    rng = np.random.default_rng(2)
    ns = rng.integers(0, 500, size=64)
    offs = rng.integers(0, 10**6, size=64)
    m, b = 999_983, 314_159
    out = floor_sum_vec(ns.astype(object), m, offs.astype(object), b)
    for i in range(64):
        assert out[i] == floor_sum(int(ns[i]), m, int(offs[i]), b)


def test_floor_sum_vec_bigint():
    Q = 10**24 + 7
    P = 6180339887498948482045868
    offs = np.array([123, Q - 5, Q // 3], dtype=object)
    n = 10**13
    out = floor_sum_vec(np.full(3, n, dtype=object), Q, offs, P)
    # spot check against the closed form through a smaller equivalent range
    for i, a in enumerate(offs):
        direct = floor_sum(n, Q, int(a), P)
        assert out[i] == direct


def test_cf_round_trip():
    x = Fraction(355, 113)
    digits = cf_expansion(x)
    assert cf_to_fraction(digits) == x
    ps = list(cf_convergents([0, 1, 1, 1, 1, 1, 1]))
    assert ps[-1][0] * 13 == ps[-1][1] * 8  # 8/13 convergent of 1/phi


def test_float_to_convergent_accuracy():
    import math
    g = (math.sqrt(5) - 1) / 2
    fr = float_to_convergent(g, q_min=10**10)
    assert abs(float(fr) - g) < 1e-15
    assert fr.denominator >= 10**10


def _brute_visits(u, P, Q, C, n):
    return sum(1 for l in range(1, n + 1) if (u + l * P) % Q < C)


def test_visits_and_psi_brute():
    rc = RotationCounter(P=314159, Q=1000003, C=875000)
    rng = np.random.default_rng(3)
    us = rng.integers(0, rc.Q, size=20).astype(object)
    ns = rng.integers(0, 3000, size=20).astype(object)
    got = rc.visits(us, ns)
    for u, n, g in zip(us, ns, got):
        assert int(g) == _brute_visits(int(u), rc.P, rc.Q, rc.C, int(n))
    # psi counts l = 0..n-1 including the starting point
    psi = rc.psi(us, ns)
    for u, n, g in zip(us, ns, psi):
        brute = sum(1 for l in range(int(n)) if (int(u) + l * rc.P) % rc.Q < rc.C)
        assert int(g) == brute


def test_visit_time_minimal():
    rc = RotationCounter(P=314159, Q=1000003, C=875000)
    rng = np.random.default_rng(4)
    us = rng.integers(0, rc.Q, size=12).astype(object)
    ns = rng.integers(1, 500, size=12).astype(object)
    ts = rc.visit_time(us, ns)
    for u, n, t in zip(us, ns, ts):
        t, n = int(t), int(n)
        assert _brute_visits(int(u), rc.P, rc.Q, rc.C, t) == n
        assert _brute_visits(int(u), rc.P, rc.Q, rc.C, t - 1) == n - 1


def test_visit_time_sparse_arc():
    # sparse arc exercises the bisection fallback
    rc = RotationCounter(P=314159, Q=1000003, C=97)
    us = np.array([5, 700000], dtype=object)
    ts = rc.visit_time(us, np.array([1, 2], dtype=object))
    for u, n, t in zip(us, [1, 2], ts):
        assert _brute_visits(int(u), rc.P, rc.Q, rc.C, int(t)) == n
        assert _brute_visits(int(u), rc.P, rc.Q, rc.C, int(t) - 1) == n - 1


def test_first_hit_brute():
    rc = RotationCounter(P=314159, Q=1000003, C=400)
    rng = np.random.default_rng(5)
    us = rng.integers(0, rc.Q, size=10).astype(object)
    horizon = 20000
    got = rc.first_hit(us, np.full(10, horizon, dtype=object))
    for u, g in zip(us, got):
        brute = next((l for l in range(1, horizon + 1)
                      if (int(u) + l * rc.P) % rc.Q < rc.C), horizon + 1)
        assert int(g) == brute


def test_backward_counting():
    rc = RotationCounter(P=314159, Q=1000003, C=875000)
    back = rc.backward()
    u = 123456
    got = int(back.visits(np.array([u], dtype=object), np.array([777], dtype=object))[0])
    brute = sum(1 for l in range(1, 778) if (u - l * rc.P) % rc.Q < rc.C)
    assert got == brute
