"""Core exchange map: worked examples, round trips, and invariants."""

import math
from fractions import Fraction

import numpy as np
import pytest

from iet3 import intervals as iv_mod
from iet3.iet_core import (Iet3, OrbitSegment, RotationRep, apply, apply_pow,
                           apply_pow_many, from_rotation, min_return_time,
                           orbit, psi_count, to_rotation)
from iet3.arith import MODE_RATIONAL


IET = Iet3(0.2, 0.3, 0.5)


def test_apply_branches():
    assert apply(IET, 0.1) == pytest.approx(0.9, abs=1e-15)
    assert apply(IET, 0.25) == pytest.approx(0.55, abs=1e-15)
    assert apply(IET, 0.7) == pytest.approx(0.2, abs=1e-15)


def test_apply_domain_error():
    with pytest.raises(ValueError):
        apply(IET, 1.0)
    with pytest.raises(ValueError):
        apply(IET, -0.1)


def test_apply_pow_identity_and_two_steps():
    assert apply_pow(IET, 0, 0.37) == 0.37
    assert apply_pow(IET, 2, 0.1) == pytest.approx(0.4, abs=1e-15)


def test_apply_pow_round_trip_binary64():
    rng = np.random.default_rng(0)
    iet = Iet3(0.31, 0.17, 0.52)
    x = float(rng.random())
    y = apply_pow_many(iet, 10**6, np.array([x]))[0]
    back = apply_pow_many(iet, -10**6, np.array([y]))[0]
    assert abs(back - x) < 1e-9


def test_apply_pow_round_trip_rational():
    iet = Iet3(Fraction(1, 5), Fraction(3, 10), Fraction(1, 2), MODE_RATIONAL)
    x = Fraction(1, 7)
    y = apply_pow(iet, 1000, x)
    assert apply_pow(iet, -1000, y) == x


def test_rotation_correspondence_values():
    rep = to_rotation(IET)
    assert rep.alpha == pytest.approx(0.8 / 1.3, abs=1e-15)
    assert rep.kappa == pytest.approx(1 / 1.3, abs=1e-15)
    back = from_rotation(rep)
    assert back.l1 == pytest.approx(0.2, abs=1e-12)
    assert back.l2 == pytest.approx(0.3, abs=1e-12)
    assert back.l3 == pytest.approx(0.5, abs=1e-12)


def test_rotation_degenerate_two_interval():
    iet = Iet3(0.5, 0.0, 0.5)
    rep = to_rotation(iet)
    assert rep.alpha == pytest.approx(0.5)
    assert rep.kappa == pytest.approx(1.0)


def test_from_rotation_precondition():
    with pytest.raises(ValueError):
        from_rotation(RotationRep(alpha=0.6, kappa=0.5))


def test_from_rotation_first_return_oracle():
    # the exchange must equal the rescaled first return of the rotation
    alpha = (math.sqrt(5) - 1) / 2
    kappa = 0.9
    iet = from_rotation(RotationRep(alpha, kappa))
    rng = np.random.default_rng(1)
    for x in rng.random(200):
        z = x * kappa
        # brute-force first return of the rotation to [0, kappa)
        y = (z + alpha) % 1.0
        while y >= kappa:
            y = (y + alpha) % 1.0
        assert apply(iet, float(x)) == pytest.approx(y / kappa, abs=1e-12)


def test_psi_count_examples():
    rep = RotationRep(alpha=0.25, kappa=0.6)
    assert psi_count(rep, 0.0, 4) == 3
    assert psi_count(rep, 0.3, 0) == 0
    # golden brute-force oracle
    g = RotationRep(alpha=(math.sqrt(5) - 1) / 2, kappa=0.7)
    count = psi_count(g, 0.1, 1000)
    brute = sum(1 for l in range(1000) if (0.1 + l * g.alpha) % 1.0 < 0.7)
    assert count == brute


def test_min_return_full_space():
    assert min_return_time(IET, (0.0, 1.0), 5) == 1


def test_min_return_rational_period():
    iet = Iet3(Fraction(1, 5), Fraction(2, 5), Fraction(2, 5), MODE_RATIONAL)
    # brute-force the period of a point, returns must come within it
    x = Fraction(1, 11)
    seen = x
    period = 0
    for i in range(1, 2000):
        seen = apply(iet, seen)
        if seen == x:
            period = i
            break
    assert period > 0
    J = (Fraction(1, 50), Fraction(1, 25))
    r = min_return_time(iet, J, period + 1)
    assert r is not None and r <= period


def test_orbit_segment_contract():
    seg = orbit(IET, 0.1, 50)
    assert isinstance(seg, OrbitSegment)
    for i in range(49):
        assert seg.points[i + 1] == pytest.approx(apply(IET, float(seg.points[i])),
                                                  abs=1e-14)


def test_measure_preservation_by_branch_inversion():
    # lambda(T^-1 [a,b)) = b - a, preimages computed per branch
    rng = np.random.default_rng(2)
    d1, d2, d3 = IET.branch_displacements()
    branches = [((0.0, IET.b1), d1), ((IET.b1, IET.b2), d2), ((IET.b2, 1.0), d3)]
    for _ in range(1000):
        a, b = np.sort(rng.random(2))
        if b - a < 1e-9:
            continue
        total = 0.0
        for (lo, hi), d in branches:
            ia, ib = max(lo + d, a), min(hi + d, b)
            if ib > ia:
                total += ib - ia
        assert abs(total - (b - a)) < 1e-12


def test_bijectivity_partition():
    d1, d2, d3 = IET.branch_displacements()
    images = [(0.0 + d1, IET.b1 + d1), (IET.b1 + d2, IET.b2 + d2),
              (IET.b2 + d3, 1.0 + d3)]
    merged = iv_mod.normalize(images)
    assert len(merged) == 1
    assert merged[0][0] == pytest.approx(0.0, abs=1e-15)
    assert merged[0][1] == pytest.approx(1.0, abs=1e-15)


def test_rotation_consistency_random_ensemble():
    # rescaled T^(psi_M(x)) x = R^M x whenever both ends visit the slit
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(300):
        ls = rng.random(3) + 0.05
        iet = Iet3(*[float(v) for v in ls])
        rep = to_rotation(iet)
        a, k = float(rep.alpha), float(rep.kappa)
        x = float(rng.random()) * k
        M = int(rng.integers(1, 2000))
        xM = (x + M * a) % 1.0
        if xM >= k:
            continue
        psi = psi_count(rep, x, M)
        y = apply_pow(iet, psi, x / k) * k
        assert abs(y - xM) < 1e-9
        checked += 1
    assert checked > 100


def test_power_composition():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(-300, 300))
        m = int(rng.integers(-300, 300))
        x = float(rng.random())
        one = apply_pow(IET, n + m, x)
        two = apply_pow(IET, n, apply_pow(IET, m, x))
        assert abs(one - two) < 1e-10


def test_json_round_trip():
    s = IET.to_json()
    back = Iet3.from_json(s)
    assert back.l1 == pytest.approx(IET.l1, abs=1e-16)


def test_rational_mode_requires_fractions():
    with pytest.raises(TypeError):
        Iet3(0.2, 0.3, 0.5, MODE_RATIONAL)
