"""Tower certification, statistics, and the documented tower chain."""

from fractions import Fraction

import numpy as np
import pytest

from iet3.arith import MODE_RATIONAL
from iet3.iet_core import Iet3, apply, apply_pow
from iet3.towers import (LevelSplitError, TowerBuildError, build_tower,
                         tower_stats)

RATIONAL = Iet3(Fraction(1, 5), Fraction(2, 5), Fraction(2, 5), MODE_RATIONAL)


def _period(iet, x, cap=10000):
    cur = x
    for i in range(1, cap):
        cur = apply(iet, cur)
        if cur == x:
            return i
    raise AssertionError("no period found")


def test_rational_periodic_tower():
    p = _period(RATIONAL, Fraction(1, 50))
    J = (Fraction(0), Fraction(1, 100))
    tower = build_tower(RATIONAL, J, p)
    # exact periodicity: the p-th image is the base again
    top = tower.level_lows[-1]
    nxt = apply(RATIONAL, Fraction(int(round(top * 10**12)), 10**12)
                if not isinstance(top, Fraction) else top)
    st = tower_stats(tower, RATIONAL)
    assert st.rigidity == pytest.approx(0.0, abs=1e-12)
    assert st.hat_measure == pytest.approx(st.coverage, abs=1e-12)
    assert st.coverage <= 1 + 1e-12


def test_pigeonhole_error():
    with pytest.raises(TowerBuildError):
        build_tower(Iet3(0.2, 0.3, 0.5), (0.0, 0.5), 3)


def test_split_error_reports_level():
    iet = Iet3(0.2, 0.3, 0.5)
    try:
        build_tower(iet, (0.15, 0.25), 2)
    except LevelSplitError as e:
        assert e.level == 0
    else:
        raise AssertionError("expected a split error")


def test_documented_chain_monotone(doc_towers, tower_iet):
    assert 1 <= len(doc_towers) <= 20
    stats = []
    for I, n in doc_towers:
        tower = build_tower(tower_iet, I, n)
        stats.append(tower_stats(tower, tower_iet))
    covs = [s.coverage for s in stats]
    rigs = [s.rigidity for s in stats]
    assert all(b >= a for a, b in zip(covs, covs[1:]))
    assert any(r < 0.05 for r in rigs)
    for s in stats:
        assert s.tilde_measure <= s.hat_measure + 1e-12
        assert s.hat_measure <= s.coverage + 1e-12


def test_documented_best_tower_quality(doc_towers, tower_iet):
    I, n = doc_towers[-1]
    st = tower_stats(build_tower(tower_iet, I, n), tower_iet)
    assert st.coverage > 0.9
    assert st.rigidity < 0.05


def test_hat_membership_spot_check(doc_towers, tower_iet):
    # points of the refined sub-tower stay in the tower for |i| < height
    I, n = doc_towers[0]
    tower = build_tower(tower_iet, I, n)
    st = tower_stats(tower, tower_iet)
    assert st.hat_measure > 0
    rng = np.random.default_rng(0)
    union = tower.union()
    from iet3 import intervals as iv

    def in_tower(x):
        return iv.contains_point(union, x)

    hits = 0
    for _ in range(200):
        x = float(rng.random())
        lvl = tower.level_of_point(x)
        if lvl is None:
            continue
        i = int(rng.integers(-(n - 1), n))
        y = apply_pow(tower_iet, i, x)
        # membership can only fail for the hat-complement dust
        if in_tower(float(y)):
            hits += 1
    assert hits >= 150


def test_level_lookup():
    iet = Iet3(0.2, 0.3, 0.5)
    tower = build_tower(iet, (0.0, 0.01), 5)
    for i in range(5):
        lo = float(tower.level_lows[i])
        assert tower.level_of_point(lo + 0.005) == i
    assert tower.level_of_point(0.999) is None
