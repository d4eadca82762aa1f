"""Half-open interval sets on [0, 1) (or on a circle of unit length).

Small exact toolkit used by the tower and construction modules: unions keep
sorted disjoint [a, b) pieces and support intersection, complement, measure
and translation mod 1.  Works with floats or Fractions.
"""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

Interval = Tuple[float, float]

__all__ = ["normalize", "measure", "intersect", "complement", "union",
           "translate_mod1", "contains_point", "symdiff_measure"]


def normalize(pieces: Iterable[Interval]) -> List[Interval]:
    """Sort, drop empties, merge touching/overlapping pieces."""
    ps = sorted((a, b) for a, b in pieces if b > a)
    out: List[Interval] = []
    for a, b in ps:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


def measure(pieces: Sequence[Interval]):
    return sum((b - a for a, b in pieces), start=type(pieces[0][0])(0)) if pieces else 0.0


def intersect(xs: Sequence[Interval], ys: Sequence[Interval]) -> List[Interval]:
    xs, ys = normalize(xs), normalize(ys)
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        a = max(xs[i][0], ys[j][0])
        b = min(xs[i][1], ys[j][1])
        if b > a:
            out.append((a, b))
        if xs[i][1] <= ys[j][1]:
            i += 1
        else:
            j += 1
    return out


def complement(xs: Sequence[Interval], lo=0.0, hi=1.0) -> List[Interval]:
    xs = normalize(xs)
    out = []
    cur = lo
    for a, b in xs:
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if hi > cur:
        out.append((cur, hi))
    return out


def union(xs: Sequence[Interval], ys: Sequence[Interval]) -> List[Interval]:
    return normalize(list(xs) + list(ys))


def translate_mod1(xs: Sequence[Interval], t) -> List[Interval]:
    """Translate every piece by t on the unit circle, splitting at the wrap."""
    out = []
    for a, b in xs:
        a2, b2 = a + t, b + t
        a2 -= int(a2) if a2 >= 0 else int(a2) - 1
        width = b - a
        b2 = a2 + width
        if b2 <= 1:
            out.append((a2, b2))
        else:
            out.append((a2, type(a2)(1)))
            out.append((type(a2)(0), b2 - 1))
    return normalize(out)


def contains_point(xs: Sequence[Interval], x) -> bool:
    for a, b in xs:
        if a <= x < b:
            return True
    return False


def symdiff_measure(xs: Sequence[Interval], ys: Sequence[Interval]):
    """Measure of the symmetric difference."""
    inter = intersect(xs, ys)
    mi = measure(inter) if inter else 0
    mx = measure(normalize(xs)) if xs else 0
    my = measure(normalize(ys)) if ys else 0
    return mx + my - 2 * mi
