"""Marked flat tori and renormalization of 3-IETs.

A 3-IET embeds as a slit on the torus R^2 / [[1,-alpha],[0,1]] Z^2 with two
marked points |K| apart on a horizontal.  The diagonal flow g_t = diag(e^t,
e^-t) renormalizes the vertical dynamics; times where the flowed torus is
nearly the half-marked square torus and lies in the section (the time-1
vertical return lands on the same horizontal, displaced by at most 1/2) are
where the tower/switch constructions operate.

Admissible times turn out to be exactly t = ln N for integers N whose
rotation multiple N*alpha is close to an integer; the scan enumerates such N
from continued-fraction data and from a grid of flow times refined into the
section, and evaluates each candidate with exact integer arithmetic (floats
cannot resolve the lattice residuals at deep scales).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .arith import RotationCounter, cf_convergents, cf_expansion
from .iet_core import Iet3, to_rotation

__all__ = [
    "MarkedTorus",
    "RenormTime",
    "RenormScan",
    "FlowRangeError",
    "NoAdjustmentError",
    "DegenerateRotationError",
    "torus_of_iet",
    "apply_gt",
    "reduce",
    "dist_to_hat",
    "vertical_return_offset",
    "crossing_count",
    "rho_of",
    "find_renorm_times",
    "scan_renorm_times",
]

# weights of the component terms in the distance to the half-marked square
# torus.  The basis-shape term and the vertical marked offset are weighted
# below the horizontal marked offset: the horizontal offset drives the
# crossing fractions of the construction, while a vertical offset only
# lengthens the vertical closing segment, which vertical trajectories never
# cross.  Any fixed positive weights give a proper gauge on the quotient
# (zero exactly on the half-marked square torus); these are calibrated so
# that usable windows of typical parameters sit at comparable scales.
BASIS_WEIGHT = 0.5
VERT_MARK_WEIGHT = 0.4

SECTION_V2_TOL = 1e-9


class FlowRangeError(ValueError):
    """|t| too large for diag(e^t, e^-t) in binary64."""


class NoAdjustmentError(ValueError):
    """No g_s time can put the torus in the section (v2 >= 1)."""


class DegenerateRotationError(ValueError):
    """The time-1 vertical return is the identity (rational closing)."""


@dataclass(frozen=True, eq=False)
class MarkedTorus:
    """Unit-covolume lattice basis (columns) plus marked-point offset."""

    basis: np.ndarray
    marked: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float).reshape(2, 2)
        m = np.asarray(self.marked, dtype=float).reshape(2)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "marked", m)
        if abs(abs(np.linalg.det(b)) - 1.0) > 1e-9:
            raise ValueError("basis must have |det| = 1")


@dataclass(frozen=True)
class RenormTime:
    """An accepted renormalization time t = ln(n_steps) in the section."""

    t: float
    dist_hat: float
    in_S: bool
    v_offset: tuple[float, float]
    m: int
    rho: float
    V_len: float
    n_steps: int
    m_fractions: tuple[float, float] = (0.0, 0.0)  # sample fractions of m, m+1


@dataclass(frozen=True)
class RenormScan:
    """Full scan output: accepted times plus per-candidate rejections."""

    times: list[RenormTime]
    rejections: list[tuple[float, str]] = field(default_factory=list)


def torus_of_iet(iet: Iet3) -> MarkedTorus:
    """The marked torus carrying the IET's rotation suspension."""
    rep = to_rotation(iet)
    a, k = float(rep.alpha), float(rep.kappa)
    return MarkedTorus(basis=np.array([[1.0, -a], [0.0, 1.0]]),
                       marked=np.array([k, 0.0]))


def apply_gt(torus: MarkedTorus, t: float) -> MarkedTorus:
    """Apply the diagonal flow diag(e^t, e^-t) to basis and marked point."""
    if abs(t) > 500:
        raise FlowRangeError(f"flow time {t} overflows binary64")
    g = np.array([[math.exp(t), 0.0], [0.0, math.exp(-t)]])
    return MarkedTorus(basis=g @ torus.basis, marked=g @ torus.marked)


def reduce(torus: MarkedTorus) -> MarkedTorus:
    """Lagrange-Gauss reduce the basis; move marked into the centered
    fundamental parallelogram.  Represents the same marked torus."""
    b1 = torus.basis[:, 0].copy()
    b2 = torus.basis[:, 1].copy()
    if b1 @ b1 > b2 @ b2:
        b1, b2 = b2, b1
    for _ in range(256):
        mu = round((b1 @ b2) / (b1 @ b1))
        b2 = b2 - mu * b1
        if b2 @ b2 >= b1 @ b1:
            break
        b1, b2 = b2, b1
    B = np.column_stack([b1, b2])
    coeffs = np.linalg.solve(B, torus.marked)
    w = torus.marked - B @ np.round(coeffs)
    return MarkedTorus(basis=B, marked=w)


_SQUARE_BASES = [np.array(m, dtype=float) for m in (
    [[1, 0], [0, 1]], [[-1, 0], [0, -1]], [[1, 0], [0, -1]], [[-1, 0], [0, 1]],
    [[0, 1], [1, 0]], [[0, -1], [-1, 0]], [[0, 1], [-1, 0]], [[0, -1], [1, 0]],
)]


def _basis_term(B_red: np.ndarray) -> float:
    return min(float(np.linalg.norm(B_red - S)) for S in _SQUARE_BASES)


def _marked_term(w_red: np.ndarray) -> float:
    best = math.inf
    for kx in range(-3, 4):
        for ky in range(-3, 4):
            for sx in (0.5, -0.5):
                d = max(abs(w_red[0] - sx - kx),
                        VERT_MARK_WEIGHT * abs(w_red[1] - ky))
                best = min(best, d)
    return best


def dist_to_hat(torus: MarkedTorus) -> float:
    """Distance to the square torus with marked points 1/2 apart on a
    horizontal: max of a (weighted) basis-shape term over the 8 square
    symmetries and the marked-offset distance to the nearest half-point."""
    red = reduce(torus)
    return max(BASIS_WEIGHT * _basis_term(red.basis), _marked_term(red.marked))


def _nearest_lattice_vector(B: np.ndarray, target: np.ndarray) -> np.ndarray:
    c = np.linalg.solve(B, target)
    best, best_d = None, math.inf
    for di in range(-2, 3):
        for dj in range(-2, 3):
            k = np.array([round(c[0]) + di, round(c[1]) + dj], dtype=float)
            v = B @ k
            d = float(np.linalg.norm(v - target))
            if d < best_d:
                best_d, best = d, v
    return best


def vertical_return_offset(torus: MarkedTorus) -> tuple[float, float, float]:
    """Offset (v1, v2) of the time-1 vertical flow modulo the lattice, and
    the closed-form section-adjustment time s_adjust = -ln(1 - v2).

    Note: on our flow convention the g time that actually zeroes v2 is
    ln(1 - v2) = -s_adjust; the scan below uses that sign.
    """
    lam = _nearest_lattice_vector(torus.basis, np.array([0.0, 1.0]))
    v = np.array([0.0, 1.0]) - lam
    v1, v2 = float(v[0]), float(v[1])
    if v2 >= 1.0:
        raise NoAdjustmentError(f"v2 = {v2} >= 1, no section adjustment")
    return v1, v2, -math.log1p(-v2)


def crossing_count(iet: Iet3, t: float, x: float) -> int:
    """Crossings of the slit by a vertical segment of length e^t from the
    rotation-circle point x in [0, kappa): visits at heights 1..floor(e^t)."""
    rep = to_rotation(iet)
    a, k = float(rep.alpha), float(rep.kappa)
    if not (0 <= x < k):
        raise ValueError(f"x = {x} outside the slit [0, {k})")
    M = int(math.floor(math.exp(t)))
    if M <= 0:
        return 0
    if M <= 100_000:
        pts = (x + a * np.arange(1, M + 1)) % 1.0
        return int(np.count_nonzero(pts < k))
    rc = iet.rotation_counter()
    return int(rc.visits(rc.lift([x]), np.array([M], dtype=object))[0])


def _crossing_samples(iet: Iet3, n_steps: int, samples: int = 128,
                      rc: Optional[RotationCounter] = None,
                      seed: int = 1301) -> np.ndarray:
    """Crossing counts at a jittered stratified grid of slit points.

    Jitter breaks resonance between the sample grid and the near-rational
    cell structure at section times, which would otherwise alias the counts.
    """
    rep = to_rotation(iet)
    k = float(rep.kappa)
    jit = np.random.default_rng(seed).random(samples)
    xs = (np.arange(samples) + jit) / samples * k
    if rc is None:
        rc = iet.rotation_counter()
    counts = rc.visits(rc.lift(xs), np.full(samples, n_steps, dtype=object))
    return np.array([int(c) for c in counts])


def _generic_crossing_pair(counts: np.ndarray) -> tuple[int, float, float]:
    """The dominant pair (m, m+1) and their sample fractions."""
    vals, freq = np.unique(counts, return_counts=True)
    best_m, best_w = int(vals[0]), -1.0
    for v in vals:
        w = freq[vals == v].sum() + freq[vals == v + 1].sum()
        if w > best_w:
            best_w, best_m = float(w), int(v)
    n = len(counts)
    f_m = float(np.count_nonzero(counts == best_m)) / n
    f_m1 = float(np.count_nonzero(counts == best_m + 1)) / n
    return best_m, f_m, f_m1


def rho_of(iet: Iet3, t: float, tol: float = 1e-6) -> float:
    """Horizontal displacement of the time-1 vertical return on g_t(omega_T).

    Requires the flowed torus to lie in the section within tolerance; a zero
    displacement (rational closing) is degenerate.
    """
    torus = apply_gt(torus_of_iet(iet), t)
    v1, v2, _ = vertical_return_offset(torus)
    if abs(v2) > tol:
        raise ValueError(f"g_t torus not in section: v2 = {v2}")
    if iet.is_rational():
        rc = iet.rotation_counter()
        N = round(math.exp(t))
        if abs(math.exp(t) - N) < tol and (N * rc.P) % rc.Q == 0:
            raise DegenerateRotationError("time-1 return closes up exactly")
    if v1 == 0.0:
        raise DegenerateRotationError("time-1 return closes up; rotation is rational")
    return abs(v1)


# ---------------------------------------------------------------------------
# exact candidate evaluation
# ---------------------------------------------------------------------------

def _signed_mod(a: int, q: int) -> int:
    """Representative of a mod q in (-q/2, q/2]."""
    r = a % q
    return r - q if 2 * r > q else r


def _lagrange_int(u, v, norm) -> tuple:
    """Lagrange reduction of an integer lattice basis under a scaled norm.

    Vectors stay as integer pairs; only norms and dot products go through
    the scaled float embedding, so deep-scale cancellation costs nothing.
    """
    def sdot(a, b):
        return (norm((a[0] + b[0], a[1] + b[1]))**2 - norm(a)**2 - norm(b)**2) / 2

    if norm(u) > norm(v):
        u, v = v, u
    for _ in range(512):
        nu2 = norm(u)**2
        if nu2 == 0:
            break
        mu = round(sdot(u, v) / nu2)
        v = (v[0] - mu * u[0], v[1] - mu * u[1])
        if norm(v)**2 >= nu2:
            break
        u, v = v, u
    return u, v


@dataclass(frozen=True)
class _SectionRecord:
    n_steps: int
    rho: float            # |v1|, horizontal displacement of the unit return
    v1: float             # signed
    basis: np.ndarray     # exact reduced basis of the flowed lattice
    w_red: np.ndarray     # reduced marked offset
    basis_term: float
    marked_term: float
    dist_hat: float
    V_len: float
    w2: float


def section_record_exact(P: int, Q: int, C: int, N: int) -> _SectionRecord:
    """Evaluate the flowed torus at t = ln N with integer arithmetic.

    The lattice of g_{ln N} omega_T is {((bP - aQ) N/Q, b/N)}; entries are
    computed from integer residues so that cancellations at deep scales cost
    no precision.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    sN = _signed_mod(N * P, Q)
    v1 = -sN * N / Q  # displacement = (0,1) - ((N alpha - round) N, 1)
    rho = abs(v1)

    def norm(w):
        return math.hypot(w[1] * N / Q, w[0] / N)

    # integer coords (b, s) with s = b P - a Q; scaled embedding
    u, v = _lagrange_int((1, P % Q), (0, Q), norm)

    def embed(w):
        return np.array([w[1] * N / Q, w[0] / N])

    B = np.column_stack([embed(u), embed(v)])
    bt = _basis_term(B)

    # marked offset: w - lattice = ((C + bP - aQ) N/Q, -b/N); CVP for the
    # representative nearest the half-marked targets.  Residual coordinates
    # are (s, b) with s = C + bP - aQ; the lattice part is {(bP - aQ, -b)}.
    def norm2(w):
        return math.hypot(w[0] * N / Q, w[1] / N)

    lu, lv = _lagrange_int((P % Q, -1), (Q, 0), norm2)
    # start from (C, 0), reduce by rounding coefficients in the reduced
    # basis; Cramer in exact integers since entries overflow floats
    det = lu[0] * lv[1] - lv[0] * lu[1]
    if det != 0:
        coef = ((-C) * lv[1] / det, C * lu[1] / det)
    else:
        coef = (0.0, 0.0)
    best = None
    for di in range(-3, 4):
        for dj in range(-3, 4):
            ci, cj = round(coef[0]) + di, round(coef[1]) + dj
            s = C + ci * lu[0] + cj * lv[0]
            b = ci * lu[1] + cj * lv[1]
            w = np.array([s * N / Q, b / N])
            d = _marked_term(w)
            if best is None or d < best[0]:
                best = (d, w)
    mt, w_red = best
    # operational closing-segment length: the exact sample fraction of the
    # lower crossing count, frac(N (1 - kappa)); equals the geometric length
    # of the closing segment up to O(rho)
    v_len = ((N * (Q - C)) % Q) / Q
    dist = max(BASIS_WEIGHT * bt, mt)
    return _SectionRecord(n_steps=N, rho=rho, v1=v1, basis=B, w_red=w_red,
                          basis_term=bt, marked_term=mt, dist_hat=dist,
                          V_len=v_len, w2=float(w_red[1]))


def _candidate_steps(iet: Iet3, t_max: float, grid_step: float) -> tuple[list[int], list[tuple[float, str]]]:
    """Candidate integer step counts: continued-fraction denominators with
    small multiples, plus grid times refined into the section."""
    rep = to_rotation(iet)
    alpha = float(rep.alpha)
    n_cap = int(math.exp(min(t_max, 80.0)))
    cands: set[int] = set()
    rejections: list[tuple[float, str]] = []
    for _, q in cf_convergents(cf_expansion(rep.alpha if iet.is_rational() else alpha)):
        if q > n_cap:
            break
        for k in range(1, 7):
            if 2 <= k * q <= n_cap:
                cands.add(k * q)
    torus0 = torus_of_iet(iet)
    t = grid_step
    while t <= min(t_max, math.log(1e15)):
        torus = apply_gt(torus0, t)
        try:
            lam = _nearest_lattice_vector(torus.basis, np.array([0.0, 1.0]))
        except np.linalg.LinAlgError:
            rejections.append((t, "singular basis"))
            t += grid_step
            continue
        # the step count is the height of lam in unflowed coordinates
        b = int(round(lam[1] * math.exp(t)))
        if b >= 2 and b <= n_cap:
            cands.add(b)
        else:
            rejections.append((t, f"no unit-height lattice vector (b={b})"))
        t += grid_step
    return sorted(cands), rejections


def scan_renorm_times(iet: Iet3, delta: float, t_max: float,
                      grid_step: float = 0.01, rho_max: Optional[float] = None,
                      dichotomy_samples: int = 128,
                      with_dichotomy: bool = True) -> RenormScan:
    """Scan for renormalization times: near the half-marked square torus
    (dist < delta) and in the section.  Returns accepted times ascending
    plus rejection diagnostics."""
    rc = iet.rotation_counter()
    P, Q, C = rc.P, rc.Q, rc.C
    cands, rejections = _candidate_steps(iet, t_max, grid_step)
    # cheap pre-filter on the exact unit-return displacement (one bigint
    # multiply per candidate); candidates far from the section cannot be
    # adjusted into it, and the full record evaluation is much costlier
    kept = []
    for N in cands:
        r = _signed_mod(N * P, Q)
        if N * abs(r) > 0.75 * Q:
            rejections.append((math.log(N), f"N={N} far from section"))
            continue
        kept.append(N)
    times = []
    for N in kept:
        t = math.log(N)
        if t > t_max:
            rejections.append((t, f"N={N} beyond t_max"))
            continue
        rec = section_record_exact(P, Q, C, N)
        if rec.rho == 0.0:
            rejections.append((t, f"N={N} rotation closes up (rational)"))
            continue
        if rec.rho > 0.5 + SECTION_V2_TOL:
            rejections.append((t, f"N={N} not in section (|v1|={rec.rho:.3g} > 1/2)"))
            continue
        if rho_max is not None and rec.rho > rho_max:
            rejections.append((t, f"N={N} rho={rec.rho:.3g} > rho_max"))
            continue
        if rec.dist_hat >= delta:
            rejections.append((t, f"N={N} dist_hat={rec.dist_hat:.3g} >= delta"))
            continue
        if with_dichotomy:
            counts = _crossing_samples(iet, N, dichotomy_samples, rc=rc)
            m, f_m, f_m1 = _generic_crossing_pair(counts)
        else:
            m, f_m, f_m1 = 0, 0.0, 0.0
        times.append(RenormTime(t=t, dist_hat=rec.dist_hat, in_S=True,
                                v_offset=(rec.v1, 0.0), m=m, rho=rec.rho,
                                V_len=rec.V_len, n_steps=N,
                                m_fractions=(f_m, f_m1)))
    times.sort(key=lambda r: r.t)
    return RenormScan(times=times, rejections=rejections)


def find_renorm_times(iet: Iet3, delta: float, t_max: float,
                      grid_step: float = 0.01) -> list[RenormTime]:
    """Renormalization times with dist_to_hat < delta, in the section."""
    return scan_renorm_times(iet, delta, t_max, grid_step=grid_step).times
