"""The map p from the torus quotient of CP^3 to D, and the rectangle R.

Two independent routes compute p = (v-, v+, r-, r+):

* conjugation: sigma = g^{-1} xi g for the section g, read the Lax layout
  off the quaternionic entries of sigma;
* closed form: polynomials in the torus invariants f1, f2, f4, f5.

u = (H2, 64 C^2) sends D onto the rectangle R bounded by

    l1: H2 + 64C^2 = A,   l2: H2 - 64C^2 = A,
    l3: H2 + 64C^2 = B,   l4: H2 = 64C^2,

with A = 16(k^2 - m^2)^2, B = 16(k^2 + m^2)^2.  The vertex l1 ∩ l2 = (A, 0)
is not in the image.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cp3 import CP3Point, SINGULAR_LINES, WeightPair, _section_c4, invariants_array
from .quat import embed_pairs, pair_mul
from .toda import TodaParams, TodaState, conserved_array

SET_TOL = 1e-10
CLASSIFY_TOL = 1e-8
DEN_TOL = 1e-12
MU_TOL = 1e-9
# v- = QUADRIC_SCALE |k Z0 Z1 + m Z2 Z3|^2, fitted in scripts/calibrate_constants.py
QUADRIC_SCALE = 4.0


@dataclass(frozen=True)
class DPoint:
    v_minus: float
    v_plus: float
    r_minus: float
    r_plus: float
    h: float
    mu: float
    in_D: bool

    @property
    def state(self) -> TodaState:
        return TodaState(self.v_minus, self.v_plus, self.r_minus, self.r_plus)

    @property
    def C2(self) -> float:
        return self.h * math.sqrt(max(self.v_minus * self.v_plus, 0.0))

    def params(self, w: Optional[WeightPair] = None) -> TodaParams:
        return TodaParams.from_c2(self.C2, min(1.0, max(-1.0, self.mu)), w)

    def as_array(self) -> np.ndarray:
        return np.array([self.v_minus, self.v_plus, self.r_minus, self.r_plus])


def _mu_from(h2, c2, w: WeightPair):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(c2 > 0, (w.rect_a - h2) / (64.0 * c2), np.nan)


def _finish(v, h, w: WeightPair) -> dict[str, np.ndarray]:
    """Attach H1, H2, C2, mu and the D-flag to raw (n, 4) p-values."""
    vm, vp = v[:, 0], v[:, 1]
    c2 = h * np.sqrt(np.maximum(vm * vp, 0.0))
    h1, h2, _ = conserved_array(v, None, h=h)
    mu = _mu_from(h2, c2, w)
    in_d = (h > 0) & (vm > 0) & (vp > 0) & (np.abs(mu) <= 1 + MU_TOL)
    return {"p": v, "h": h, "H1": h1, "H2": h2, "C2": c2, "mu": mu, "in_D": in_d}


def conjugation_array(z: np.ndarray, w: WeightPair) -> dict[str, np.ndarray]:
    """Conjugation route for an (n, 4) array of unit vectors.

    Rows where the section or the conjugating element is undefined come back
    as NaN with ok = False.
    """
    z = np.atleast_2d(z)
    f1 = np.abs(z[:, 0]) ** 2 + np.abs(z[:, 1]) ** 2
    ok = (f1 > DEN_TOL) & (1.0 - f1 > DEN_TOL)
    zs = np.where(ok[:, None], z, np.array([1, 0, 1, 0]) / math.sqrt(2))
    zz, ww = _section_c4(zs)
    g = embed_pairs(zz, ww)
    xi = np.diag([1j * w.k, -1j * w.k, 1j * w.m, -1j * w.m])
    sig = np.swapaxes(g.conj(), -1, -2) @ xi @ g
    sz = sig[:, 0::2, 0::2]
    sw = sig[:, 1::2, 0::2]
    z11, w11 = sz[:, 0, 0], sw[:, 0, 0]
    z21, w21 = sz[:, 1, 0], sw[:, 1, 0]
    z22, w22 = sz[:, 1, 1], sw[:, 1, 1]
    n21 = np.abs(z21) ** 2 + np.abs(w21) ** 2
    ok &= n21 > DEN_TOL ** 2
    n21 = np.where(ok, n21, 1.0)
    # Q3 = q21^{-1} q22 q21 with q^{-1} = conj(q)/|q|^2 and conj(z + jw) = conj(z) - jw
    tz, tw = pair_mul(z22, w22, z21, w21)
    qz, qw = pair_mul(np.conj(z21), -w21, tz, tw)
    qz, qw = qz / n21, qw / n21
    rm = (2j * z11).real
    vm = np.abs(w11) ** 2
    rp = (-2j * qz).real
    vp = np.abs(qw) ** 2
    h = 2.0 * n21
    # after conjugating by diag(1, q21/|q21|) the (2,1) entry is real and
    # lambda^4 is the phase of w(Q3) conj(w11)
    kappa = qw * np.conj(w11)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam4 = np.where(np.abs(kappa) > 0, kappa / np.abs(kappa), np.nan)
    v = np.column_stack([vm, vp, rm, rp])
    out = _finish(v, h, w)
    out["lam4"] = lam4
    out["ok"] = ok
    for key in ("p", "h", "H1", "H2", "C2", "mu", "lam4"):
        arr = out[key]
        mask = ok if arr.ndim == 1 else ok[:, None]
        out[key] = np.where(mask, arr, np.nan)
    out["in_D"] &= ok
    return out


def closed_form_array(z: np.ndarray, w: WeightPair) -> dict[str, np.ndarray]:
    """Closed-form route from the torus invariants.

    The weights enter as (k, m) attached to (f2, f4) as below; reading the
    same polynomials with k and m exchanged does not reproduce the
    conjugation route.
    """
    d = invariants_array(z)
    f1, f2, f4, f5 = d["f1"], d["f2"], d["f4"], d["f5"]
    k, m = float(w.k), float(w.m)
    den = (f1 - 1) * f1 * (k * k + m * m) + 2 * f2 * f4 * k * m + 8 * k * m * f5
    ok = np.abs(den) > DEN_TOL
    safe = np.where(ok, den, 1.0)
    h = -2.0 * den
    rm = -2.0 * (f2 * k + f4 * m)
    em = 4.0 * ((f1 - 1) ** 2 * m * m + 2 * f2 * f4 * k * m + f1 * f1 * k * k + 8 * k * m * f5)
    rp = rm - 2.0 * (m - k) * (m + k) * (f1 * f4 * m + (f1 - 1) * f2 * k) / safe
    ep = 4.0 * (f1 * f1 * m * m + 2 * f2 * f4 * k * m + (f1 - 1) ** 2 * k * k + 8 * k * m * f5)
    v = np.column_stack([(em - rm * rm) / 4.0, (ep - rp * rp) / 4.0, rm, rp])
    out = _finish(v, h, w)
    out["ok"] = ok
    for key in ("p", "h", "H1", "H2", "C2", "mu"):
        arr = out[key]
        mask = ok if arr.ndim == 1 else ok[:, None]
        out[key] = np.where(mask, arr, np.nan)
    out["in_D"] &= ok
    return out


def _dpoint(out: dict, i: int = 0) -> DPoint:
    v = out["p"][i]
    return DPoint(float(v[0]), float(v[1]), float(v[2]), float(v[3]), float(out["h"][i]), float(out["mu"][i]), bool(out["in_D"][i]))


def p_conjugation(x: CP3Point, w: WeightPair) -> DPoint:
    a = np.abs(x.Z)
    if any(a[i] <= SET_TOL and a[j] <= SET_TOL for i, j in SINGULAR_LINES.values()):
        raise ValueError("point lies on the singular set")
    out = conjugation_array(x.Z[None, :], w)
    if not out["ok"][0]:
        raise ValueError("conjugation undefined (h = 0 locus)")
    return _dpoint(out)


def p_closed_form(x: CP3Point, w: WeightPair) -> DPoint:
    out = closed_form_array(x.Z[None, :], w)
    if not out["ok"][0]:
        raise ValueError("h = 0 locus")
    return _dpoint(out)


def d_membership(v_minus, v_plus, r_minus, r_plus, w: WeightPair) -> DPoint:
    """DPoint for a state, with h fixed by H1 = 4(k^2 + m^2)."""
    h = (w.h1_target - 4 * v_minus - 4 * v_plus - r_minus ** 2 - r_plus ** 2) / 4.0
    v = np.array([[v_minus, v_plus, r_minus, r_plus]], dtype=float)
    out = _finish(v, np.array([h]), w)
    return _dpoint(out)


def implied_c2(states: np.ndarray, w: WeightPair) -> np.ndarray:
    """C^2 = h sqrt(v- v+) with h from the D-constraint (not from the flow parameter)."""
    vm, vp, rm, rp = np.moveaxis(states, -1, 0)
    h = (w.h1_target - 4 * vm - 4 * vp - rm * rm - rp * rp) / 4.0
    return h * np.sqrt(vm * vp)


def sample_d_interior(rng: np.random.Generator, w: WeightPair, n: int, margin: float = 0.05):
    """n D-points obtained as images of random points of CP^3.

    Points whose image sits within `margin` (relative) of the D-boundary are
    redrawn, so integrators start away from the v = 0 and h = 0 walls.
    """
    scale = w.h1_target / 4.0
    picked = []
    while sum(len(p) for p in picked) < n:
        z = rng.normal(size=(4 * n, 4)) + 1j * rng.normal(size=(4 * n, 4))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        out = closed_form_array(z, w)
        p, h, mu = out["p"], out["h"], out["mu"]
        good = out["in_D"] & (p[:, 0] > margin * scale) & (p[:, 1] > margin * scale)
        good &= (h > margin * scale) & (np.abs(mu) < 1 - margin)
        picked.append(np.column_stack([p[good], out["C2"][good], mu[good]]))
    rows = np.concatenate(picked)[:n]
    return rows[:, :4], rows[:, 4], rows[:, 5]


# ---------------------------------------------------------------- rectangle


@dataclass(frozen=True)
class RectPoint:
    H2: float
    sixty_four_C2: float


class EdgeClass(enum.Enum):
    Interior = "Interior"
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L4 = "L4"
    Corner_L1L2 = "Corner_L1L2"
    Corner_L3L4 = "Corner_L3L4"
    Corner_L1L4 = "Corner_L1L4"
    Corner_L2L3 = "Corner_L2L3"
    MissingVertex = "MissingVertex"


def u_map(d: DPoint, p: Optional[TodaParams] = None) -> RectPoint:
    """(H2, 64 C^2); C^2 comes from p if given, otherwise from d.h."""
    c2 = p.C2 if p is not None else d.C2
    _, h2, c2 = conserved_array(d.as_array(), c2)
    return RectPoint(float(h2), float(64.0 * c2))


def rectangle_corners(w: WeightPair) -> dict[str, tuple[float, float]]:
    a, b = w.rect_a, w.rect_b
    return {
        "MissingVertex": (a, 0.0),
        "Corner_L1L4": (a / 2, a / 2),
        "Corner_L2L3": ((a + b) / 2, (b - a) / 2),
        "Corner_L3L4": (b / 2, b / 2),
    }


def edge_defects(x, y, w: WeightPair):
    """Signed slacks of the four inequalities (all >= 0 inside R)."""
    a, b = w.rect_a, w.rect_b
    return (x + y - a, a - (x - y), b - (x + y), x - y)


def in_rectangle(x, y, w: WeightPair, tol: float = CLASSIFY_TOL):
    s = edge_defects(np.asarray(x), np.asarray(y), w)
    return np.all([si >= -tol for si in s], axis=0)


_CORNER = {
    frozenset({1, 2}): EdgeClass.MissingVertex,
    frozenset({3, 4}): EdgeClass.Corner_L3L4,
    frozenset({1, 4}): EdgeClass.Corner_L1L4,
    frozenset({2, 3}): EdgeClass.Corner_L2L3,
}


def classify(r: RectPoint, w: WeightPair, tol: float = CLASSIFY_TOL) -> EdgeClass:
    x, y = r.H2, r.sixty_four_C2
    s = edge_defects(x, y, w)
    if min(s) < -tol:
        raise ValueError("not in rectangle")
    on = frozenset(i + 1 for i, si in enumerate(s) if abs(si) <= tol)
    if not on:
        return EdgeClass.Interior
    if len(on) == 1:
        return EdgeClass(f"L{next(iter(on))}")
    # two constraints can only be tight together at a vertex
    for pair, cls in _CORNER.items():
        if pair <= on:
            return cls
    raise ValueError("inconsistent edge set")  # unreachable for a genuine rectangle


# ---------------------------------------------------------------- special sets


@dataclass(frozen=True)
class SpecialFlags:
    onT: bool
    onQuadric: bool
    onBranchLocus: bool
    CliffordOrbit: bool


def special_set_detect(x: CP3Point, w: WeightPair, tol: float = SET_TOL) -> SpecialFlags:
    d = invariants_array(x.Z[None, :])
    f1, f2, f4, nu = (float(d[key][0]) for key in ("f1", "f2", "f4", "nu"))
    z = x.Z
    q = abs(w.k * z[0] * z[1] + w.m * z[2] * z[3])
    on_t = abs(f1 - 0.5) <= tol and abs(f2 * w.k - f4 * w.m) <= tol
    cliff = abs(abs(nu) - 0.75) <= tol and abs(f1 - 0.5) <= tol and abs(f2) <= tol and abs(f4) <= tol
    return SpecialFlags(on_t, q <= tol, abs(nu) <= tol, cliff)


def sample_T(rng: np.random.Generator, w: WeightPair, n: int) -> np.ndarray:
    """Random unit vectors with f1 = 1/2 and k f2 = m f4."""
    k, m = abs(w.k), abs(w.m)
    lim = 0.5 * min(1.0, m / k)
    f2 = rng.uniform(-lim, lim, size=n)
    f4 = f2 * w.k / w.m
    mods = np.column_stack([(0.5 + f2) / 2, (0.5 - f2) / 2, (0.5 + f4) / 2, (0.5 - f4) / 2])
    ph = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(n, 4)))
    return np.sqrt(np.maximum(mods, 0.0)) * ph


def sample_quadric(rng: np.random.Generator, w: WeightPair, n: int) -> np.ndarray:
    """Random unit vectors on k Z0 Z1 + m Z2 Z3 = 0."""
    z = rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))
    z[:, 3] = -w.k * z[:, 0] * z[:, 1] / (w.m * z[:, 2])
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def calibrate_quadric_scale(z: np.ndarray, w: WeightPair) -> tuple[float, float]:
    """Least-squares c_q in v- = c_q |k Z0 Z1 + m Z2 Z3|^2 on the conjugation route."""
    out = conjugation_array(z, w)
    ok = out["ok"]
    q2 = np.abs(w.k * z[ok, 0] * z[ok, 1] + w.m * z[ok, 2] * z[ok, 3]) ** 2
    vm = out["p"][ok, 0]
    c = float(np.dot(q2, vm) / np.dot(q2, q2))
    return c, float(np.max(np.abs(c * q2 - vm)))


# ---------------------------------------------------------------- scans


SCAN_COLUMNS = (
    ["Z0re", "Z0im", "Z1re", "Z1im", "Z2re", "Z2im", "Z3re", "Z3im"]
    + ["f1", "f2", "f4", "f5", "nu"]
    + ["v_minus", "v_plus", "r_minus", "r_plus", "h", "mu", "H2", "C2x64", "edge_class"]
)


def relative_deviation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|a - b| / max(1, |b|), rowwise max."""
    return np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)), axis=-1)


def scan_points(z: np.ndarray, w: WeightPair, tol: float = CLASSIFY_TOL) -> dict:
    """Both p-routes, u and edge classes for (n, 4) points; singular rows flagged."""
    z = np.atleast_2d(z)
    a = np.abs(z)
    singular = np.zeros(z.shape[0], dtype=bool)
    for i, j in SINGULAR_LINES.values():
        singular |= (a[:, i] <= SET_TOL) & (a[:, j] <= SET_TOL)
    conj = conjugation_array(z, w)
    closed = closed_form_array(z, w)
    keep = ~singular & conj["ok"] & closed["ok"]
    dev = np.full(z.shape[0], np.nan)
    both = np.column_stack([closed["p"], closed["h"]])
    other = np.column_stack([conj["p"], conj["h"]])
    dev[keep] = relative_deviation(other[keep], both[keep])
    h2, y = closed["H2"], 64.0 * closed["C2"]
    inside = np.zeros(z.shape[0], dtype=bool)
    inside[keep] = in_rectangle(h2[keep], y[keep], w, tol)
    classes = []
    for i in range(z.shape[0]):
        if keep[i] and inside[i]:
            classes.append(classify(RectPoint(float(h2[i]), float(y[i])), w, tol).value)
        else:
            classes.append("")
    return {
        "z": z,
        "keep": keep,
        "singular": singular | ~conj["ok"] | ~closed["ok"],
        "inv": invariants_array(z),
        "closed": closed,
        "conj": conj,
        "deviation": dev,
        "inside": inside,
        "edge_class": classes,
    }
