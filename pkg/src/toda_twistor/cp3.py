"""Homogeneous-coordinate geometry of CP^3.

Points are kept as unit vectors Z in C^4 = H^2 with (Z0, Z1, Z2, Z3) =
(z1, w1, z2, w2), i.e. the quaternionic column (Z0 + j Z1, Z2 + j Z3).  The
weights (k, m) fix the generator xi = diag(ik, im) of the torus action

    (Z0, Z1, Z2, Z3) -> (e^{ik t} Z0, e^{-ik t} Z1, e^{im t} Z2, e^{-im t} Z3).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .quat import QuatMat2, Sp2Algebra, Sp2Group, conjugate_by, reunitarize, unitarity_defect

SET_TOL = 1e-10
SECTION_TOL = 1e-12

# c in c*nu^2 + f5^2 = (f1^2 - f2^2)(f3^2 - f4^2)/16, fixed by
# scripts/calibrate_constants.py and re-checked in the tests
NU_CONSTANT = 1.0 / 144.0


@dataclass(frozen=True)
class WeightPair:
    k: int
    m: int

    def __post_init__(self):
        if self.k == 0 or self.m == 0 or abs(self.k) == abs(self.m):
            raise ValueError(f"degenerate weights (k, m) = ({self.k}, {self.m})")
        if math.gcd(abs(self.k), abs(self.m)) != 1:
            warnings.warn(f"weights ({self.k}, {self.m}) are not coprime", stacklevel=2)

    @property
    def xi(self) -> Sp2Algebra:
        return Sp2Algebra.diag(self.k, self.m)

    @property
    def h1_target(self) -> float:
        return 4.0 * (self.k ** 2 + self.m ** 2)

    @property
    def rect_a(self) -> float:
        """16 (k^2 - m^2)^2."""
        return 16.0 * (self.k ** 2 - self.m ** 2) ** 2

    @property
    def rect_b(self) -> float:
        """16 (k^2 + m^2)^2."""
        return 16.0 * (self.k ** 2 + self.m ** 2) ** 2


class CP3Point:
    """Unit representative of a point of CP^3."""

    __slots__ = ("_z",)

    def __init__(self, coords):
        z = np.array(coords, dtype=complex).reshape(4)
        n = np.linalg.norm(z)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("homogeneous coordinates must not all vanish")
        z = z / n
        z.setflags(write=False)
        self._z = z

    @property
    def Z(self) -> np.ndarray:
        return self._z

    @classmethod
    def random(cls, rng: np.random.Generator) -> "CP3Point":
        return cls(rng.normal(size=4) + 1j * rng.normal(size=4))

    def torus_act(self, w: WeightPair, theta: float) -> "CP3Point":
        """The weighted circle rho(e^{i theta})."""
        return self.t2_act(w.k * theta, w.m * theta)

    def t2_act(self, s: float, t: float) -> "CP3Point":
        ph = np.exp(1j * np.array([s, -s, t, -t]))
        return CP3Point(self._z * ph)

    def phase(self, theta: float) -> "CP3Point":
        return CP3Point(self._z * np.exp(1j * theta))

    def conjugate(self) -> "CP3Point":
        """The involution delta: coordinatewise complex conjugation."""
        return CP3Point(self._z.conj())

    def distance(self, other: "CP3Point") -> float:
        """Chordal distance sqrt(1 - |<Z, W>|^2).

        Computed as the norm of the part of W orthogonal to Z, which keeps
        full precision for nearby points.
        """
        perp = other._z - np.vdot(self._z, other._z) * self._z
        return float(np.linalg.norm(perp))

    def __repr__(self):
        return f"CP3Point({self._z.tolist()})"


def random_unit_c4(rng: np.random.Generator, n: int) -> np.ndarray:
    """n normalised complex Gaussians in C^4 (uniform on the unit sphere)."""
    z = rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass(frozen=True)
class InvariantTuple:
    f1: float
    f2: float
    f3: float
    f4: float
    f5: float
    nu: float

    def as_tuple(self):
        return (self.f1, self.f2, self.f3, self.f4, self.f5, self.nu)


def invariants_array(z: np.ndarray) -> dict[str, np.ndarray]:
    """Torus invariants for an (n, 4) array of unit vectors."""
    z = np.atleast_2d(z)
    a = np.abs(z) ** 2
    mono = z[:, 0] * z[:, 1] * np.conj(z[:, 2]) * np.conj(z[:, 3])
    f1 = a[:, 0] + a[:, 1]
    return {
        "f1": f1,
        "f2": a[:, 0] - a[:, 1],
        "f3": 1.0 - f1,
        "f4": a[:, 2] - a[:, 3],
        "f5": mono.real,
        "nu": 12.0 * mono.imag,
    }


def invariants(x: CP3Point) -> InvariantTuple:
    d = invariants_array(x.Z[None, :])
    return InvariantTuple(*(float(d[key][0]) for key in ("f1", "f2", "f3", "f4", "f5", "nu")))


def multimoment_lhs_rhs(z: np.ndarray, c: float = NU_CONSTANT):
    """Both sides of c nu^2 + f5^2 = (f1^2 - f2^2)(f3^2 - f4^2)/16."""
    d = invariants_array(z)
    lhs = c * d["nu"] ** 2 + d["f5"] ** 2
    rhs = (d["f1"] ** 2 - d["f2"] ** 2) * (d["f3"] ** 2 - d["f4"] ** 2) / 16.0
    return lhs, rhs


def calibrate_nu_constant(z: np.ndarray) -> tuple[float, float]:
    """Least-squares c in c nu^2 = rhs - f5^2; returns (c, max residual)."""
    d = invariants_array(z)
    target = (d["f1"] ** 2 - d["f2"] ** 2) * (d["f3"] ** 2 - d["f4"] ** 2) / 16.0 - d["f5"] ** 2
    x = d["nu"] ** 2
    c = float(np.dot(x, target) / np.dot(x, x))
    return c, float(np.max(np.abs(c * x - target)))


def quadric_value(x: CP3Point, w: WeightPair) -> complex:
    z = x.Z
    return complex(w.k * z[0] * z[1] + w.m * z[2] * z[3])


# the six torus-invariant lines, as pairs of vanishing coordinates
SINGULAR_LINES = {
    "L1": (0, 1),
    "L2": (0, 2),
    "L3": (0, 3),
    "L4": (1, 3),
    "L5": (1, 2),
    "L6": (2, 3),
}


@dataclass(frozen=True)
class SingularFlags:
    L1: bool
    L2: bool
    L3: bool
    L4: bool
    L5: bool
    L6: bool

    @property
    def free(self) -> bool:
        return not any((self.L1, self.L2, self.L3, self.L4, self.L5, self.L6))

    def lines(self) -> list[str]:
        return [name for name in SINGULAR_LINES if getattr(self, name)]


def singular_classify(x: CP3Point, tol: float = SET_TOL) -> SingularFlags:
    a = np.abs(x.Z)
    return SingularFlags(**{name: bool(a[i] <= tol and a[j] <= tol) for name, (i, j) in SINGULAR_LINES.items()})


def _section_c4(z: np.ndarray):
    """Batched section: returns (n, 2, 2) complex Z and W parts.

    Columns are (a, b) and (a s1, -b s2) with a = Z0 + jZ1, b = Z2 + jZ3,
    s1 = 1/(f1 N), s2 = 1/(f3 N), N = sqrt(1/f1 + 1/f3).  The minus sign on
    the second entry is what makes the two columns orthogonal.
    """
    z = np.atleast_2d(z)
    f1 = np.abs(z[:, 0]) ** 2 + np.abs(z[:, 1]) ** 2
    f3 = np.abs(z[:, 2]) ** 2 + np.abs(z[:, 3]) ** 2
    n = np.sqrt(1.0 / f1 + 1.0 / f3)
    s1 = 1.0 / (f1 * n)
    s2 = 1.0 / (f3 * n)
    zz = np.empty((z.shape[0], 2, 2), dtype=complex)
    ww = np.empty_like(zz)
    zz[:, 0, 0], ww[:, 0, 0] = z[:, 0], z[:, 1]
    zz[:, 1, 0], ww[:, 1, 0] = z[:, 2], z[:, 3]
    zz[:, 0, 1], ww[:, 0, 1] = z[:, 0] * s1, z[:, 1] * s1
    zz[:, 1, 1], ww[:, 1, 1] = -z[:, 2] * s2, -z[:, 3] * s2
    return zz, ww


def section_sp2(x: CP3Point, w: WeightPair | None = None) -> Sp2Group:
    """A group element whose first column is x (the basepoint is [1,0,0,0])."""
    t = invariants(x)
    if t.f1 <= SECTION_TOL or t.f3 <= SECTION_TOL:
        raise ValueError("section undefined on L1 ∪ L6")
    zz, ww = _section_c4(x.Z[None, :])
    raw = QuatMat2(zz[0], ww[0])
    if unitarity_defect(raw) > 0.1:
        raise ValueError("section fails unitarity")
    return reunitarize(raw)


def project(g: QuatMat2) -> CP3Point:
    """Image of the basepoint [1,0,0,0] under g: the first quaternionic column."""
    return CP3Point([g.z[0, 0], g.w[0, 0], g.z[1, 0], g.w[1, 0]])


def c_F(x: CP3Point, w: WeightPair) -> Sp2Algebra:
    """g^{-1} xi g for the section g through x."""
    g = section_sp2(x, w)
    return Sp2Algebra.of(conjugate_by(g, w.xi))
