"""Quaternions and 2x2 quaternionic matrices.

A quaternion is written a + bi + cj + dk, or as a complex pair q = z + j w
with z = a + bi and w = c - di.  The sign on w comes from j z = conj(z) j:
j (c - di) = cj - d ji = cj + dk.

A 2x2 quaternionic matrix is stored as two complex 2x2 matrices (Z, W)
with X = Z + j W.  Products follow from (A + jB)(C + jD) = (AC - conj(B) D)
+ j(conj(A) D + B C), which keeps everything vectorised in numpy.

H^2 is identified with C^4 through the coordinates (z1, w1, z2, w2), and
left multiplication by q = z + jw acts on a pair (x, y) by the complex matrix
[[z, -conj(w)], [w, conj(z)]].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

ALGEBRA_TOL = 1e-10
GROUP_TOL = 1e-10


@dataclass(frozen=True)
class Quaternion:
    a: float
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0

    @classmethod
    def from_pair(cls, z: complex, w: complex = 0.0) -> "Quaternion":
        z = complex(z)
        w = complex(w)
        return cls(z.real, z.imag, w.real, -w.imag)

    @property
    def pair(self) -> tuple[complex, complex]:
        return complex(self.a, self.b), complex(self.c, -self.d)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def conj(self) -> "Quaternion":
        return Quaternion(self.a, -self.b, -self.c, -self.d)

    def norm2(self) -> float:
        return self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def inverse(self) -> "Quaternion":
        n2 = self.norm2()
        if n2 == 0.0:
            raise ZeroDivisionError("zero quaternion has no inverse")
        c = self.conj()
        return Quaternion(c.a / n2, c.b / n2, c.c / n2, c.d / n2)

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, other: Union["Quaternion", float]) -> "Quaternion":
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        s = float(other)
        return Quaternion(self.a * s, self.b * s, self.c * s, self.d * s)

    def __rmul__(self, other: float) -> "Quaternion":
        return self * other


def quat_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product on real components."""
    a1, b1, c1, d1 = p.a, p.b, p.c, p.d
    a2, b2, c2, d2 = q.a, q.b, q.c, q.d
    return Quaternion(
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    )


def pair_mul(z1, w1, z2, w2):
    """Product of z1 + j w1 and z2 + j w2 in complex-pair form (works on arrays)."""
    return z1 * z2 - np.conj(w1) * w2, np.conj(z1) * w2 + w1 * z2


class QuatMat2:
    """2x2 quaternionic matrix X = Z + jW, immutable."""

    __slots__ = ("_z", "_w")

    def __init__(self, z, w=None):
        z = np.array(z, dtype=complex).reshape(2, 2)
        w = np.zeros((2, 2), dtype=complex) if w is None else np.array(w, dtype=complex).reshape(2, 2)
        z.setflags(write=False)
        w.setflags(write=False)
        self._z = z
        self._w = w

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def w(self) -> np.ndarray:
        return self._w

    @classmethod
    def from_entries(cls, q11: Quaternion, q12: Quaternion, q21: Quaternion, q22: Quaternion):
        pairs = [q.pair for q in (q11, q12, q21, q22)]
        z = np.array([p[0] for p in pairs]).reshape(2, 2)
        w = np.array([p[1] for p in pairs]).reshape(2, 2)
        return cls(z, w)

    @classmethod
    def identity(cls):
        return cls(np.eye(2))

    @classmethod
    def from_c4(cls, e: np.ndarray, tol: float = 1e-9):
        """Inverse of embed_c4; raises if e does not commute with the quaternionic structure."""
        e = np.asarray(e, dtype=complex)
        z = e[0::2, 0::2]
        w = e[1::2, 0::2]
        back = embed_pairs(z, w)
        if np.max(np.abs(back - e), initial=0.0) > tol * max(1.0, np.max(np.abs(e))):
            raise ValueError("matrix is not quaternionic-linear")
        return cls(z, w)

    def entry(self, i: int, j: int) -> Quaternion:
        return Quaternion.from_pair(self._z[i, j], self._w[i, j])

    @property
    def q11(self):
        return self.entry(0, 0)

    @property
    def q12(self):
        return self.entry(0, 1)

    @property
    def q21(self):
        return self.entry(1, 0)

    @property
    def q22(self):
        return self.entry(1, 1)

    def dagger(self) -> "QuatMat2":
        # conj(z + jw) = conj(z) - jw, then transpose
        return QuatMat2(self._z.conj().T, -self._w.T)

    def __matmul__(self, other: "QuatMat2") -> "QuatMat2":
        a, b, c, d = self._z, self._w, other._z, other._w
        return QuatMat2(a @ c - b.conj() @ d, a.conj() @ d + b @ c)

    def __add__(self, other: "QuatMat2") -> "QuatMat2":
        return QuatMat2(self._z + other._z, self._w + other._w)

    def __sub__(self, other: "QuatMat2") -> "QuatMat2":
        return QuatMat2(self._z - other._z, self._w - other._w)

    def __neg__(self) -> "QuatMat2":
        return QuatMat2(-self._z, -self._w)

    def scale(self, s: float) -> "QuatMat2":
        return QuatMat2(self._z * float(s), self._w * float(s))

    def inverse(self) -> "QuatMat2":
        return QuatMat2.from_c4(np.linalg.inv(embed_c4(self)))

    def norm(self) -> float:
        """Frobenius norm over the quaternionic entries."""
        return float(np.sqrt(np.sum(np.abs(self._z) ** 2) + np.sum(np.abs(self._w) ** 2)))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(z={self._z.tolist()}, w={self._w.tolist()})"


def embed_pairs(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    e = np.empty(z.shape[:-2] + (4, 4), dtype=complex)
    e[..., 0::2, 0::2] = z
    e[..., 0::2, 1::2] = -w.conj()
    e[..., 1::2, 0::2] = w
    e[..., 1::2, 1::2] = z.conj()
    return e


def embed_c4(m: QuatMat2) -> np.ndarray:
    """Complex 4x4 matrix of left multiplication on C^4 = (z1, w1, z2, w2)."""
    return embed_pairs(m.z, m.w)


def _check(kind: str, defect: float, scale: float, tol: float):
    if defect > tol * max(1.0, scale):
        raise ValueError(f"not in {kind}: defect {defect:.3e}")


class Sp2Algebra(QuatMat2):
    """Element X of sp(2): X^dagger = -X."""

    __slots__ = ()

    def __init__(self, z, w=None, tol: float = ALGEBRA_TOL):
        super().__init__(z, w)
        defect = (self + self.dagger()).norm()
        _check("sp(2)", defect, self.norm(), tol)

    @classmethod
    def of(cls, m: QuatMat2, tol: float = ALGEBRA_TOL) -> "Sp2Algebra":
        return cls(m.z, m.w, tol=tol)

    @classmethod
    def diag(cls, k: float, m: float) -> "Sp2Algebra":
        """The element diag(ik, im)."""
        return cls(np.diag([1j * k, 1j * m]))


class Sp2Group(QuatMat2):
    """Element g of Sp(2): g^dagger g = 1."""

    __slots__ = ()

    def __init__(self, z, w=None, tol: float = GROUP_TOL):
        super().__init__(z, w)
        _check("Sp(2)", unitarity_defect(self), 1.0, tol)

    @classmethod
    def of(cls, m: QuatMat2, tol: float = GROUP_TOL) -> "Sp2Group":
        return cls(m.z, m.w, tol=tol)

    def inverse(self) -> "Sp2Group":
        d = self.dagger()
        return Sp2Group(d.z, d.w)


def unitarity_defect(g: QuatMat2) -> float:
    return (g.dagger() @ g - QuatMat2.identity()).norm()


def commutator(x: QuatMat2, y: QuatMat2) -> QuatMat2:
    return x @ y - y @ x


def conjugate_by(g: QuatMat2, x: QuatMat2) -> QuatMat2:
    """g^{-1} x g for unitary g."""
    return g.dagger() @ x @ g


def skew_spectrum_c4(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(a, b) with a >= b >= 0 for skew-Hermitian 4x4 matrices e (batched).

    The characteristic polynomial is t^4 + p1 t^2 + a^2 b^2 with
    p1 = a^2 + b^2 = -tr(e^2)/2 and a^4 + b^4 = tr(e^4)/2, so a^2, b^2 are the
    roots of a quadratic.
    """
    e2 = e @ e
    p1 = -np.real(np.trace(e2, axis1=-2, axis2=-1)) / 2
    p2 = np.real(np.trace(e2 @ e2, axis1=-2, axis2=-1)) / 2
    disc = np.sqrt(np.maximum(2 * p2 - p1 * p1, 0.0))
    a2 = (p1 + disc) / 2
    b2 = np.maximum((p1 - disc) / 2, 0.0)
    return np.sqrt(a2), np.sqrt(b2)


def eigenvalues(x: Sp2Algebra) -> np.ndarray:
    """Eigenvalues [ia, -ia, ib, -ib] of embed_c4(x), a >= b >= 0."""
    a, b = skew_spectrum_c4(embed_c4(x))
    a, b = float(a), float(b)
    return np.array([1j * a, -1j * a, 1j * b, -1j * b])


def polar_c4(e: np.ndarray, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Newton polar iteration e <- (e + e^{-H})/2 on (batched) 4x4 matrices."""
    eye = np.eye(4)
    for _ in range(max_iter):
        try:
            inv = np.linalg.inv(e)
        except np.linalg.LinAlgError:
            raise ValueError("singular frame") from None
        if not np.all(np.isfinite(inv)):
            raise ValueError("singular frame")
        e = 0.5 * (e + np.swapaxes(inv, -1, -2).conj())
        defect = np.max(np.abs(np.swapaxes(e, -1, -2).conj() @ e - eye))
        if defect <= tol:
            break
    return e


def reunitarize(g: QuatMat2) -> Sp2Group:
    """Closest element of Sp(2) via the polar factor."""
    e = embed_c4(g)
    if abs(np.linalg.det(e)) < 1e-14:
        raise ValueError("singular frame")
    u = polar_c4(e)
    return Sp2Group.of(QuatMat2.from_c4(u))
