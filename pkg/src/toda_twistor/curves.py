"""Curve-level computations on periodic grids and along Toda trajectories.

Angle fields (alpha-, alpha+) live on a flat torus grid with spacing
hx = Lx/nx, hy = Ly/ny.  Conventions fixed here:

* gamma = (alpha- alpha+)^{-1/4}, metric g = gamma^2 (dx^2 + dy^2);
* the unitary (1,0)-form is omega0 = gamma (dx + i dy);
* d^C f = f_y dx - f_x dy;
* |d^{1,0} f| = |grad f|_g / 2.

With these choices the Bonnet form eta below is flat exactly when both Toda
residuals vanish; more precisely its curvature has diagonal entries
i(3R- - R+)/16 and i(R- - 3R+)/16 and zero off-diagonal part.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .atlas import closed_form_array
from .cp3 import CP3Point, WeightPair
from .quat import QuatMat2, Sp2Algebra, Sp2Group, embed_c4, embed_pairs, polar_c4
from .toda import TodaParams, TodaState, lax_c4

SQRT2 = math.sqrt(2.0)


@dataclass
class AngleField:
    alpha_minus: np.ndarray
    alpha_plus: np.ndarray
    Lx: float = 2 * math.pi
    Ly: float = 2 * math.pi

    def __post_init__(self):
        self.alpha_minus = np.asarray(self.alpha_minus, dtype=float)
        self.alpha_plus = np.asarray(self.alpha_plus, dtype=float)
        if self.alpha_minus.shape != self.alpha_plus.shape or self.alpha_minus.ndim != 2:
            raise ValueError("angle fields must be two arrays of equal 2D shape")
        if not (np.all(self.alpha_minus > 0) and np.all(self.alpha_plus > 0)):
            raise ValueError("angle fields must be strictly positive")

    @property
    def nx(self) -> int:
        return self.alpha_minus.shape[0]

    @property
    def ny(self) -> int:
        return self.alpha_minus.shape[1]

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def gamma(self) -> np.ndarray:
        return (self.alpha_minus * self.alpha_plus) ** -0.25

    def grid(self):
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    @classmethod
    def constant(cls, n: int, am: float, ap: float, L: float = 2 * math.pi) -> "AngleField":
        return cls(np.full((n, n), am), np.full((n, n), ap), L, L)

    @classmethod
    def from_functions(cls, n: int, fm, fp, L: float = 2 * math.pi) -> "AngleField":
        h = L / n
        x, y = np.meshgrid(np.arange(n) * h, np.arange(n) * h, indexing="ij")
        return cls(fm(x, y), fp(x, y), L, L)


def laplacian_periodic(f: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Standard 5-point Laplacian with wraparound."""
    return (np.roll(f, 1, 0) - 2 * f + np.roll(f, -1, 0)) / hx ** 2 + (
        np.roll(f, 1, 1) - 2 * f + np.roll(f, -1, 1)
    ) / hy ** 2


def gradient_periodic(f: np.ndarray, hx: float, hy: float):
    """Centered differences with wraparound."""
    fx = (np.roll(f, -1, 0) - np.roll(f, 1, 0)) / (2 * hx)
    fy = (np.roll(f, -1, 1) - np.roll(f, 1, 1)) / (2 * hy)
    return fx, fy


@dataclass
class PDEResidual:
    minus: np.ndarray
    plus: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.minus)), np.max(np.abs(self.plus))))


def toda_rhs(am: np.ndarray, ap: np.ndarray):
    """The potential terms 4(3a-^2 + a+^2 - 2) gamma^2 and the mirrored one."""
    g2 = 1.0 / np.sqrt(am * ap)
    return 4 * (3 * am ** 2 + ap ** 2 - 2) * g2, 4 * (3 * ap ** 2 + am ** 2 - 2) * g2


def toda_pde_residual(a: AngleField) -> PDEResidual:
    """Delta log(a-^2) + 4(3a-^2 + a+^2 - 2) gamma^2 and its mirror."""
    pm, pp = toda_rhs(a.alpha_minus, a.alpha_plus)
    rm = laplacian_periodic(np.log(a.alpha_minus ** 2), a.hx, a.hy) + pm
    rp = laplacian_periodic(np.log(a.alpha_plus ** 2), a.hx, a.hy) + pp
    return PDEResidual(rm, rp)


def gauss_curvature(a: AngleField) -> np.ndarray:
    am, ap = a.alpha_minus, a.alpha_plus
    return 2.0 / np.sqrt(am * ap) * (1.0 - am ** 2 - ap ** 2)


def second_ff_magnitudes(a: AngleField):
    """(|II1|, |II2|, dbarII coefficient) as fields."""
    am, ap = a.alpha_minus, a.alpha_plus
    fx, fy = gradient_periodic(am, a.hx, a.hy)
    grad_g = np.sqrt(fx ** 2 + fy ** 2) / a.gamma
    ii1 = grad_g / (1.0 + am ** 2)
    ii2 = ap / np.sqrt(1.0 + am ** 2)
    dbar = 2.0 * am * np.abs(3.0 * am ** 2 - 2.0) / (am ** 2 + 1.0)
    return ii1, ii2, dbar


# ---------------------------------------------------------------- Bonnet form


def _eta_pairs(am, ap, dam, dap, omega, omega_bar):
    """Complex-pair parts of eta evaluated on one tangent direction.

    dam, dap are the d^C log(alpha) coefficients; omega, omega_bar the values
    of omega0 and its conjugate on that direction.
    """
    rho1 = (-3 * dam + dap) / 8
    rho2 = (-dam + 3 * dap) / 8
    shape = np.shape(am) + (2, 2)
    z = np.zeros(shape, dtype=complex)
    w = np.zeros(shape, dtype=complex)
    z[..., 0, 0] = 1j * rho1
    w[..., 0, 0] = am * omega_bar
    z[..., 0, 1] = -omega_bar / SQRT2
    z[..., 1, 0] = omega / SQRT2
    z[..., 1, 1] = 1j * rho2
    w[..., 1, 1] = ap * omega
    return z, w


def bonnet_eta_field(a: AngleField, scale: float = 1.0):
    """Embedded (nx, ny, 4, 4) coefficients (eta_x, eta_y) of the Bonnet form.

    `scale` multiplies omega0 (a constant rescaling of the metric).
    """
    la, lb = np.log(a.alpha_minus), np.log(a.alpha_plus)
    ax, ay = gradient_periodic(la, a.hx, a.hy)
    bx, by = gradient_periodic(lb, a.hx, a.hy)
    g = scale * a.gamma
    # d^C f = f_y dx - f_x dy; omega0 = g (dx + i dy)
    zx, wx = _eta_pairs(a.alpha_minus, a.alpha_plus, ay, by, g + 0j, g + 0j)
    zy, wy = _eta_pairs(a.alpha_minus, a.alpha_plus, -ax, -bx, 1j * g, -1j * g)
    return embed_pairs(zx, wx), embed_pairs(zy, wy)


def bonnet_eta(a: AngleField, i: int, j: int, scale: float = 1.0) -> tuple[QuatMat2, QuatMat2]:
    """(eta_x, eta_y) at grid point (i, j), as skew-adjoint quaternionic matrices."""
    ex, ey = bonnet_eta_field(a, scale)
    return Sp2Algebra.of(QuatMat2.from_c4(ex[i, j])), Sp2Algebra.of(QuatMat2.from_c4(ey[i, j]))


def flatness_field(a: AngleField, scale: float = 1.0) -> np.ndarray:
    """d eta + [eta, eta]/2 evaluated on (d/dx, d/dy): embedded (nx, ny, 4, 4)."""
    ex, ey = bonnet_eta_field(a, scale)
    dx_ey = (np.roll(ey, -1, 0) - np.roll(ey, 1, 0)) / (2 * a.hx)
    dy_ex = (np.roll(ex, -1, 1) - np.roll(ex, 1, 1)) / (2 * a.hy)
    return dx_ey - dy_ex + ex @ ey - ey @ ex


def flatness_residual(a: AngleField, scale: float = 1.0) -> np.ndarray:
    """Pointwise quaternionic Frobenius norm of the curvature of eta."""
    f = flatness_field(a, scale)
    return np.sqrt(np.sum(np.abs(f) ** 2, axis=(-2, -1)) / 2.0)


def flatness_from_toda(res: PDEResidual) -> np.ndarray:
    """Curvature norm predicted by the Toda residuals: |(3R- - R+, R- - 3R+)|/16."""
    return np.sqrt((3 * res.minus - res.plus) ** 2 + (res.minus - 3 * res.plus) ** 2) / 16.0


# ---------------------------------------------------------------- grid I/O


def save_grid(a: AngleField, path) -> None:
    doc = {
        "nx": a.nx,
        "ny": a.ny,
        "Lx": a.Lx,
        "Ly": a.Ly,
        "alpha_minus": a.alpha_minus.ravel().tolist(),
        "alpha_plus": a.alpha_plus.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_grid(path) -> AngleField:
    doc = json.loads(Path(path).read_text())
    shape = (int(doc["nx"]), int(doc["ny"]))
    return AngleField(
        np.array(doc["alpha_minus"], dtype=float).reshape(shape),
        np.array(doc["alpha_plus"], dtype=float).reshape(shape),
        float(doc["Lx"]),
        float(doc["Ly"]),
    )


# ---------------------------------------------------------------- superminimal curves


@dataclass(frozen=True)
class SuperminimalCurve:
    """phi_C, psi_C (weights k, m) or theta (rational f, g).

    Rational functions are (numerator, denominator) coefficient lists in
    ascending powers of z.  `rescaled=True` selects the phi_C variant whose
    last coefficient is kC/(k - m) instead of 2kC/(k - m).
    """

    family: str
    C: complex = 1.0
    k: int = 1
    m: int = 2
    f: Optional[tuple[Sequence[complex], Sequence[complex]]] = None
    g: Optional[tuple[Sequence[complex], Sequence[complex]]] = None
    rescaled: bool = False

    def __post_init__(self):
        if self.family not in ("phi_C", "psi_C", "theta"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family in ("phi_C", "psi_C") and self.k == self.m:
            raise ValueError("phi_C and psi_C need k != m")
        if self.family == "psi_C" and self.C == 0:
            raise ValueError("psi_C needs C != 0")
        if self.family == "theta":
            if self.f is None or self.g is None:
                raise ValueError("theta needs f and g")
            gn, gd = (Polynomial(np.asarray(c, dtype=complex)) for c in self.g)
            if np.all(np.abs((gn.deriv() * gd - gn * gd.deriv()).coef) == 0):
                raise ValueError("g must be non-constant")

    def monomials(self):
        """Coefficients and exponents of the four homogeneous coordinates."""
        k, m, c = self.k, self.m, complex(self.C)
        exps = np.array([0, 2 * k, k - m, k + m])
        if self.family == "phi_C":
            last = (1 if self.rescaled else 2) * k * c / (k - m)
            coef = np.array([1, c * m / (m - k), 1, last], dtype=complex)
        elif self.family == "psi_C":
            coef = np.array([1, m / (m - k), c, k / (c * (k - m))], dtype=complex)
        else:
            raise ValueError("theta curves are not monomial")
        return coef, exps


def _theta_polys(c: SuperminimalCurve):
    p, q = (Polynomial(np.asarray(x, dtype=complex)) for x in c.f)
    r, s = (Polynomial(np.asarray(x, dtype=complex)) for x in c.g)
    wp = r.deriv() * s - r * s.deriv()  # numerator of g'
    fp = p.deriv() * q - p * q.deriv()  # numerator of f'
    # [1, f - g f'/(2g'), g, f'/(2g')] times q^2 s wp
    comps = [q * q * s * wp, p * q * s * wp - 0.5 * r * fp * s * s, r * q * q * wp, 0.5 * fp * s ** 3]
    return comps, wp, s


def homogeneous(c: SuperminimalCurve, z: complex) -> np.ndarray:
    """Unnormalised homogeneous coordinates, poles cleared."""
    z = complex(z)
    if c.family == "theta":
        comps, wp, s = _theta_polys(c)
        if abs(wp(z)) <= 1e-14 and abs(s(z)) > 1e-14:
            raise ValueError("branch point of g")
        vec = np.array([pc(z) for pc in comps], dtype=complex)
    else:
        coef, exps = c.monomials()
        shift = exps[coef != 0].min()
        e = exps - shift
        vec = coef * np.array([z ** int(ei) if ei > 0 else 1.0 + 0j for ei in e])
    if np.linalg.norm(vec) <= 1e-14:
        raise ValueError("indeterminate point")
    return vec


def homogeneous_derivative(c: SuperminimalCurve, z: complex) -> np.ndarray:
    z = complex(z)
    if c.family == "theta":
        comps, _, _ = _theta_polys(c)
        return np.array([pc.deriv()(z) for pc in comps], dtype=complex)
    coef, exps = c.monomials()
    e = exps - exps[coef != 0].min()
    return coef * np.array([ei * z ** int(ei - 1) if ei > 0 else 0j for ei in e])


def superminimal_eval(c: SuperminimalCurve, z: complex) -> CP3Point:
    return CP3Point(homogeneous(c, z))


def quadric_residual(c: SuperminimalCurve, z: complex, w: Optional[WeightPair] = None) -> float:
    """|k Z0 Z1 + m Z2 Z3| on the unit representative."""
    x = superminimal_eval(c, z).Z
    k, m = (w.k, w.m) if w is not None else (c.k, c.m)
    return float(abs(k * x[0] * x[1] + m * x[2] * x[3]))


def horizontality_residual(c: SuperminimalCurve, z: complex) -> float:
    """|Z0 dZ1 - Z1 dZ0 + Z2 dZ3 - Z3 dZ2| / (|Z| |dZ|) along the curve."""
    v = homogeneous(c, z)
    dv = homogeneous_derivative(c, z)
    form = v[0] * dv[1] - v[1] * dv[0] + v[2] * dv[3] - v[3] * dv[2]
    denom = np.linalg.norm(v) * np.linalg.norm(dv)
    return float(abs(form) / denom) if denom > 0 else 0.0


# ---------------------------------------------------------------- reconstruction


@dataclass
class FramePath:
    ts: np.ndarray
    frames: np.ndarray  # (n, 4, 4) embedded Sp(2) elements
    states: np.ndarray  # (n, 4) Toda states at the same times
    meta: dict = field(default_factory=dict)

    def frame(self, i: int) -> Sp2Group:
        return Sp2Group.of(QuatMat2.from_c4(self.frames[i]), tol=1e-8)

    @property
    def points(self) -> np.ndarray:
        """Projected path: first column of each frame, i.e. Phi(t) [1,0,0,0]."""
        return self.frames[:, :, 0]

    def unitarity_defect(self) -> float:
        e = self.frames
        d = np.swapaxes(e.conj(), -1, -2) @ e - np.eye(4)
        return float(np.max(np.sqrt(np.sum(np.abs(d) ** 2, axis=(-2, -1)) / 2)))


def diagonalizing_frame(s: TodaState, p: TodaParams, w: WeightPair) -> Sp2Group:
    """Phi0 with Phi0 L Phi0^{-1} = diag(ik, im); needs the spectrum of L to be {+-ik, +-im}."""
    l, _ = lax_c4(s.as_array(), p.C2, p.lam)
    vals, vecs = np.linalg.eig(l)
    cols = []
    for target in (1j * w.k, 1j * w.m):
        i = int(np.argmin(np.abs(vals - target)))
        if abs(vals[i] - target) > 1e-6 * max(1.0, abs(target)):
            raise ValueError("spectrum of L does not match the weights; is the state in D?")
        v = vecs[:, i] / np.linalg.norm(vecs[:, i])
        # the quaternionic column spanned by v and v j
        cols.append(np.array([[v[0], -np.conj(v[1])], [v[1], np.conj(v[0])], [v[2], -np.conj(v[3])], [v[3], np.conj(v[2])]]))
    big = np.hstack(cols)
    u = polar_c4(big.conj().T)
    return Sp2Group.of(QuatMat2.from_c4(u))


def reconstruct_u1_curve(states: np.ndarray, ts: np.ndarray, p: TodaParams, phi0: QuatMat2) -> FramePath:
    """Integrate dPhi/dt = Phi M(t) along a uniformly sampled trajectory.

    RK4 with step 2 dt uses the samples at t, t + dt, t + 2dt, so frames are
    returned at every other sample.  Frames are pushed back onto Sp(2) by the
    polar factor after every step.
    """
    states = np.asarray(states, dtype=float)
    ts = np.asarray(ts, dtype=float)
    n = states.shape[0]
    if n < 3:
        raise ValueError("need at least three trajectory samples")
    if n % 2 == 0:
        states, ts, n = states[:-1], ts[:-1], n - 1
    dts = np.diff(ts)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * max(1.0, abs(dts[0])):
        raise ValueError("trajectory must be uniformly sampled")
    big_h = 2 * dts[0]
    _, ms = lax_c4(states, p.C2, p.lam)
    phi = embed_c4(phi0).copy()
    frames = [phi.copy()]
    eye = np.eye(4)
    for i in range(0, n - 2, 2):
        m0, m1, m2 = ms[i], ms[i + 1], ms[i + 2]
        k1 = phi @ m0
        k2 = (phi + 0.5 * big_h * k1) @ m1
        k3 = (phi + 0.5 * big_h * k2) @ m1
        k4 = (phi + big_h * k3) @ m2
        phi = phi + big_h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.max(np.abs(phi.conj().T @ phi - eye)) > 0.1:
            raise ValueError("step too large")
        phi = polar_c4(phi, tol=1e-14, max_iter=3)
        frames.append(phi.copy())
    return FramePath(ts[::2].copy(), np.array(frames), states[::2].copy(), {"step": big_h})


def path_p_values(path: FramePath, w: WeightPair) -> np.ndarray:
    """p recomputed by the closed form along the projected path, shape (n, 4)."""
    return closed_form_array(path.points, w)["p"]


def angle_functions(states: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """alpha+- = sqrt(v+- / h)."""
    states = np.atleast_2d(states)
    return np.sqrt(states[:, 0] / h), np.sqrt(states[:, 1] / h)


FRAME_COLUMNS = (
    ["t"]
    + [f"F{i}{j}{part}" for i in range(4) for j in range(4) for part in ("re", "im")]
    + [f"Z{i}{part}" for i in range(4) for part in ("re", "im")]
)


def frame_table(path: FramePath) -> np.ndarray:
    n = path.frames.shape[0]
    f = path.frames.reshape(n, 16)
    fr = np.stack([f.real, f.imag], axis=-1).reshape(n, 32)
    z = path.points
    zr = np.stack([z.real, z.imag], axis=-1).reshape(n, 8)
    return np.column_stack([path.ts, fr, zr])
