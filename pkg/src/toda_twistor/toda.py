"""The affine sp(2) Toda lattice in one dimension.

State (v-, v+, r-, r+) with q = log(v)/2 and r = dq/dt:

    dq-/dt = r-,   dr-/dt = 2 (h - 2 v-),   h = C^2 / sqrt(v- v+)

and the same with - and + exchanged.  Hamiltonian
H = 2 (C^2 e^{-(q- + q+)} + e^{2q-} + e^{2q+}) + (r-^2 + r+^2)/2.

Most routines act on arrays of shape (..., 4) so that many trajectories can
be integrated in one numpy pass; the dataclass wrappers are for single
states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cp3 import WeightPair
from .quat import QuatMat2, Sp2Algebra, embed_pairs, skew_spectrum_c4

# Eigenvalues of L are +-i * EIG_PREFACTOR * sqrt(H1 +- sqrt(H2 + EIG_C2_COEFF C^2 mu)).
# Both constants were fitted against the dense spectrum of build_lax
# (scripts/calibrate_constants.py) and are re-checked by the test suite.
EIG_PREFACTOR = 1.0 / (2.0 * math.sqrt(2.0))
EIG_C2_COEFF = 64.0


class PositivityError(ValueError):
    """A step left the cone v- > 0, v+ > 0."""


@dataclass(frozen=True)
class TodaState:
    v_minus: float
    v_plus: float
    r_minus: float
    r_plus: float

    def __post_init__(self):
        if not (self.v_minus > 0 and self.v_plus > 0):
            raise ValueError("TodaState needs v_minus > 0 and v_plus > 0")

    @property
    def q_minus(self) -> float:
        return 0.5 * math.log(self.v_minus)

    @property
    def q_plus(self) -> float:
        return 0.5 * math.log(self.v_plus)

    def as_array(self) -> np.ndarray:
        return np.array([self.v_minus, self.v_plus, self.r_minus, self.r_plus])

    @classmethod
    def from_array(cls, a) -> "TodaState":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def swapped(self) -> "TodaState":
        return TodaState(self.v_plus, self.v_minus, self.r_plus, self.r_minus)

    def h(self, p: "TodaParams") -> float:
        return p.C2 / math.sqrt(self.v_minus * self.v_plus)


@dataclass(frozen=True)
class TodaParams:
    C: float
    lambda_re4: float = 1.0
    weights: Optional[WeightPair] = None

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not -1.0 - 1e-12 <= self.lambda_re4 <= 1.0 + 1e-12:
            raise ValueError("lambda_re4 must lie in [-1, 1]")

    @property
    def C2(self) -> float:
        return self.C * self.C

    @property
    def mu(self) -> float:
        return min(1.0, max(-1.0, self.lambda_re4))

    @property
    def lam(self) -> complex:
        """Principal unit lambda with Re(lambda^4) = mu."""
        return complex(np.exp(1j * math.acos(self.mu) / 4.0))

    @classmethod
    def from_c2(cls, c2: float, mu: float = 1.0, weights: Optional[WeightPair] = None) -> "TodaParams":
        return cls(math.sqrt(c2), mu, weights)


# ---------------------------------------------------------------- arrays


def _h(s: np.ndarray, c2) -> np.ndarray:
    return c2 / np.sqrt(s[..., 0] * s[..., 1])


def hamiltonian_array(s: np.ndarray, c2) -> np.ndarray:
    vm, vp, rm, rp = np.moveaxis(s, -1, 0)
    return 2.0 * (_h(s, c2) + vm + vp) + 0.5 * (rm * rm + rp * rp)


def conserved_array(s: np.ndarray, c2, h: Optional[np.ndarray] = None):
    """(H1, H2, C2) with the (v, h) form of H2.  h defaults to C^2/sqrt(v- v+)."""
    vm, vp, rm, rp = np.moveaxis(s, -1, 0)
    if h is None:
        h = _h(s, c2)
    h1 = 4 * h + 4 * vm + 4 * vp + rm * rm + rp * rp
    h2 = (rm * rm - rp * rp + 4 * vm - 4 * vp) ** 2 + 8 * h * ((rp - rm) ** 2 + 4 * (vp + vm))
    return h1, h2, h * np.sqrt(np.maximum(vm * vp, 0.0))


def h2_q_display(s: np.ndarray, c2) -> np.ndarray:
    """The other H2 expression, written in q-coordinates.

    It is not a constant of motion; kept so the conservation oracle can reject
    it (see tests and the verify command).
    """
    vm, vp, rm, rp = np.moveaxis(s, -1, 0)
    qm, qp = 0.5 * np.log(vm), 0.5 * np.log(vp)
    return 2 * c2 * np.exp(-qm - qp) * ((rm - rp) ** 2 + 4 * (np.exp(qm) + np.exp(qp)) ** 2) + (
        rm * rm - rp * rp + 4 * vm - 4 * vp
    ) ** 2


H2_CANDIDATES: dict[str, Callable] = {
    "vh": lambda s, c2: conserved_array(s, c2)[1],
    "q": h2_q_display,
}


def velocity_array(s: np.ndarray, c2) -> np.ndarray:
    """Time derivative of (v-, v+, r-, r+)."""
    vm, vp, rm, rp = np.moveaxis(s, -1, 0)
    h = _h(s, c2)
    return np.stack([2 * rm * vm, 2 * rp * vp, 2 * (h - 2 * vm), 2 * (h - 2 * vp)], axis=-1)


def _check_positive(s: np.ndarray):
    v = s[..., :2]
    if not (np.all(np.isfinite(s)) and np.all(v > 0)):
        raise PositivityError("left positive cone; reduce dt")


def rk4_array(s: np.ndarray, c2, dt: float) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        k1 = velocity_array(s, c2)
        k2 = velocity_array(s + 0.5 * dt * k1, c2)
        k3 = velocity_array(s + 0.5 * dt * k2, c2)
        k4 = velocity_array(s + dt * k3, c2)
        out = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    _check_positive(out)
    return out


def leapfrog_array(s: np.ndarray, c2, dt: float) -> np.ndarray:
    """Kick-drift-kick in (q, r); symplectic for dq- ^ dr- + dq+ ^ dr+."""
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        q = 0.5 * np.log(s[..., :2])
        r = s[..., 2:]

        def force(q):
            v = np.exp(2 * q)
            h = c2 * np.exp(-(q[..., 0] + q[..., 1]))
            return 2 * (h[..., None] - 2 * v)

        r = r + 0.5 * dt * force(q)
        q = q + dt * r
        r = r + 0.5 * dt * force(q)
        out = np.concatenate([np.exp(2 * q), r], axis=-1)
    _check_positive(out)
    return out


STEPPERS = {"rk4": rk4_array, "leapfrog": leapfrog_array}


def integrate_array(s0: np.ndarray, c2, dt: float, n_steps: int, stride: int = 1, method: str = "rk4"):
    """Integrate (n, 4) or (4,) initial data; returns samples every `stride` steps.

    The result has shape (n_samples, ...) including the initial state.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    step = STEPPERS[method]
    s = np.array(s0, dtype=float)
    _check_positive(s)
    c2 = np.asarray(c2, dtype=float)
    out = [s.copy()]
    for i in range(1, n_steps + 1):
        s = step(s, c2, dt)
        if i % stride == 0:
            out.append(s.copy())
    return np.array(out)


def lax_c4(s: np.ndarray, c2, lam) -> tuple[np.ndarray, np.ndarray]:
    """Embedded (..., 4, 4) matrices of L and M."""
    vm, vp, rm, rp = np.moveaxis(np.asarray(s, dtype=float), -1, 0)
    lam = np.asarray(lam, dtype=complex)
    lb = np.conj(lam)
    h = _h(np.asarray(s, dtype=float), c2)
    sh = np.sqrt(h / 2)
    svm, svp = np.sqrt(vm), np.sqrt(vp)
    shape = np.broadcast(vm, lam).shape
    zl = np.zeros(shape + (2, 2), dtype=complex)
    wl = np.zeros_like(zl)
    zm = np.zeros_like(zl)
    wm = np.zeros_like(zl)
    zl[..., 0, 0] = -0.5j * rm
    wl[..., 0, 0] = lb * svm
    zl[..., 0, 1] = -lb * sh
    zl[..., 1, 0] = lam * sh
    zl[..., 1, 1] = 0.5j * rp
    wl[..., 1, 1] = lam * svp
    wm[..., 0, 0] = -1j * lb * svm
    zm[..., 0, 1] = 1j * lb * sh
    zm[..., 1, 0] = 1j * lam * sh
    wm[..., 1, 1] = 1j * lam * svp
    return embed_pairs(zl, wl), embed_pairs(zm, wm)


def eigen_formula(h1, h2, c2, mu):
    """(a, b) from the closed-form spectrum with the calibrated constants."""
    inner = np.sqrt(np.maximum(h2 + EIG_C2_COEFF * c2 * mu, 0.0))
    a = EIG_PREFACTOR * np.sqrt(h1 + inner)
    b = EIG_PREFACTOR * np.sqrt(np.maximum(h1 - inner, 0.0))
    return a, b


def lax_spectrum_array(s: np.ndarray, c2, lam) -> tuple[np.ndarray, np.ndarray]:
    l, _ = lax_c4(s, c2, lam)
    return skew_spectrum_c4(l)


# ---------------------------------------------------------------- dataclass API


def hamiltonian(s: TodaState, p: TodaParams) -> float:
    return float(hamiltonian_array(s.as_array(), p.C2))


def vector_field(s: TodaState, p: TodaParams) -> np.ndarray:
    """(dq-, dq+, dr-, dr+)."""
    h = s.h(p)
    return np.array([s.r_minus, s.r_plus, 2 * (h - 2 * s.v_minus), 2 * (h - 2 * s.v_plus)])


def vector_field_v(s: TodaState, p: TodaParams) -> np.ndarray:
    """(dv-, dv+, dr-, dr+)."""
    return velocity_array(s.as_array(), p.C2)


def step_rk4(s: TodaState, p: TodaParams, dt: float) -> TodaState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return TodaState.from_array(rk4_array(s.as_array(), p.C2, dt))


def step_leapfrog(s: TodaState, p: TodaParams, dt: float) -> TodaState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return TodaState.from_array(leapfrog_array(s.as_array(), p.C2, dt))


def conserved(s: TodaState, p: TodaParams) -> tuple[float, float, float]:
    h1, h2, c2 = conserved_array(s.as_array(), p.C2)
    return float(h1), float(h2), float(c2)


def mu_from_state(s: TodaState, p: TodaParams, w: WeightPair) -> float:
    """(16 (k^2 - m^2)^2 - H2) / (64 C^2)."""
    _, h2, c2 = conserved(s, p)
    return (w.rect_a - h2) / (64.0 * c2)


@dataclass(frozen=True)
class LaxPair:
    L: Sp2Algebra
    M: Sp2Algebra


def build_lax(s: TodaState, p: TodaParams) -> LaxPair:
    l, m = lax_c4(s.as_array(), p.C2, p.lam)
    return LaxPair(Sp2Algebra.of(QuatMat2.from_c4(l)), Sp2Algebra.of(QuatMat2.from_c4(m)))


@dataclass
class Trajectory:
    ts: np.ndarray
    states: np.ndarray  # (n, 4)
    params: TodaParams
    meta: dict = field(default_factory=dict)

    def state(self, i: int) -> TodaState:
        return TodaState.from_array(self.states[i])

    @property
    def dt(self) -> float:
        return float(self.ts[1] - self.ts[0])

    def conserved(self):
        return conserved_array(self.states, self.params.C2)


def integrate(s0: TodaState, p: TodaParams, dt: float, t_end: float, stride: int = 1, method: str = "rk4") -> Trajectory:
    n = int(round(t_end / dt))
    states = integrate_array(s0.as_array(), p.C2, dt, n, stride=stride, method=method)
    ts = dt * stride * np.arange(states.shape[0])
    return Trajectory(ts, states, p, {"dt": dt, "stride": stride, "method": method})


def relative_drift(x: np.ndarray) -> float:
    """max |x(t) - x(0)| / |x(0)| along axis 0, over all columns."""
    x = np.asarray(x, dtype=float)
    ref = np.abs(x[0])
    return float(np.max(np.abs(x - x[0]) / np.where(ref > 0, ref, 1.0)))


def clifford_equilibrium(w: WeightPair) -> tuple[TodaState, TodaParams]:
    """v- = v+ = (k^2 + m^2)/4, r = 0, C^2 = (k^2 + m^2)^2 / 8."""
    s = (w.k ** 2 + w.m ** 2) / 4.0
    c2 = (w.k ** 2 + w.m ** 2) ** 2 / 8.0
    mu = (w.rect_a - 8.0 * 2 * s * 4 * 2 * s) / (64.0 * c2)
    return TodaState(s, s, 0.0, 0.0), TodaParams.from_c2(c2, mu, w)


TRAJECTORY_COLUMNS = ["t", "v_minus", "v_plus", "r_minus", "r_plus", "H1", "H2", "C2", "mu"]


def trajectory_table(traj: Trajectory) -> np.ndarray:
    """Rows of TRAJECTORY_COLUMNS.

    H1 and H2 use h = C^2/sqrt(v- v+) from the flow parameter.  When weights
    are known, the C2 column is h_D sqrt(v- v+) with h_D fixed by
    H1 = 4(k^2 + m^2), so its drift is a genuine check; mu is then
    (16(k^2 - m^2)^2 - H2)/(64 C^2).  Without weights C2 is the parameter and
    mu is NaN.
    """
    h1, h2, c2 = traj.conserved()
    w = traj.params.weights
    if w is not None:
        vm, vp, rm, rp = traj.states.T
        h_d = (w.h1_target - 4 * vm - 4 * vp - rm * rm - rp * rp) / 4.0
        c2 = h_d * np.sqrt(vm * vp)
        mu = (w.rect_a - h2) / (64.0 * c2)
    else:
        mu = np.full_like(h1, np.nan)
    return np.column_stack([traj.ts, traj.states, h1, h2, c2, mu])
