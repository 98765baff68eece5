"""Desk-scale property suite behind the `verify` command.

Each property returns (passed, detail).  `fault` switches in a known-wrong
ingredient so that the suite can be shown to catch it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import atlas, cp3, curves, quat, toda

FAULTS = ("h2-q", "closed-form-swap", "section-sign")


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _rand_mat(rng, n):
    return rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2)), rng.normal(size=(n, 2, 2)) + 1j * rng.normal(
        size=(n, 2, 2)
    )


def prop_quaternion_norm(rng, scale, fault):
    worst = 0.0
    for _ in range(50 * scale):
        p = quat.Quaternion(*rng.normal(size=4))
        q = quat.Quaternion(*rng.normal(size=4))
        worst = max(worst, abs((p * q).norm() - p.norm() * q.norm()))
    return worst <= 1e-12, f"max | |pq| - |p||q| | = {worst:.2e}"


def prop_embedding(rng, scale, fault):
    za, wa = _rand_mat(rng, 20 * scale)
    zb, wb = _rand_mat(rng, 20 * scale)
    worst = 0.0
    for i in range(za.shape[0]):
        a, b = quat.QuatMat2(za[i], wa[i]), quat.QuatMat2(zb[i], wb[i])
        worst = max(worst, np.max(np.abs(quat.embed_c4(a @ b) - quat.embed_c4(a) @ quat.embed_c4(b))))
        worst = max(worst, np.max(np.abs(quat.embed_c4(a.dagger()) - quat.embed_c4(a).conj().T)))
    return worst <= 1e-12, f"homomorphism defect {worst:.2e}"


def prop_spectrum(rng, scale, fault):
    z, w = _rand_mat(rng, 20 * scale)
    worst = 0.0
    for i in range(z.shape[0]):
        m = quat.QuatMat2(z[i], w[i])
        x = quat.Sp2Algebra.of(m - m.dagger())
        ours = np.sort(quat.eigenvalues(x).imag)
        dense = np.sort(np.linalg.eigvals(quat.embed_c4(x)).imag)
        worst = max(worst, np.max(np.abs(ours - dense)) / max(1.0, np.max(np.abs(dense))))
    return worst <= 1e-10, f"biquadratic vs dense {worst:.2e}"


def prop_invariants(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    worst = 0.0
    for _ in range(50 * scale):
        x = cp3.CP3Point.random(rng)
        y = x.phase(rng.uniform(0, 6.3)).t2_act(rng.uniform(0, 6.3), rng.uniform(0, 6.3))
        worst = max(worst, np.max(np.abs(np.subtract(cp3.invariants(x).as_tuple(), cp3.invariants(y).as_tuple()))))
        worst = max(worst, abs(cp3.quadric_value(x, w)) - abs(cp3.quadric_value(y, w)))
    return worst <= 1e-12, f"torus/phase invariance defect {worst:.2e}"


def prop_multimoment(rng, scale, fault):
    z = cp3.random_unit_c4(rng, 1000 * scale)
    lhs, rhs = cp3.multimoment_lhs_rhs(z)
    c, _ = cp3.calibrate_nu_constant(z)
    err = float(np.max(np.abs(lhs - rhs)))
    ok = err <= 1e-10 and abs(c - cp3.NU_CONSTANT) <= 1e-12
    return ok, f"identity residual {err:.2e}, fitted c = {c:.15f}"


def _closed(z, w, fault):
    if fault == "closed-form-swap":
        # the printed reading with k and m exchanged
        return atlas.closed_form_array(z, cp3.WeightPair(w.m, w.k))
    return atlas.closed_form_array(z, w)


def prop_two_path(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    z = cp3.random_unit_c4(rng, 1000 * scale)
    a = atlas.conjugation_array(z, w)
    if fault == "section-sign":
        # drop the sign that makes the section unitary
        z2 = z.copy()
        zz, ww = cp3._section_c4(z2)
        zz[:, 1, 1] *= -1
        ww[:, 1, 1] *= -1
        g = quat.embed_pairs(zz, ww)
        bad = np.max(np.abs(np.swapaxes(g.conj(), -1, -2) @ g - np.eye(4)))
        return bad <= 1e-10, f"unitarity defect of unsigned section {bad:.2e}"
    b = _closed(z, w, fault)
    ok = a["ok"] & b["ok"]
    dev = float(np.max(atlas.relative_deviation(np.column_stack([a["p"], a["h"]])[ok], np.column_stack([b["p"], b["h"]])[ok])))
    return dev <= 1e-9, f"max relative deviation {dev:.2e} over {int(ok.sum())} points"


def prop_delta(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    z = cp3.random_unit_c4(rng, 500 * scale)
    a = atlas.conjugation_array(z, w)["p"]
    b = atlas.conjugation_array(z.conj(), w)["p"]
    d = float(np.nanmax(np.abs(a - b)))
    nu = cp3.invariants_array(z)["nu"] + cp3.invariants_array(z.conj())["nu"]
    return d <= 1e-12 and np.max(np.abs(nu)) <= 1e-15, f"p(delta x) - p(x) = {d:.2e}"


def prop_rectangle(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    z = cp3.random_unit_c4(rng, 2000 * scale)
    out = _closed(z, w, fault)
    ok = out["ok"]
    inside = atlas.in_rectangle(out["H2"][ok], 64 * out["C2"][ok], w, 1e-8)
    return bool(np.all(inside)), f"containment rate {float(np.mean(inside)):.6f}"


def prop_conservation(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    n = 5 * scale
    s0, c2, _ = atlas.sample_d_interior(rng, w, n)
    traj = toda.integrate_array(s0, c2, 1e-3, 2000 * scale, stride=100)
    h2_fn = toda.H2_CANDIDATES["q" if fault == "h2-q" else "vh"]
    h1, _, _ = toda.conserved_array(traj, c2)
    h2 = h2_fn(traj, c2)
    cd = atlas.implied_c2(traj, w)
    drift = max(toda.relative_drift(h1), toda.relative_drift(h2), toda.relative_drift(cd))
    return drift <= 1e-8, f"max relative drift (H1, H2, C2) {drift:.2e}"


def prop_isospectral(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    s0, c2, mu = atlas.sample_d_interior(rng, w, 3 * scale)
    lam = np.exp(1j * np.arccos(mu) / 4)
    traj = toda.integrate_array(s0, c2, 1e-3, 2000, stride=200)
    a, b = toda.lax_spectrum_array(traj, c2, lam)
    hi, lo = max(abs(w.k), abs(w.m)), min(abs(w.k), abs(w.m))
    drift = float(max(np.max(np.abs(a - hi)), np.max(np.abs(b - lo))))
    return drift <= 1e-8, f"spectrum of L vs weights: {drift:.2e}"


def prop_l4(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    z = atlas.sample_T(rng, w, 4 * scale)
    out = atlas.closed_form_array(z, w)
    traj = toda.integrate_array(out["p"], out["C2"], 1e-3, 2000, stride=100)
    d = float(max(np.max(np.abs(traj[..., 0] - traj[..., 1])), np.max(np.abs(traj[..., 2] - traj[..., 3]))))
    return d <= 1e-10, f"l4 symmetry defect {d:.2e}"


def prop_quadric(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    z = cp3.random_unit_c4(rng, 500 * scale)
    c, res = atlas.calibrate_quadric_scale(z, w)
    q = atlas.sample_quadric(rng, w, 50 * scale)
    vm = atlas.conjugation_array(q, w)["p"][:, 0]
    ok = abs(c - atlas.QUADRIC_SCALE) <= 1e-12 and res <= 1e-10 and np.nanmax(np.abs(vm)) <= 1e-10
    return ok, f"c_q = {c:.15f}, max v- on quadric {np.nanmax(np.abs(vm)):.2e}"


def prop_pde(rng, scale, fault):
    a = curves.AngleField.constant(16 * scale, 1 / math.sqrt(2), 1 / math.sqrt(2))
    r0 = curves.toda_pde_residual(a).max_abs
    k0 = float(np.max(np.abs(curves.gauss_curvature(a))))
    eps = 0.1
    b = curves.AngleField.from_functions(
        32, lambda x, y: (1 + eps * np.sin(x) * np.cos(y)) / math.sqrt(2), lambda x, y: (1 + eps * np.cos(x + y)) / math.sqrt(2)
    )
    gap = float(np.max(np.abs(curves.flatness_residual(b) - curves.flatness_from_toda(curves.toda_pde_residual(b)))))
    ok = r0 <= 1e-12 and k0 <= 1e-12 and gap <= 0.05
    return ok, f"constant-solution residual {r0:.1e}, curvature {k0:.1e}, flatness gap {gap:.2e}"


def prop_reconstruction(rng, scale, fault):
    w = cp3.WeightPair(1, 2)
    s0, c2, mu = atlas.sample_d_interior(rng, w, 1)
    p = toda.TodaParams.from_c2(float(c2[0]), float(mu[0]), w)
    s = toda.TodaState.from_array(s0[0])
    tr = toda.integrate(s, p, 1e-3, 2.0 * scale)
    path = curves.reconstruct_u1_curve(tr.states, tr.ts, p, curves.diagonalizing_frame(s, p, w))
    pv = _closed(path.points, w, fault)["p"]
    dev = float(np.max(np.abs(pv - path.states)))
    return dev <= 1e-6 and path.unitarity_defect() <= 1e-8, f"round-trip deviation {dev:.2e}"


PROPERTIES: list[tuple[str, Callable]] = [
    ("quaternion_norm_multiplicative", prop_quaternion_norm),
    ("embedding_homomorphism", prop_embedding),
    ("biquadratic_spectrum", prop_spectrum),
    ("torus_invariance", prop_invariants),
    ("multimoment_identity", prop_multimoment),
    ("two_path_p", prop_two_path),
    ("delta_invariance", prop_delta),
    ("rectangle_containment", prop_rectangle),
    ("conservation", prop_conservation),
    ("isospectrality", prop_isospectral),
    ("l4_invariance", prop_l4),
    ("quadric_scale", prop_quadric),
    ("pde_checks", prop_pde),
    ("reconstruction_round_trip", prop_reconstruction),
]


def run_all(seed: int = 0, quick: bool = False, fault: Optional[str] = None) -> list[PropertyResult]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    scale = 1 if quick else 3
    results = []
    for i, (name, fn) in enumerate(PROPERTIES):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        try:
            passed, detail = fn(rng, scale, fault)
        except Exception as exc:  # a crash counts as a failed property
            passed, detail = False, f"error: {exc}"
        results.append(PropertyResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results
