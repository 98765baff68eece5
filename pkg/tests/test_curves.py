import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import spectral_toda_residual
from toda_twistor import atlas, cp3, curves, quat, toda
from toda_twistor.cp3 import CP3Point, WeightPair
from toda_twistor.curves import AngleField, SuperminimalCurve

W = WeightPair(1, 2)
R2 = 1 / math.sqrt(2)
seeds = st.integers(0, 2**32 - 1)
zs = st.complex_numbers(min_magnitude=0.2, max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def perturbed(n, eps=0.1):
    return AngleField.from_functions(
        n, lambda x, y: (1 + eps * np.sin(x) * np.cos(y)) * R2, lambda x, y: (1 + eps * np.cos(x + y)) * R2
    )


# ------------------------------------------------------------ PDE and geometry


def test_constant_clifford_field_solves_toda():
    a = AngleField.constant(16, R2, R2)
    assert curves.toda_pde_residual(a).max_abs <= 1e-13
    assert np.max(np.abs(curves.gauss_curvature(a))) <= 1e-13


def test_constant_field_08_residual():
    a = AngleField.constant(8, 0.8, 0.8)
    r = curves.toda_pde_residual(a)
    # the potential 4(3a^2 + a^2 - 2)/a = 4(4 * 0.64 - 2)/0.8
    np.testing.assert_allclose(r.minus, 2.8, atol=1e-12)
    np.testing.assert_allclose(r.plus, 2.8, atol=1e-12)


def test_gauss_curvature_values():
    np.testing.assert_allclose(curves.gauss_curvature(AngleField.constant(4, 0.5, 0.5)), 2.0, atol=1e-14)
    np.testing.assert_allclose(curves.gauss_curvature(AngleField.constant(4, 0.6, 0.8)), 0.0, atol=1e-14)


def test_second_fundamental_form():
    ii1, ii2, dbar = curves.second_ff_magnitudes(AngleField.constant(4, R2, R2))
    np.testing.assert_allclose(ii1, 0.0, atol=1e-15)
    np.testing.assert_allclose(ii2, 1 / math.sqrt(3), atol=1e-14)
    np.testing.assert_allclose(dbar, math.sqrt(2) / 3, atol=1e-14)
    _, _, dbar0 = curves.second_ff_magnitudes(AngleField.constant(4, math.sqrt(2 / 3), 0.5))
    np.testing.assert_allclose(dbar0, 0.0, atol=1e-14)
    _, ii2p, _ = curves.second_ff_magnitudes(perturbed(16, 0.5))
    assert np.min(ii2p) > 0


def test_field_validation():
    with pytest.raises(ValueError):
        AngleField.constant(4, -0.1, 0.5)


def test_laplacian_second_order_against_spectral():
    errs = []
    for n in (32, 64, 128):
        a = perturbed(n)
        r = curves.toda_pde_residual(a)
        sm, sp = spectral_toda_residual(a.alpha_minus, a.alpha_plus, a.Lx, a.Ly)
        errs.append(max(np.max(np.abs(r.minus - sm)), np.max(np.abs(r.plus - sp))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(o - 2.0) <= 0.1 for o in orders)


def test_non_solution_residual_persists_under_refinement():
    res = [curves.toda_pde_residual(perturbed(n, 0.3)).max_abs for n in (16, 32, 64)]
    assert min(res) > 0.5
    assert abs(res[-1] - res[-2]) < 0.05 * res[-1]


def test_grid_round_trip(tmp_path):
    a = perturbed(8)
    curves.save_grid(a, tmp_path / "g.json")
    b = curves.load_grid(tmp_path / "g.json")
    np.testing.assert_array_equal(a.alpha_minus, b.alpha_minus)
    np.testing.assert_array_equal(a.alpha_plus, b.alpha_plus)
    assert (a.Lx, a.Ly) == (b.Lx, b.Ly)


# ------------------------------------------------------------ Bonnet form


def test_eta_constant_field():
    a = AngleField.constant(8, R2, R2)
    ex, ey = curves.bonnet_eta_field(a)
    assert np.max(np.abs(ex - ex[0, 0])) == 0 and np.max(np.abs(ey - ey[0, 0])) == 0
    x, _ = curves.bonnet_eta(a, 0, 0)
    np.testing.assert_allclose(np.diag(x.z), 0.0, atol=1e-15)
    assert np.max(curves.flatness_residual(a)) <= 1e-14


@given(seeds)
def test_eta_is_skew(seed):
    rng = np.random.default_rng(seed)
    a = perturbed(8, float(rng.uniform(0, 0.4)))
    i, j = rng.integers(0, 8, size=2)
    ex, ey = curves.bonnet_eta(a, int(i), int(j))  # validated skew on construction
    assert quat.eigenvalues(ex).real.max() <= 1e-12


def test_eta_off_diagonal_scales_linearly():
    a = perturbed(8)
    x1, _ = curves.bonnet_eta(a, 2, 3)
    x2, _ = curves.bonnet_eta(a, 2, 3, scale=2.5)
    np.testing.assert_allclose(x2.z[0, 1], 2.5 * x1.z[0, 1])
    np.testing.assert_allclose(x2.w, 2.5 * x1.w)
    np.testing.assert_allclose(np.diag(x2.z), np.diag(x1.z))


def test_flatness_tracks_toda():
    gaps = []
    for n in (16, 32, 64):
        a = perturbed(n)
        gaps.append(np.max(np.abs(curves.flatness_residual(a) - curves.flatness_from_toda(curves.toda_pde_residual(a)))))
    assert math.log2(gaps[1] / gaps[2]) >= 1.8
    # the flatness defect of a non-solution does not vanish
    assert np.max(curves.flatness_residual(perturbed(64))) > 0.1


# ------------------------------------------------------------ superminimal curves


def test_theta_polynomial_example():
    c = SuperminimalCurve("theta", f=([0, 0, 1], [1]), g=([0, 1], [1]))
    for z in (0.5, 1 + 1j, -2.0):
        x = curves.superminimal_eval(c, z)
        assert x.distance(CP3Point([1, 0, z, z])) <= 1e-12


@settings(max_examples=30)
@given(zs)
def test_theta_is_horizontal(z):
    c = SuperminimalCurve("theta", f=([1, 0, 2, 1], [1, 1]), g=([0, 1, 0.5], [1]))
    try:
        assert curves.horizontality_residual(c, z) <= 1e-10
    except ValueError:
        pass  # branch point of g


def test_theta_errors():
    c = SuperminimalCurve("theta", f=([0, 1], [1]), g=([0, 0, 1], [1]))
    with pytest.raises(ValueError, match="branch point"):
        curves.homogeneous(c, 0.0)
    with pytest.raises(ValueError):
        SuperminimalCurve("theta", f=([0, 1], [1]), g=([2], [1]))


@given(zs, st.sampled_from([(1, 2), (3, 1), (2, 5)]))
def test_rescaled_phi_and_psi_are_superminimal(z, km):
    k, m = km
    w = WeightPair(k, m)
    for c in (SuperminimalCurve("phi_C", 0.7, k, m, rescaled=True), SuperminimalCurve("psi_C", 0.7, k, m)):
        assert curves.quadric_residual(c, z, w) <= 1e-12
        assert curves.horizontality_residual(c, z) <= 1e-12


def test_displayed_phi_is_not_superminimal():
    c = SuperminimalCurve("phi_C", 1.0, 1, 2)
    assert curves.quadric_residual(c, 1.0) > 1e-2
    assert curves.horizontality_residual(c, 1.0) > 1e-2


@given(zs, st.floats(0, 2 * math.pi))
def test_phi_equivariance(z, theta):
    c = SuperminimalCurve("phi_C", 0.7, 1, 2, rescaled=True)
    lhs = curves.superminimal_eval(c, np.exp(1j * theta) * z)
    rhs = curves.superminimal_eval(c, z).t2_act(-theta * c.k, -theta * c.m)
    assert lhs.distance(rhs) <= 1e-10


def test_phi_projective_limit_at_zero():
    c = SuperminimalCurve("phi_C", 1.0, 1, 2, rescaled=True)
    assert curves.superminimal_eval(c, 0.0).distance(CP3Point([0, 0, 1, 0])) <= 1e-14
    assert curves.superminimal_eval(c, 1e-6).distance(CP3Point([0, 0, 1, 0])) <= 1e-5


# ------------------------------------------------------------ reconstruction


def test_clifford_reconstruction_is_a_torus_orbit():
    s, p = toda.clifford_equilibrium(W)
    tr = toda.integrate(s, p, 1e-3, 4.0)
    path = curves.reconstruct_u1_curve(tr.states, tr.ts, p, curves.diagonalizing_frame(s, p, W))
    inv = cp3.invariants_array(path.points)
    for key in ("f1", "f2", "f4", "f5", "nu"):
        assert np.ptp(inv[key]) <= 1e-9
    out = atlas.closed_form_array(path.points, W)
    am, ap = curves.angle_functions(out["p"], out["h"])
    np.testing.assert_allclose(am, R2, atol=1e-9)
    np.testing.assert_allclose(ap, R2, atol=1e-9)
    assert path.unitarity_defect() <= 1e-12


@settings(max_examples=5)
@given(seeds)
def test_reconstruction_round_trip(seed):
    s0, c2, mu = atlas.sample_d_interior(np.random.default_rng(seed), W, 1)
    p = toda.TodaParams.from_c2(float(c2[0]), float(mu[0]), W)
    s = toda.TodaState.from_array(s0[0])
    tr = toda.integrate(s, p, 1e-3, 2.0)
    phi0 = curves.diagonalizing_frame(s, p, W)
    l, _ = toda.lax_c4(s.as_array(), p.C2, p.lam)
    e = quat.embed_c4(phi0)
    np.testing.assert_allclose(e @ l @ e.conj().T, quat.embed_c4(W.xi), atol=1e-10)
    path = curves.reconstruct_u1_curve(tr.states, tr.ts, p, phi0)
    assert np.max(np.abs(curves.path_p_values(path, W) - path.states)) <= 1e-6
    assert path.unitarity_defect() <= 1e-8
    assert curves.frame_table(path).shape[1] == len(curves.FRAME_COLUMNS)


def test_reconstruction_step_too_large():
    s0, c2, mu = atlas.sample_d_interior(np.random.default_rng(0), W, 1)
    p = toda.TodaParams.from_c2(float(c2[0]), float(mu[0]), W)
    s = toda.TodaState.from_array(s0[0])
    tr = toda.integrate(s, p, 1e-3, 20.0, stride=1000)
    with pytest.raises(ValueError, match="step too large"):
        curves.reconstruct_u1_curve(tr.states, tr.ts, p, curves.diagonalizing_frame(s, p, W))
