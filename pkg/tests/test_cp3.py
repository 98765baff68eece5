import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toda_twistor import cp3, quat
from toda_twistor.cp3 import CP3Point, WeightPair

W = WeightPair(1, 2)
CLIFFORD = CP3Point([1, 1, 1, -1j])
seeds = st.integers(0, 2**32 - 1)
angles = st.floats(0, 2 * math.pi)


def test_weights_validation():
    with pytest.raises(ValueError):
        WeightPair(2, 2)
    with pytest.raises(ValueError):
        WeightPair(0, 1)
    with pytest.warns(UserWarning):
        WeightPair(2, 4)
    assert W.rect_a == 144 and W.rect_b == 400 and W.h1_target == 20


def test_point_normalised_and_rejects_zero():
    np.testing.assert_allclose(np.linalg.norm(CLIFFORD.Z), 1.0)
    with pytest.raises(ValueError):
        CP3Point([0, 0, 0, 0])


def test_clifford_invariants():
    t = cp3.invariants(CLIFFORD)
    np.testing.assert_allclose(t.as_tuple(), (0.5, 0, 0.5, 0, 0, 0.75), atol=1e-15)
    assert cp3.invariants(CP3Point([1, 1, 1, 1j])).nu == pytest.approx(-0.75, abs=1e-12)


def test_fixed_point_invariants():
    t = cp3.invariants(CP3Point([1, 0, 0, 0]))
    assert (t.f1, t.f2, t.f4, t.f5, t.nu) == (1, 1, 0, 0, 0)


@given(seeds, angles, angles, angles)
def test_invariants_torus_and_phase_invariant(seed, a, s, t):
    x = CP3Point.random(np.random.default_rng(seed))
    y = x.phase(a).t2_act(s, t)
    np.testing.assert_allclose(cp3.invariants(y).as_tuple(), cp3.invariants(x).as_tuple(), atol=1e-12)


@given(seeds)
def test_conjugation_flips_nu_only(seed):
    x = CP3Point.random(np.random.default_rng(seed))
    a, b = cp3.invariants(x), cp3.invariants(x.conjugate())
    np.testing.assert_allclose(a.as_tuple()[:5], b.as_tuple()[:5], atol=1e-15)
    assert a.nu == pytest.approx(-b.nu, abs=1e-15)


def test_multimoment_identity_and_constant():
    z = cp3.random_unit_c4(np.random.default_rng(0), 5000)
    c, res = cp3.calibrate_nu_constant(z)
    assert c == pytest.approx(1 / 144, abs=1e-12)
    assert res <= 1e-12
    lhs, rhs = cp3.multimoment_lhs_rhs(z)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_quadric_values():
    assert cp3.quadric_value(CP3Point([1, 0, 0, 0]), W) == 0
    assert cp3.quadric_value(CLIFFORD, W) == pytest.approx(0.25 - 0.5j, abs=1e-15)
    for wts in (W, WeightPair(3, 1), WeightPair(-2, 5)):
        assert cp3.quadric_value(CP3Point([0, 0.6, 0, 0.8]), wts) == 0


def test_singular_lines():
    # a coordinate point lies on the three lines through it
    assert cp3.singular_classify(CP3Point([0, 0, 1, 0])).lines() == ["L1", "L3", "L4"]
    assert cp3.singular_classify(CP3Point([0, 0, 1, 1])).lines() == ["L1"]
    assert cp3.singular_classify(CP3Point([1, 0, 0, 1])).lines() == ["L5"]
    rng = np.random.default_rng(0)
    assert all(cp3.singular_classify(CP3Point.random(rng)).free for _ in range(100))


def test_section_clifford_and_near_axis():
    g = cp3.section_sp2(CLIFFORD, W)
    assert quat.unitarity_defect(g) <= 1e-10
    eps = 1e-3
    x = CP3Point([1, 0, eps, 0])
    g = cp3.section_sp2(x, W)
    assert quat.unitarity_defect(g) <= 1e-12
    np.testing.assert_allclose([g.z[0, 0], g.w[0, 0], g.z[1, 0], g.w[1, 0]], x.Z, atol=1e-12)


def test_section_undefined_on_l1_l6():
    with pytest.raises(ValueError, match="section undefined"):
        cp3.section_sp2(CP3Point([0, 0, 1, 1]))
    with pytest.raises(ValueError, match="section undefined"):
        cp3.section_sp2(CP3Point([1, 1, 0, 0]))


@settings(max_examples=100)
@given(seeds)
def test_section_projects_back(seed):
    x = CP3Point.random(np.random.default_rng(seed))
    g = cp3.section_sp2(x)
    assert quat.unitarity_defect(g) <= 1e-12
    assert cp3.project(g).distance(x) <= 1e-12


@given(seeds)
def test_c_f_spectrum_is_weights(seed):
    x = CP3Point.random(np.random.default_rng(seed))
    ev = np.sort(np.abs(quat.eigenvalues(cp3.c_F(x, W)).imag))
    np.testing.assert_allclose(ev, [1, 1, 2, 2], atol=1e-10)


def test_c_f_at_basepoint_orbit():
    x = CP3Point([1, 0, 1, 0]).t2_act(0.3, 1.1)
    ev = np.sort(np.abs(quat.eigenvalues(cp3.c_F(x, W)).imag))
    np.testing.assert_allclose(ev, [1, 1, 2, 2], atol=1e-10)
