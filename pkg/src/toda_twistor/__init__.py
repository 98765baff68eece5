"""Toda lattice, Lax pairs and torus-invariant J-holomorphic curves in CP^3."""

__version__ = "0.1.0"

from .atlas import DPoint, EdgeClass, RectPoint, classify, p_closed_form, p_conjugation, special_set_detect, u_map
from .cp3 import CP3Point, InvariantTuple, WeightPair, c_F, invariants, quadric_value, section_sp2, singular_classify
from .curves import (
    AngleField,
    FramePath,
    SuperminimalCurve,
    bonnet_eta,
    flatness_residual,
    gauss_curvature,
    reconstruct_u1_curve,
    second_ff_magnitudes,
    superminimal_eval,
    toda_pde_residual,
)
from .quat import QuatMat2, Quaternion, Sp2Algebra, Sp2Group, eigenvalues, embed_c4, quat_mul, reunitarize
from .toda import (
    LaxPair,
    TodaParams,
    TodaState,
    build_lax,
    conserved,
    hamiltonian,
    step_leapfrog,
    step_rk4,
    vector_field,
)
