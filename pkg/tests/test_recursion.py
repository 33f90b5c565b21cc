"""Tree recursion iteration, fixpoints, and the stability spectrum."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import models, recursion
from spinlab.errors import StructureError

ISING = models.potts_model(2, 0.1)
COL3 = models.colorings_model(3)


def normalization(model, R, C):
    return float(R @ model.B @ C)


# ----------------------------------------------------------------------
# single step
# ----------------------------------------------------------------------

def test_bp_step_direction_oracle():
    # hand-computed: B = [[.1,1],[1,.1]], C = (1, 0) => B C = (.1, 1),
    # so the unnormalized update is R' = (.01, 1) at delta = 3 and the
    # ratio R'_1 / R'_2 must be 0.01 regardless of normalization.
    R0 = np.array([0.5, 0.5])
    C0 = np.array([1.0, 0.0])
    R1, C1 = recursion.bp_step(ISING, 3, R0, C0)
    assert R1[0] / R1[1] == pytest.approx(0.01, rel=1e-12)
    # C' = (B R0)^2 with equal entries: ratio exactly 1
    assert C1[0] / C1[1] == pytest.approx(1.0, rel=1e-12)


def test_bp_step_normalizes():
    rng = np.random.default_rng(7)
    R, C = rng.uniform(0.1, 1, 3), rng.uniform(0.1, 1, 3)
    Rn, Cn = recursion.bp_step(COL3, 4, R, C)
    assert normalization(COL3, Rn, Cn) == pytest.approx(1.0, abs=1e-12)


def test_bp_step_rejects_negative_messages():
    with pytest.raises(ValueError):
        recursion.bp_step(ISING, 3, np.array([-0.1, 1.0]), np.array([1.0, 1.0]))


def test_uniform_is_fixed_for_potts():
    # symmetric matrices with constant row sums fix the uniform direction
    R = np.full(3, 1.0)
    C = np.full(3, 1.0)
    R0, C0 = recursion._normalize_pair(COL3.B, R, C)
    R1, C1 = recursion.bp_step(COL3, 5, R0, C0)
    np.testing.assert_allclose(R1, R0, rtol=1e-12)
    np.testing.assert_allclose(C1, C0, rtol=1e-12)


# ----------------------------------------------------------------------
# fixpoints
# ----------------------------------------------------------------------

def test_find_fixpoint_certifies_uniform():
    fp = recursion.find_fixpoint(models.potts_model(3, 0.6), 4)
    assert fp.certified
    assert fp.residual <= 1e-12
    assert normalization(models.potts_model(3, 0.6), fp.R, fp.C) == \
        pytest.approx(1.0, abs=1e-10)
    # uniform: all entries equal on both sides
    assert np.ptp(fp.R) <= 1e-10 and np.ptp(fp.C) <= 1e-10


def test_multistart_finds_the_ising_pair():
    # below the threshold the two dominant fixpoints are swaps of each
    # other, so dedup keeps exactly one
    fps = recursion.find_fixpoints_multistart(ISING, 3, n_starts=20, seed=1)
    assert len(fps) == 1
    fp = fps[0]
    assert fp.certified
    # polarization ratio is the square of the scalar recursion root
    assert max(fp.R) / min(fp.R) == pytest.approx(8.887482193696059 ** 2,
                                                  rel=1e-8)


def test_dedup_swap_symmetry():
    fp = recursion.find_fixpoint(ISING, 3,
                                 init=(np.array([700.0, 1.0]),
                                       np.array([1.0, 700.0])))
    swapped = recursion.Fixpoint(R=fp.C.copy(), C=fp.R.copy(),
                                 residual=fp.residual, delta=fp.delta,
                                 certified=fp.certified)
    assert len(recursion.dedup_fixpoints([fp, swapped])) == 1


def test_fixpoint_to_phase_power_form():
    fp = recursion.find_fixpoint(ISING, 3,
                                 init=(np.array([700.0, 1.0]),
                                       np.array([1.0, 700.0])))
    alpha, beta = recursion.fixpoint_to_phase(fp)
    e = 3 / 2
    expect = fp.R ** e / np.sum(fp.R ** e)
    np.testing.assert_allclose(alpha, expect, rtol=1e-12)
    assert alpha.sum() == pytest.approx(1.0)
    # the swap symmetry shows up as beta = alpha reversed for Ising
    np.testing.assert_allclose(beta, alpha[::-1], rtol=1e-6)


def test_phase_marginals_match_power_form():
    # alpha_i = R_i (B C)_i agrees with the power normalization at a
    # certified fixpoint (both express the same marginal)
    fp = recursion.find_fixpoint(models.potts_model(3, 0.5), 4)
    a1, b1 = recursion.phase_marginals(models.potts_model(3, 0.5), fp)
    a2, b2 = recursion.fixpoint_to_phase(fp)
    np.testing.assert_allclose(a1, a2, atol=1e-9)
    np.testing.assert_allclose(b1, b2, atol=1e-9)
    assert a1.sum() == pytest.approx(1.0, abs=1e-9)


def test_edge_marginal_sums_to_one():
    fp = recursion.find_fixpoint(COL3, 3)
    x = recursion.edge_marginal(COL3, fp)
    assert x.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(np.diag(x) == 0)


# ----------------------------------------------------------------------
# stability
# ----------------------------------------------------------------------

def test_jacobian_radius_closed_form_uniform():
    # uniform fixpoint of Potts: restricted radius (1-B)/(B+q-1)
    for q, B in ((3, 0.6), (4, 0.3), (5, 0.45)):
        m = models.potts_model(q, B)
        fp = recursion.find_fixpoint(m, 6)
        rep = recursion.jacobian_report(m, fp)
        assert rep.restricted_radius == \
            pytest.approx((1 - B) / (B + q - 1), abs=1e-10)


def test_jacobian_spectrum_contains_scaling_pair():
    fp = recursion.find_fixpoint(models.potts_model(3, 0.7), 5)
    rep = recursion.jacobian_report(models.potts_model(3, 0.7), fp)
    spec = np.asarray(rep.spectrum)
    assert spec.shape == (6,)
    assert np.min(np.abs(spec - 1.0)) <= 1e-9
    assert np.min(np.abs(spec + 1.0)) <= 1e-9


def test_jacobian_needs_positive_marginals():
    # a hard zero in a message kills a marginal
    fp = recursion.Fixpoint(R=np.array([1.0, 0.0]), C=np.array([0.3, 0.8]),
                            residual=1.0, delta=3)
    with pytest.raises(StructureError):
        recursion.jacobian_report(ISING, fp)


def test_attractive_verdict_flips_across_threshold():
    # q=3, delta=6: threshold at B = 0.5
    for B, expect in ((0.3, False), (0.55, True)):
        m = models.potts_model(3, B)
        rep = recursion.jacobian_report(m, recursion.find_fixpoint(m, 6), 6)
        assert rep.attractive is expect


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_bp_step_idempotent_normalization(seed):
    rng = np.random.default_rng(seed)
    R, C = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    R1, C1 = recursion.bp_step(COL3, 4, R, C)
    # applying the normalizer again must be the identity
    R2, C2 = recursion._normalize_pair(COL3.B, R1, C1)
    np.testing.assert_allclose(R1, R2, rtol=1e-12)
    np.testing.assert_allclose(C1, C2, rtol=1e-12)
