"""Model evaluation: morphological operators and decision functions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ldep import (
    DepModel,
    DimensionMismatch,
    LDepModel,
    LdepError,
    affine_max,
    decision_function,
    decision_values,
    dep_decision,
    dilation,
    erosion,
    predict,
    predict_many,
)
from support import REFERENCE_SCORES

finite_floats = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


def vectors(min_size=1, max_size=6):
    return hnp.arrays(
        np.float64, st.integers(min_size, max_size), elements=finite_floats
    )


@st.composite
def models(draw, dim=None):
    n = dim if dim else draw(st.integers(1, 4))
    n1 = draw(st.integers(1, 4))
    n2 = draw(st.integers(1, 4))
    W = draw(hnp.arrays(np.float64, (n1, n), elements=finite_floats))
    a = draw(hnp.arrays(np.float64, n1, elements=finite_floats))
    M = draw(hnp.arrays(np.float64, (n2, n), elements=finite_floats))
    b = draw(hnp.arrays(np.float64, n2, elements=finite_floats))
    return LDepModel(W=W, a=a, M=M, b=b)


class TestDilation:
    def test_zero_structuring_element_is_max(self):
        assert dilation(np.array([1.0, 2.0, 3.0]), np.zeros(3)) == 3.0

    def test_two_entry_example(self):
        assert dilation(np.array([0.0, 0.0]), np.array([4.532, 0.148])) == 4.532

    def test_single_entry(self):
        assert dilation(np.array([-5.0]), np.array([5.0])) == 0.0

    def test_dimension_mismatch_names_both_lengths(self):
        with pytest.raises(DimensionMismatch) as exc:
            dilation(np.array([1.0, 2.0]), np.array([1.0]))
        assert "2" in str(exc.value) and "1" in str(exc.value)

    def test_empty_input_rejected(self):
        with pytest.raises(LdepError):
            dilation(np.array([]), np.array([]))


class TestErosion:
    def test_zero_structuring_element_is_min(self):
        assert erosion(np.array([1.0, 2.0, 3.0]), np.zeros(3)) == 1.0

    def test_three_entry_example(self):
        b = np.array([-5.532, 2.955, -1.285])
        assert erosion(np.zeros(3), b) == -5.532

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            erosion(np.array([1.0]), np.array([1.0, 2.0]))

    @settings(max_examples=100)
    @given(x=vectors(), shift=finite_floats)
    def test_duality_with_dilation_exact(self, x, shift):
        b = x[::-1].copy() + shift  # arbitrary same-length vector
        assert erosion(x, b) == -dilation(-x, -b)


class TestDepDecision:
    def test_beta_one_is_pure_dilation(self):
        m = DepModel(a=np.array([1.0, -2.0]), b=np.array([9.0, 9.0]), beta=1.0)
        x = np.array([0.5, 0.25])
        assert dep_decision(m, x) == dilation(x, m.a)

    def test_beta_zero_is_pure_erosion(self):
        m = DepModel(a=np.array([9.0, 9.0]), b=np.array([1.0, -2.0]), beta=0.0)
        x = np.array([0.5, 0.25])
        assert dep_decision(m, x) == erosion(x, m.b)

    def test_balanced_mix(self):
        m = DepModel(a=np.array([1.0, 1.0]), b=np.array([-1.0, -1.0]), beta=0.5)
        assert dep_decision(m, np.zeros(2)) == 0.0

    def test_beta_out_of_range_rejected(self):
        with pytest.raises(LdepError):
            DepModel(a=np.zeros(2), b=np.zeros(2), beta=1.5)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            DepModel(a=np.zeros(2), b=np.zeros(3), beta=0.5)


class TestDecisionFunction:
    @pytest.mark.parametrize("point,expected,tol", REFERENCE_SCORES)
    def test_hand_computed_scores(self, ref_model, point, expected, tol):
        assert decision_function(ref_model, np.array(point)) == pytest.approx(
            expected, abs=tol
        )

    def test_identical_halves_cancel(self, rng):
        W = rng.normal(size=(3, 2))
        a = rng.normal(size=3)
        m = LDepModel(W=W, a=a, M=W.copy(), b=a.copy())
        for _ in range(20):
            assert decision_function(m, rng.normal(size=2)) == 0.0

    def test_dimension_mismatch(self, ref_model):
        with pytest.raises(DimensionMismatch):
            decision_function(ref_model, np.array([1.0, 2.0, 3.0]))

    def test_affine_max_matches_manual(self, ref_model):
        x = np.array([0.3, -0.7])
        assert affine_max(ref_model.W, ref_model.a, x) == float(
            np.max(ref_model.W @ x + ref_model.a)
        )


class TestPredict:
    def test_positive_point(self, ref_model):
        assert predict(ref_model, np.array([0.0, 0.0])) == 1

    def test_negative_point(self, ref_model):
        assert predict(ref_model, np.array([-0.4, 0.3])) == -1

    def test_zero_score_maps_to_plus_one(self, rng):
        W = rng.normal(size=(2, 2))
        a = rng.normal(size=2)
        m = LDepModel(W=W, a=a, M=W.copy(), b=a.copy())  # score is exactly 0
        assert predict(m, rng.normal(size=2)) == 1

    def test_vectorized_forms_match_scalar(self, ref_model, rng):
        X = rng.normal(size=(40, 2))
        taus = decision_values(ref_model, X)
        labels = predict_many(ref_model, X)
        for i, x in enumerate(X):
            tau = decision_function(ref_model, x)
            # The batched path may accumulate in a different order, so
            # agreement is to rounding, not bitwise.
            assert taus[i] == pytest.approx(tau, rel=1e-12, abs=1e-12)
            if abs(tau) > 1e-9:
                assert labels[i] == predict(ref_model, x)
            assert labels[i] == (1 if taus[i] >= 0 else -1)


class TestModelValidation:
    def test_row_and_length_consistency(self):
        with pytest.raises(DimensionMismatch):
            LDepModel(W=np.zeros((2, 2)), a=np.zeros(3), M=np.zeros((1, 2)), b=np.zeros(1))
        with pytest.raises(DimensionMismatch):
            LDepModel(W=np.zeros((2, 2)), a=np.zeros(2), M=np.zeros((1, 3)), b=np.zeros(1))

    def test_non_finite_entries_rejected(self):
        W = np.array([[np.nan, 0.0]])
        with pytest.raises(LdepError):
            LDepModel(W=W, a=np.zeros(1), M=np.zeros((1, 2)), b=np.zeros(1))

    def test_empty_sides_rejected(self):
        with pytest.raises(LdepError):
            LDepModel(
                W=np.zeros((0, 2)), a=np.zeros(0), M=np.zeros((1, 2)), b=np.zeros(1)
            )

    def test_model_arrays_frozen(self, ref_model):
        with pytest.raises(ValueError):
            ref_model.W[0, 0] = 99.0


# Moderate magnitudes keep floating-point cancellation far below the
# 1e-9 invariant tolerances; the properties themselves are exact in
# exact arithmetic.
moderate_floats = st.floats(
    min_value=-100.0, max_value=100.0, allow_nan=False, allow_infinity=False
)


@st.composite
def moderate_models(draw):
    n = draw(st.integers(1, 4))
    n1 = draw(st.integers(1, 4))
    n2 = draw(st.integers(1, 4))
    return LDepModel(
        W=draw(hnp.arrays(np.float64, (n1, n), elements=moderate_floats)),
        a=draw(hnp.arrays(np.float64, n1, elements=moderate_floats)),
        M=draw(hnp.arrays(np.float64, (n2, n), elements=moderate_floats)),
        b=draw(hnp.arrays(np.float64, n2, elements=moderate_floats)),
    )


class TestInvariants:
    @settings(max_examples=150, deadline=None)
    @given(m=moderate_models(), c=moderate_floats, data=st.data())
    def test_bias_shift_cancellation(self, m, c, data):
        shifted = LDepModel(W=m.W, a=m.a + c, M=m.M, b=m.b + c)
        x = data.draw(
            hnp.arrays(np.float64, m.n, elements=moderate_floats)
        )
        assert decision_function(shifted, x) == pytest.approx(
            decision_function(m, x), abs=1e-9
        )

    @settings(max_examples=100, deadline=None)
    @given(m=models(), data=st.data())
    def test_halves_are_midpoint_convex(self, m, data):
        x = data.draw(hnp.arrays(np.float64, m.n, elements=finite_floats))
        y = data.draw(hnp.arrays(np.float64, m.n, elements=finite_floats))
        mid = (x + y) / 2.0
        for A, c in ((m.W, m.a), (m.M, m.b)):
            fx = affine_max(A, c, x)
            fy = affine_max(A, c, y)
            assert affine_max(A, c, mid) <= (fx + fy) / 2.0 + 1e-9 * max(
                1.0, abs(fx), abs(fy)
            )

    @settings(max_examples=100, deadline=None)
    @given(
        m=moderate_models(),
        s=st.floats(min_value=1e-3, max_value=1e3, allow_nan=False),
        data=st.data(),
    )
    def test_positive_scaling_preserves_prediction(self, m, s, data):
        x = data.draw(hnp.arrays(np.float64, m.n, elements=moderate_floats))
        scaled = LDepModel(W=s * m.W, a=s * m.a, M=s * m.M, b=s * m.b)
        tau = decision_function(m, x)
        f = affine_max(m.W, m.a, x)
        g = affine_max(m.M, m.b, x)
        assert decision_function(scaled, x) == pytest.approx(
            s * tau, rel=1e-9, abs=1e-9 * s * max(1.0, abs(f), abs(g))
        )
        # Sign comparison is only meaningful away from the boundary noise.
        if abs(tau) > 1e-9 * max(1.0, abs(f), abs(g)):
            assert predict(scaled, x) == predict(m, x)

    @settings(max_examples=100, deadline=None)
    @given(m=models(), data=st.data())
    def test_predict_is_sign_of_decision(self, m, data):
        x = data.draw(hnp.arrays(np.float64, m.n, elements=finite_floats))
        tau = decision_function(m, x)
        assert predict(m, x) == (1 if tau >= 0 else -1)
