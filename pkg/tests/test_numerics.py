"""Log-space reductions, weight normalization, ESS, and seeded streams."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obayes.numerics import (
    DegenerateWeightsError,
    RngStream,
    effective_sample_size,
    log_sum_exp,
    log_sum_exp_axis,
    normalize_log_weights,
)

finite_floats = st.floats(min_value=-1e6, max_value=700.0,
                          allow_nan=False, allow_infinity=False)
log_weight_lists = st.lists(
    st.one_of(finite_floats, st.just(-math.inf)), min_size=1, max_size=64)


class TestLogSumExp:
    def test_coin_prior_marginal(self):
        # (0.2 + 0.5 + 0.8) / 3 = 0.5
        xs = np.log([0.2, 0.5, 0.8]) - np.log(3.0)
        assert log_sum_exp(xs) == pytest.approx(math.log(0.5), abs=1e-12)

    def test_single_value_identity(self):
        assert log_sum_exp([3.5]) == pytest.approx(3.5, abs=0)

    def test_all_neg_inf_is_neg_inf(self):
        assert log_sum_exp([-math.inf, -math.inf]) == -math.inf

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty reduction"):
            log_sum_exp([])

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError, match="non-finite input"):
            log_sum_exp([0.0, bad])

    def test_no_overflow_at_large_magnitude(self):
        # naive exp would overflow at 1000
        out = log_sum_exp([1000.0, 1000.0])
        assert out == pytest.approx(1000.0 + math.log(2.0), rel=1e-15)

    @given(log_weight_lists)
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, xs):
        out = log_sum_exp(xs)
        hi = max(xs)
        if hi == -math.inf:
            assert out == -math.inf
        else:
            assert hi <= out <= hi + math.log(len(xs)) + 1e-9

    @given(st.lists(finite_floats, min_size=1, max_size=32),
           st.floats(min_value=-100, max_value=100,
                     allow_nan=False, allow_infinity=False))
    @settings(max_examples=200, deadline=None)
    def test_shift_invariance(self, xs, c):
        shifted = [x + c for x in xs]
        assert log_sum_exp(shifted) == pytest.approx(
            log_sum_exp(xs) + c, abs=1e-9 * max(1.0, abs(c)))

    def test_axis_variant_matches_columns(self):
        arr = np.array([[0.0, -math.inf, 2.0],
                        [1.0, -math.inf, -1.0]])
        out = log_sum_exp_axis(arr, axis=0)
        assert out[0] == pytest.approx(log_sum_exp(arr[:, 0]))
        assert out[1] == -math.inf
        assert out[2] == pytest.approx(log_sum_exp(arr[:, 2]))


class TestNormalizeLogWeights:
    def test_uniform_zeros(self):
        normalized, log_z = normalize_log_weights(np.zeros(4))
        assert np.allclose(normalized, math.log(0.25), atol=1e-12)
        assert log_z == pytest.approx(math.log(4.0), abs=1e-12)

    def test_coin_posterior_weights(self):
        normalized, _ = normalize_log_weights(np.log([0.2, 0.5, 0.8]))
        assert np.allclose(np.exp(normalized),
                           [2 / 15, 5 / 15, 8 / 15], atol=1e-12)

    def test_all_neg_inf_degenerate(self):
        with pytest.raises(DegenerateWeightsError, match="degenerate"):
            normalize_log_weights([-math.inf, -math.inf])

    def test_partial_neg_inf_survives(self):
        normalized, _ = normalize_log_weights([0.0, -math.inf])
        assert np.exp(normalized[0]) == pytest.approx(1.0)
        assert normalized[1] == -math.inf

    @given(log_weight_lists)
    @settings(max_examples=200, deadline=None)
    def test_normalized_sums_to_one(self, lw):
        if max(lw) == -math.inf:
            return
        normalized, log_z = normalize_log_weights(lw)
        assert np.exp(normalized).sum() == pytest.approx(1.0, abs=1e-9)
        assert log_z == pytest.approx(log_sum_exp(lw), abs=1e-9)

    @given(st.lists(finite_floats, min_size=1, max_size=32),
           st.floats(min_value=-50, max_value=50,
                     allow_nan=False, allow_infinity=False))
    @settings(max_examples=100, deadline=None)
    def test_shift_leaves_normalization_fixed(self, lw, c):
        a, _ = normalize_log_weights(lw)
        b, _ = normalize_log_weights([x + c for x in lw])
        assert np.allclose(a, b, atol=1e-9)


class TestEffectiveSampleSize:
    def test_uniform_is_full(self):
        assert effective_sample_size(np.zeros(8)) == pytest.approx(8.0)

    def test_coin_posterior_value(self):
        # 1 / ((2/15)^2 + (5/15)^2 + (8/15)^2) = 225/93
        ess = effective_sample_size(np.log([0.2, 0.5, 0.8]))
        assert ess == pytest.approx(225.0 / 93.0, abs=1e-12)

    def test_single_surviving_weight(self):
        ess = effective_sample_size([0.0, -math.inf, -math.inf])
        assert ess == pytest.approx(1.0)

    @given(log_weight_lists)
    @settings(max_examples=200, deadline=None)
    def test_bounded_by_one_and_s(self, lw):
        if max(lw) == -math.inf:
            return
        ess = effective_sample_size(lw)
        assert 1.0 <= ess <= len(lw) + 1e-9


class TestRngStream:
    def test_same_seed_same_draws(self):
        a = RngStream(5).generator().random(10)
        b = RngStream(5).generator().random(10)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = RngStream(5).generator().random(10)
        b = RngStream(6).generator().random(10)
        assert not np.array_equal(a, b)

    def test_derive_is_deterministic(self):
        a = RngStream(5).derive("child", 3)
        b = RngStream(5).derive("child", 3)
        assert a.stream_id == b.stream_id
        assert np.array_equal(a.generator().random(4), b.generator().random(4))

    def test_derive_labels_distinguish(self):
        root = RngStream(5)
        ids = {root.derive("a").stream_id, root.derive("b").stream_id,
               root.derive("a", 0).stream_id, root.derive("a", 1).stream_id,
               root.derive(0, "a").stream_id}
        assert len(ids) == 5

    def test_derived_stream_independent_of_parent_use(self):
        root = RngStream(11)
        child_first = root.derive("x").generator().random(5)
        root.generator().random(100)  # consuming the parent changes nothing
        child_second = root.derive("x").generator().random(5)
        assert np.array_equal(child_first, child_second)

    def test_string_int_labels_not_conflated(self):
        root = RngStream(5)
        assert root.derive("1").stream_id != root.derive(1).stream_id
