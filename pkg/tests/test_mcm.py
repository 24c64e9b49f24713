import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arttok.errors import NumericError, ShapeError
from arttok.mcm import LossWeights, McmConfig, McmMask, apply_mask, combine_losses, generate_mask
from arttok.rvq import TokenSequence


class TestGenerateMask:
    def test_empty(self):
        m = generate_mask(0, McmConfig())
        assert m.length == 0 and m.masked_count == 0

    def test_zero_ratio(self):
        assert generate_mask(500, McmConfig(mask_ratio=0.0)).masked_count == 0

    def test_full_ratio_covers_everything(self):
        assert generate_mask(57, McmConfig(mask_ratio=1.0, span_length=4, seed=3)).masked_count == 57

    def test_mean_fraction_over_seeds(self):
        fractions = [generate_mask(1000, McmConfig(0.15, 10, seed=s)).masked_fraction for s in range(200)]
        assert 0.15 <= np.mean(fractions) <= 0.17

    def test_deterministic_and_seed_sensitive(self):
        a = generate_mask(300, McmConfig(seed=4)).flags
        b = generate_mask(300, McmConfig(seed=4)).flags
        c = generate_mask(300, McmConfig(seed=5)).flags
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_runs(self):
        m = McmMask(np.array([1, 1, 0, 0, 1, 0, 1, 1, 1], dtype=bool))
        assert m.runs() == [(0, 2), (4, 5), (6, 9)]

    @settings(max_examples=80, deadline=None)
    @given(
        length=st.integers(1, 400), ratio=st.floats(0.0, 1.0),
        span=st.integers(1, 20), seed=st.integers(0, 2**32 - 1),
    )
    def test_properties(self, length, ratio, span, seed):
        m = generate_mask(length, McmConfig(ratio, span, seed))
        assert m.masked_count == int(m.flags.sum())
        assert m.masked_fraction >= ratio
        if ratio > 0:
            # the final span pushed the count over the threshold
            assert m.masked_count <= ratio * length + span
        for start, stop in m.runs():
            assert stop - start >= min(span, length - start)

    def test_config_validation(self):
        for bad in (dict(mask_ratio=-0.1), dict(mask_ratio=1.5), dict(span_length=0), dict(seed=-1)):
            with pytest.raises(ValueError):
                McmConfig(**bad)


class TestApplyMask:
    def tokens(self):
        return TokenSequence(np.arange(30).reshape(3, 10) % 7, 7)

    def test_no_mask(self):
        t = self.tokens()
        assert apply_mask(t, McmMask(np.zeros(10, dtype=bool))) == t

    def test_all_masked(self):
        out = apply_mask(self.tokens(), McmMask(np.ones(10, dtype=bool)))
        assert (out.codes == 7).all() and out.codebook_size == 8

    def test_single_span(self):
        flags = np.zeros(10, dtype=bool)
        flags[3:7] = True
        t = self.tokens()
        out = apply_mask(t, McmMask(flags), mask_token_id=7)
        for col in range(10):
            if 3 <= col < 7:
                assert (out.codes[:, col] == 7).all()
            else:
                assert (out.codes[:, col] == t.codes[:, col]).all()

    def test_errors(self):
        with pytest.raises(ShapeError):
            apply_mask(self.tokens(), McmMask(np.zeros(9, dtype=bool)))
        with pytest.raises(ValueError):
            apply_mask(self.tokens(), McmMask(np.zeros(10, dtype=bool)), mask_token_id=3)


class TestLosses:
    @pytest.mark.parametrize("caption, mcm, lam, expected", [
        (1.0, 0.0, 0.7, 1.0),
        (0.0, 1.0, 0.7, 0.7),
        (2.0, 3.0, 0.5, 3.5),
    ])
    def test_examples(self, caption, mcm, lam, expected):
        assert combine_losses(caption, mcm, LossWeights(lam)) == expected

    def test_default_weight(self):
        assert LossWeights().mcm_weight == 0.7
        assert combine_losses(0.0, 1.0) == 0.7

    def test_non_finite(self):
        with pytest.raises(NumericError):
            combine_losses(float("nan"), 1.0)
        with pytest.raises(NumericError):
            combine_losses(1.0, float("inf"))

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            LossWeights(-0.1)
