import numpy as np
import pytest

from forgedit.errors import ArgumentError, PathSetMismatchError
from forgedit.forgetting import (
    BUILTIN_STRATEGY_NAMES,
    builtin_strategy,
    custom_strategy,
    merge_parameters,
    parse_strategy_spec,
    strategy_report,
)
from forgedit.unet import (
    DEFAULT_LAYOUT,
    DenoiserParams,
    init_params,
    is_attention_path,
    stage_of_path,
)


@pytest.fixture(scope="module")
def original():
    return init_params(DEFAULT_LAYOUT, seed=1)


@pytest.fixture(scope="module")
def learned(original):
    # a distinct "fine-tuned" tree: every value shifted deterministically
    return DenoiserParams({p: a + 0.25 for p, a in original.items()})


class TestMerge:
    def test_sigma_zero_restores_original_bitwise(self, learned, original):
        for name in BUILTIN_STRATEGY_NAMES:
            strat = builtin_strategy(name, sigma=0.0)
            merged = merge_parameters(learned, original, strat)
            for path, _ in learned.items():
                src = original if strat.forgets(path) else learned
                assert merged[path].tobytes() == src[path].tobytes(), (name, path)

    def test_sigma_one_is_noop(self, learned, original):
        merged = merge_parameters(learned, original, builtin_strategy("encoderattn", sigma=1.0))
        assert merged.bit_equal(learned)

    def test_midpoint_hand_value(self, learned, original):
        strat = builtin_strategy("encoder-keep-none", sigma=0.5)
        merged = merge_parameters(learned, original, strat)
        path = "encoder.2.resnet.w1"
        assert strat.forgets(path)
        np.testing.assert_allclose(merged[path], original[path] + 0.125, atol=1e-12)
        # w_learned=2, w_orig=4, sigma=0.5 -> 3
        assert 0.5 * 2.0 + 0.5 * 4.0 == 3.0

    def test_idempotent_at_sigma_zero(self, learned, original):
        strat = builtin_strategy("decoderattn", sigma=0.0)
        once = merge_parameters(learned, original, strat)
        twice = merge_parameters(once, original, strat)
        assert once.bit_equal(twice)

    def test_path_set_mismatch(self, learned, original):
        entries = {p: a for p, a in original.items() if not p.startswith("encoder.0.proj")}
        smaller = DenoiserParams(entries)
        with pytest.raises(PathSetMismatchError):
            merge_parameters(learned, smaller, builtin_strategy("none"))

    def test_merge_preserves_path_set_and_shapes(self, learned, original):
        merged = merge_parameters(learned, original, builtin_strategy("encoderattn"))
        assert merged.paths() == learned.paths()
        for p, a in merged.items():
            assert a.shape == learned[p].shape

    def test_encoder_and_decoder_strategies_disjoint(self, learned, original):
        enc = builtin_strategy("encoderattn")
        dec = builtin_strategy("decoderattn")
        both = merge_parameters(merge_parameters(learned, original, enc), original, dec)
        for path, _ in learned.items():
            expect_learned = is_attention_path(path) or stage_of_path(path) == "mid"
            src = learned if expect_learned else original
            assert both[path].tobytes() == src[path].tobytes(), path


class TestStrategies:
    def test_none_forgets_nothing(self, learned, original):
        report = strategy_report(learned, original, builtin_strategy("none"))
        assert report.forgotten_total == 0
        assert report.kept_total == len(learned)

    def test_encoderattn_counts_match_enumeration(self, learned, original):
        report = strategy_report(learned, original, builtin_strategy("encoderattn"))
        enc_paths = [p for p in learned.paths() if p.startswith("encoder.")]
        enc_attn = [p for p in enc_paths if is_attention_path(p)]
        assert report.forgotten_total == len(enc_paths) - len(enc_attn)

    def test_partition_every_strategy(self, learned, original):
        for name in BUILTIN_STRATEGY_NAMES:
            report = strategy_report(learned, original, builtin_strategy(name))
            assert report.forgotten_total + report.kept_total == len(learned)

    def test_sigma_zero_zero_delta(self, learned, original):
        report = strategy_report(learned, original, builtin_strategy("decoderattn", sigma=0.0))
        assert report.max_abs_delta_forgotten == 0.0

    def test_builtin_predicates(self):
        s = builtin_strategy("encoderattn")
        assert s.forgets("encoder.1.resnet.w1")
        assert not s.forgets("encoder.1.selfattn.qw")
        assert not s.forgets("encoder.0.crossattn.ow")
        assert not s.forgets("mid.resnet.w1")
        assert not s.forgets("decoder.2.resnet.w1")

        d2 = builtin_strategy("decoder-keep-attn-block2")
        assert not d2.forgets("decoder.2.resnet.w1")
        assert not d2.forgets("decoder.1.selfattn.qw")
        assert d2.forgets("decoder.1.resnet.w1")

        e_none = builtin_strategy("encoder-keep-none")
        assert e_none.forgets("encoder.3.crossattn.kw")
        assert not e_none.forgets("decoder.0.resnet.w1")

        e1 = builtin_strategy("encoder-keep-attn-block1")
        assert not e1.forgets("encoder.1.proj.down_w")
        assert e1.forgets("encoder.0.proj.in_w")

        keep_cross = builtin_strategy("decoder-keep-crossattn")
        assert keep_cross.forgets("decoder.3.selfattn.qw")
        assert not keep_cross.forgets("decoder.3.crossattn.qw")

    def test_mid_never_matched_by_builtins(self, learned):
        for name in BUILTIN_STRATEGY_NAMES:
            s = builtin_strategy(name)
            assert not any(s.forgets(p) for p in learned.paths() if stage_of_path(p) == "mid")

    def test_sigma_validated(self):
        with pytest.raises(ArgumentError):
            builtin_strategy("none", sigma=1.5)
        with pytest.raises(ArgumentError):
            builtin_strategy("not-a-strategy")


class TestSpecStrings:
    def test_builtin_name(self):
        s = parse_strategy_spec("decoderattn")
        assert s.name == "decoderattn" and s.sigma == 0.0

    def test_builtin_with_sigma(self):
        s = parse_strategy_spec("encoderattn;sigma=0.25")
        assert s.sigma == 0.25

    def test_custom_globs(self):
        s = parse_strategy_spec("custom:encoder.*,mid.resnet.*;sigma=0.5")
        assert s.sigma == 0.5
        assert s.forgets("encoder.0.resnet.w1")
        assert s.forgets("mid.resnet.w2")
        assert not s.forgets("mid.selfattn.qw")
        assert not s.forgets("decoder.0.resnet.w1")

    def test_custom_can_target_mid(self, learned, original):
        s = custom_strategy(["mid.*"], sigma=0.0)
        merged = merge_parameters(learned, original, s)
        assert merged["mid.resnet.w1"].tobytes() == original["mid.resnet.w1"].tobytes()
        assert merged["encoder.0.resnet.w1"].tobytes() == learned["encoder.0.resnet.w1"].tobytes()

    def test_bad_specs(self):
        with pytest.raises(ArgumentError):
            parse_strategy_spec("custom:")
        with pytest.raises(ArgumentError):
            parse_strategy_spec("encoderattn;gamma=1")
        with pytest.raises(ArgumentError):
            parse_strategy_spec("encoderattn;sigma=abc")
