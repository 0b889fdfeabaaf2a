import numpy as np
import pytest

from forgedit import fixtures
from forgedit.diffusion import NoiseSample, ddim_step
from forgedit.editor import (
    EditRequest,
    SweepSpec,
    Thresholds,
    auto_workflow,
    edit,
    score_candidate,
    sweep,
)
from forgedit.errors import ArgumentError
from forgedit.finetune import FinetuneConfig, joint_finetune
from forgedit.forgetting import builtin_strategy
from forgedit.imaging import image_to_latent, latent_to_image
from forgedit.schedule import NoiseSchedule
from forgedit.unet import DEFAULT_LAYOUT, Denoiser, init_params

SCHED = NoiseSchedule.cosine()
FAST = dict(ddim_steps=6, guidance_scale=7.5, seed=3)


@pytest.fixture(scope="module")
def encoder():
    return fixtures.default_encoder()


@pytest.fixture(scope="module")
def run(encoder):
    item = fixtures.edit_fixture()
    cfg = FinetuneConfig(min_steps=1, max_steps=4, loss_threshold=0.0, batch_repeat=4, seed=9)
    return joint_finetune(
        image_to_latent(item.image), item.caption, init_params(DEFAULT_LAYOUT, seed=2), cfg,
        sched=SCHED, encoder=encoder,
    )


TARGET = "a red square right on gray"


class TestSweepSpec:
    def test_cardinalities(self):
        assert len(SweepSpec.subtraction(False).grid()) == 9
        assert len(SweepSpec.subtraction(True).grid()) == 15
        assert len(SweepSpec.projection().grid()) == 12

    def test_grid_values(self):
        plain = SweepSpec.subtraction(False).gammas
        assert plain[0] == 0.8 and plain[-1] == 1.6
        np.testing.assert_allclose(np.diff(plain), 0.1, atol=1e-12)
        forget = SweepSpec.subtraction(True).gammas
        assert forget[0] == 0.0 and forget[-1] == 1.4
        proj = SweepSpec.projection()
        assert proj.alphas == (0.8, 1.1)
        assert proj.betas[0] == 1.0 and proj.betas[-1] == 1.5

    def test_projection_grid_order(self):
        grid = SweepSpec.projection().grid()
        assert grid[0] == {"alpha": 0.8, "beta": 1.0}
        assert grid[5] == {"alpha": 0.8, "beta": 1.5}
        assert grid[6] == {"alpha": 1.1, "beta": 1.0}

    def test_range_validation(self):
        with pytest.raises(ArgumentError):
            SweepSpec("subtraction", gammas=(2.5,))
        with pytest.raises(ArgumentError):
            SweepSpec("projection", alphas=(0.5,), betas=(1.0,))
        with pytest.raises(ArgumentError):
            SweepSpec("subtraction", gammas=())


class TestEditRequest:
    def test_subtraction_carries_gamma_only(self):
        with pytest.raises(ArgumentError):
            EditRequest(target_prompt="x", combination="subtraction")
        with pytest.raises(ArgumentError):
            EditRequest(target_prompt="x", combination="subtraction", gamma=1.0, alpha=1.0)
        with pytest.raises(ArgumentError):
            EditRequest(target_prompt="x", combination="projection", alpha=1.0, beta=1.0, gamma=0.5)

    def test_projection_forgetting_pairing_enforced(self):
        with pytest.raises(ArgumentError):
            EditRequest(
                target_prompt="x", combination="projection", alpha=1.0, beta=1.0,
                strategy=builtin_strategy("decoderattn"),
            )
        req = EditRequest(
            target_prompt="x", combination="projection", alpha=1.0, beta=1.0,
            strategy=builtin_strategy("decoderattn"), allow_projection_forgetting=True,
        )
        assert req.allow_projection_forgetting


class TestEdit:
    def test_deterministic(self, run, encoder):
        req = EditRequest(target_prompt=TARGET, combination="subtraction", gamma=1.0, **FAST)
        a = edit(run, req, encoder=encoder, sched=SCHED)
        b = edit(run, req, encoder=encoder, sched=SCHED)
        assert a.latent.tobytes() == b.latent.tobytes()
        assert a.image.tobytes() == b.image.tobytes()
        assert (a.fidelity, a.alignment) == (b.fidelity, b.alignment)

    def test_gamma_zero_uses_learned_source_embedding(self, run, encoder):
        from forgedit.editor import combine_embeddings

        req = EditRequest(target_prompt=TARGET, combination="subtraction", gamma=0.0, **FAST)
        e = combine_embeddings(run.learned_embedding, encoder.encode(TARGET), req)
        np.testing.assert_array_equal(e.data, run.learned_embedding.data)

    def test_zero_guidance_equals_unconditional_trajectory(self, run, encoder):
        req = EditRequest(target_prompt=TARGET, combination="subtraction", gamma=1.2,
                          ddim_steps=6, guidance_scale=0.0, seed=17)
        cand = edit(run, req, encoder=encoder, sched=SCHED)
        # reference: plain unconditional DDIM, no target anywhere
        model = Denoiser(run.layout, params=run.learned_params)
        e_uncond = encoder.encode("").data
        x = NoiseSample.draw(17, run.layout.input_shape).data
        seq = SCHED.ddim_timesteps(6)
        for t, t_prev in zip(seq[:-1], seq[1:]):
            x = ddim_step(x, model.predict(x, t, e_uncond), t, t_prev, SCHED)
        assert cand.latent.tobytes() == x.tobytes()

    def test_strategy_none_identical_to_merge_bypass(self, run, encoder):
        req = EditRequest(target_prompt=TARGET, combination="subtraction", gamma=1.0, **FAST)
        merged = edit(run, req, encoder=encoder, sched=SCHED)
        bypass_model = Denoiser(run.layout, params=run.learned_params)
        bypass = edit(run, req, encoder=encoder, sched=SCHED, _model=bypass_model)
        assert merged.latent.tobytes() == bypass.latent.tobytes()

    def test_projection_edit_runs(self, run, encoder):
        req = EditRequest(target_prompt=TARGET, combination="projection", alpha=1.1, beta=1.2, **FAST)
        cand = edit(run, req, encoder=encoder, sched=SCHED)
        assert np.all(np.isfinite(cand.latent))


class TestScore:
    def test_fidelity_zero_for_identical_image(self, run, encoder):
        judge = Denoiser(run.layout, params=run.original_params)
        latent = run.source_latent
        original = latent_to_image(latent)
        fidelity, _ = score_candidate(latent, original, encoder.encode(TARGET), judge, SCHED)
        assert fidelity == 0.0

    def test_fidelity_symmetric(self):
        a = np.random.default_rng(0).random((3, 32, 32))
        b = np.random.default_rng(1).random((3, 32, 32))
        assert np.mean((a - b) ** 2) == np.mean((b - a) ** 2)

    def test_reconstruction_aligns_better_with_learned_source_than_random(self, desk_run, encoder):
        calib = fixtures.calibration()["edit"]
        recon = edit(
            desk_run,
            EditRequest(target_prompt=calib["target_prompt"], combination="subtraction",
                        gamma=0.0, seed=calib["seed"], ddim_steps=calib["ddim_steps"],
                        guidance_scale=calib["guidance_scale"]),
            encoder=encoder, sched=SCHED,
        )
        judge = Denoiser(desk_run.layout, params=desk_run.original_params)
        original = latent_to_image(desk_run.source_latent)
        _, a_src = score_candidate(recon.latent, original, desk_run.learned_embedding, judge, SCHED)
        from forgedit.embedding import PromptEmbedding

        random_e = PromptEmbedding(
            np.random.default_rng(99).standard_normal(desk_run.learned_embedding.data.shape))
        _, a_rand = score_candidate(recon.latent, original, random_e, judge, SCHED)
        assert a_src >= a_rand

    def test_probes_fixed(self, run, encoder):
        judge = Denoiser(run.layout, params=run.original_params)
        args = (run.source_latent, latent_to_image(run.source_latent),
                encoder.encode(TARGET), judge, SCHED)
        assert score_candidate(*args) == score_candidate(*args)


class TestSweep:
    def test_counts_and_order(self, run, encoder):
        cands = sweep(run, TARGET, SweepSpec.subtraction(False), builtin_strategy("none"),
                      seed=3, ddim_steps=4, encoder=encoder, sched=SCHED)
        assert len(cands) == 9
        assert [c.grid_index for c in cands] == list(range(9))
        assert [c.request.gamma for c in cands] == list(SweepSpec.subtraction(False).gammas)

    def test_parallel_matches_serial(self, run, encoder):
        spec = SweepSpec("subtraction", gammas=(0.8, 0.9, 1.0))
        serial = sweep(run, TARGET, spec, seed=3, ddim_steps=4, encoder=encoder, sched=SCHED)
        parallel = sweep(run, TARGET, spec, seed=3, ddim_steps=4, encoder=encoder,
                         sched=SCHED, workers=3)
        for a, b in zip(serial, parallel):
            assert a.latent.tobytes() == b.latent.tobytes()
            assert a.grid_index == b.grid_index

    def test_forgetting_gamma_range_enforced(self, run, encoder):
        with pytest.raises(ArgumentError):
            sweep(run, TARGET, SweepSpec.subtraction(False), builtin_strategy("decoderattn"),
                  seed=3, ddim_steps=4, encoder=encoder, sched=SCHED)

    def test_same_seed_for_every_candidate(self, run, encoder):
        cands = sweep(run, TARGET, SweepSpec("subtraction", gammas=(0.9, 1.1)),
                      seed=42, ddim_steps=4, encoder=encoder, sched=SCHED)
        assert all(c.request.seed == 42 for c in cands)


class TestAutoWorkflow:
    def test_lenient_thresholds_stop_at_stage_one(self, run, encoder):
        result = auto_workflow(run, TARGET, Thresholds(-np.inf, -np.inf),
                               seed=3, ddim_steps=4, encoder=encoder, sched=SCHED)
        assert result.cleared
        assert len(result.trace) == 1
        assert result.trace[0]["strategy"] == "none"
        assert result.trace[0]["decision"] == "accept"
        # best by alignment among all stage-1 candidates
        best = max(result.stage_candidates[0], key=lambda c: c.alignment)
        assert result.candidate.grid_index == best.grid_index

    def test_impossible_thresholds_exhaust_all_stages(self, run, encoder):
        result = auto_workflow(run, TARGET, Thresholds(np.inf, np.inf),
                               seed=3, ddim_steps=4, encoder=encoder, sched=SCHED)
        assert not result.cleared
        assert [s["strategy"] for s in result.trace] == ["none", "decoderattn", "encoderattn"]
        assert result.trace[-1]["decision"] == "exhausted"
        assert result.candidate is not None

    def test_strategy_order_configurable(self, run, encoder):
        result = auto_workflow(run, TARGET, Thresholds(np.inf, np.inf),
                               strategy_order=("encoderattn", "decoderattn"),
                               seed=3, ddim_steps=4, encoder=encoder, sched=SCHED)
        assert [s["strategy"] for s in result.trace] == ["none", "encoderattn", "decoderattn"]

    def test_stage_grids_respect_forgetting_range(self, run, encoder):
        result = auto_workflow(run, TARGET, Thresholds(np.inf, np.inf),
                               seed=3, ddim_steps=4, encoder=encoder, sched=SCHED)
        assert result.trace[0]["gamma_grid"][0] == 0.8
        assert result.trace[1]["gamma_grid"][0] == 0.0
        assert result.trace[1]["candidates"] == 15
