"""Editing pass: forgetting merge -> embedding combination -> guided DDIM.

An edit takes a fine-tune run, merges its learned parameters with the
originals per the chosen forgetting strategy, combines the learned source
embedding with the encoded target prompt (vector subtraction or projection),
and runs the deterministic reverse trajectory from seeded noise with
classifier-free guidance at every step.  Sweeps enumerate the hyperparameter
grids; the auto workflow walks sweep stages until proxy-metric thresholds
clear.

Proxy scores (orderings matter, absolute values do not):
  fidelity  = negative mean squared pixel error against the original image
  alignment = negative noise-prediction loss of the candidate under the
              target embedding, averaged over 8 fixed seeded (t, eps) probes,
              judged by the pre-fine-tune parameters
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffusion import NoiseSample, add_noise, cfg_combine, ddim_step, training_loss
from .embedding import PromptEmbedding, vector_projection, vector_subtraction
from .errors import ArgumentError
from .finetune import FinetuneResult
from .forgetting import ForgettingStrategy, builtin_strategy, merge_parameters
from .imaging import latent_to_image
from .schedule import NoiseSchedule
from .text import ToyTextEncoder
from .unet import Denoiser

GUIDANCE_SCALE_DEFAULT = 7.5
DDIM_STEPS_DEFAULT = 50

# Declared sweep ranges; grids are validated against these.
GAMMA_RANGE_PLAIN = (0.8, 1.6)
GAMMA_RANGE_FORGETTING = (0.0, 1.4)
ALPHA_VALUES = (0.8, 1.1)
BETA_RANGE = (1.0, 1.5)
GRID_STEP = 0.1

_PROBE_SEED = 240809
_PROBE_COUNT = 8


def _grid(lo: float, hi: float, step: float = GRID_STEP) -> tuple:
    n = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 10) for i in range(n))


@dataclass(frozen=True)
class EditRequest:
    """One fully specified edit; a candidate is reproducible from this alone."""

    target_prompt: str
    combination: str = "subtraction"  # or "projection"
    strategy: ForgettingStrategy = field(default_factory=lambda: builtin_strategy("none"))
    gamma: float | None = None
    alpha: float | None = None
    beta: float | None = None
    guidance_scale: float = GUIDANCE_SCALE_DEFAULT
    seed: int = 0
    ddim_steps: int = DDIM_STEPS_DEFAULT
    allow_projection_forgetting: bool = False

    def __post_init__(self):
        if self.combination == "subtraction":
            if self.gamma is None or self.alpha is not None or self.beta is not None:
                raise ArgumentError("subtraction carries gamma only")
        elif self.combination == "projection":
            if self.gamma is not None or self.alpha is None or self.beta is None:
                raise ArgumentError("projection carries (alpha, beta) only")
            if self.strategy.name != "none" and not self.allow_projection_forgetting:
                raise ArgumentError(
                    "forgetting is paired with vector subtraction by default; "
                    "set allow_projection_forgetting to override"
                )
        else:
            raise ArgumentError(f"unknown combination {self.combination!r}")

    def grid_point(self) -> dict:
        if self.combination == "subtraction":
            return {"gamma": self.gamma}
        return {"alpha": self.alpha, "beta": self.beta}

    def to_dict(self) -> dict:
        return {
            "target_prompt": self.target_prompt,
            "combination": self.combination,
            "strategy": self.strategy.name,
            "sigma": self.strategy.sigma,
            **self.grid_point(),
            "guidance_scale": self.guidance_scale,
            "seed": self.seed,
            "ddim_steps": self.ddim_steps,
        }


@dataclass(frozen=True)
class CandidateResult:
    latent: np.ndarray
    image: np.ndarray  # (3, 32, 32) in [0, 1]
    request: EditRequest
    fidelity: float
    alignment: float
    grid_index: int | None = None


@dataclass(frozen=True)
class SweepSpec:
    """Hyperparameter grid; defaults reproduce the published ranges at step 0.1."""

    combination: str
    gammas: tuple | None = None
    alphas: tuple | None = None
    betas: tuple | None = None

    def __post_init__(self):
        if self.combination == "subtraction":
            if not self.gammas:
                raise ArgumentError("subtraction sweep needs a non-empty gamma grid")
            lo = min(GAMMA_RANGE_FORGETTING[0], GAMMA_RANGE_PLAIN[0])
            hi = max(GAMMA_RANGE_FORGETTING[1], GAMMA_RANGE_PLAIN[1])
            if any(not lo <= g <= hi for g in self.gammas):
                raise ArgumentError(f"gamma grid outside declared range [{lo}, {hi}]")
        elif self.combination == "projection":
            if not self.alphas or not self.betas:
                raise ArgumentError("projection sweep needs alpha and beta grids")
            if any(not ALPHA_VALUES[0] <= a <= ALPHA_VALUES[-1] for a in self.alphas):
                raise ArgumentError(f"alpha grid outside declared range {ALPHA_VALUES}")
            if any(not BETA_RANGE[0] <= b <= BETA_RANGE[1] for b in self.betas):
                raise ArgumentError(f"beta grid outside declared range {BETA_RANGE}")
        else:
            raise ArgumentError(f"unknown combination {self.combination!r}")

    @classmethod
    def subtraction(cls, forgetting: bool) -> "SweepSpec":
        rng = GAMMA_RANGE_FORGETTING if forgetting else GAMMA_RANGE_PLAIN
        return cls("subtraction", gammas=_grid(*rng))

    @classmethod
    def projection(cls) -> "SweepSpec":
        return cls("projection", alphas=ALPHA_VALUES, betas=_grid(*BETA_RANGE))

    def grid(self) -> list[dict]:
        if self.combination == "subtraction":
            return [{"gamma": g} for g in self.gammas]
        return [{"alpha": a, "beta": b} for a in self.alphas for b in self.betas]

    def to_dict(self) -> dict:
        d = {"combination": self.combination}
        if self.gammas:
            d["gammas"] = list(self.gammas)
        if self.alphas:
            d["alphas"] = list(self.alphas)
            d["betas"] = list(self.betas)
        return d


def combine_embeddings(e_src: PromptEmbedding, e_tgt: PromptEmbedding, req: EditRequest) -> PromptEmbedding:
    if req.combination == "subtraction":
        return vector_subtraction(e_src, e_tgt, req.gamma)
    return vector_projection(e_src, e_tgt, req.alpha, req.beta)


def _probes(sched: NoiseSchedule, shape: tuple) -> list[tuple[int, np.ndarray]]:
    rng = np.random.default_rng(_PROBE_SEED)
    ts = rng.integers(1, sched.T + 1, size=_PROBE_COUNT)
    return [(int(t), rng.standard_normal(shape)) for t in ts]


def score_candidate(
    candidate_latent: np.ndarray,
    original_image: np.ndarray,
    target_embedding: PromptEmbedding,
    judge: Denoiser,
    sched: NoiseSchedule,
) -> tuple[float, float]:
    """(fidelity, alignment) proxies; higher is better for both."""
    cand_img = latent_to_image(candidate_latent)
    diff = cand_img - np.asarray(original_image, dtype=np.float64)
    fidelity = -float(np.mean(diff * diff))
    losses = []
    for t, eps in _probes(sched, candidate_latent.shape):
        xt = add_noise(candidate_latent, eps, t, sched)
        losses.append(training_loss(eps, judge.predict(xt, t, target_embedding.data)))
    return fidelity, -float(np.mean(losses))


def _ddim_edit_trajectory(
    model: Denoiser,
    e: PromptEmbedding,
    e_uncond: PromptEmbedding,
    req: EditRequest,
    sched: NoiseSchedule,
) -> np.ndarray:
    shape = model.layout.input_shape
    x = NoiseSample.draw(req.seed, shape).data
    seq = sched.ddim_timesteps(req.ddim_steps)
    for t, t_prev in zip(seq[:-1], seq[1:]):
        eps_u = model.predict(x, t, e_uncond.data)
        if req.guidance_scale == 0.0:
            eps = eps_u
        else:
            eps_c = model.predict(x, t, e.data)
            eps = cfg_combine(eps_u, eps_c, req.guidance_scale)
        x = ddim_step(x, eps, t, t_prev, sched)
    return x


def edit(
    run: FinetuneResult,
    req: EditRequest,
    *,
    encoder: ToyTextEncoder | None = None,
    sched: NoiseSchedule | None = None,
    _model: Denoiser | None = None,
    _judge: Denoiser | None = None,
    grid_index: int | None = None,
) -> CandidateResult:
    """Run one guided edit and score it."""
    sched = sched or NoiseSchedule.cosine()
    if encoder is None:
        from .fixtures import default_encoder

        encoder = default_encoder()
    model = _model
    if model is None:
        merged = merge_parameters(run.learned_params, run.original_params, req.strategy)
        model = Denoiser(run.layout, params=merged)
    judge = _judge or Denoiser(run.layout, params=run.original_params)
    e_tgt = encoder.encode(req.target_prompt)
    e = combine_embeddings(run.learned_embedding, e_tgt, req)
    e_uncond = encoder.encode("")
    latent = _ddim_edit_trajectory(model, e, e_uncond, req, sched)
    original_image = latent_to_image(run.source_latent)
    fidelity, alignment = score_candidate(latent, original_image, e_tgt, judge, sched)
    return CandidateResult(
        latent=latent,
        image=latent_to_image(latent),
        request=req,
        fidelity=fidelity,
        alignment=alignment,
        grid_index=grid_index,
    )


def _check_gamma_range(spec: SweepSpec, strategy: ForgettingStrategy) -> None:
    if spec.combination != "subtraction":
        return
    lo, hi = GAMMA_RANGE_PLAIN if strategy.name == "none" else GAMMA_RANGE_FORGETTING
    eps = 1e-9
    if any(g < lo - eps or g > hi + eps for g in spec.gammas):
        raise ArgumentError(
            f"gamma grid {spec.gammas} outside the range [{lo}, {hi}] for strategy {strategy.name!r}"
        )


def sweep(
    run: FinetuneResult,
    target_prompt: str,
    spec: SweepSpec,
    strategy: ForgettingStrategy | None = None,
    *,
    seed: int = 0,
    guidance_scale: float = GUIDANCE_SCALE_DEFAULT,
    ddim_steps: int = DDIM_STEPS_DEFAULT,
    encoder: ToyTextEncoder | None = None,
    sched: NoiseSchedule | None = None,
    workers: int = 1,
    allow_projection_forgetting: bool = False,
    progress_cb=None,
) -> list[CandidateResult]:
    """One candidate per grid point, ordered by grid position."""
    strategy = strategy or builtin_strategy("none")
    _check_gamma_range(spec, strategy)
    sched = sched or NoiseSchedule.cosine()
    if encoder is None:
        from .fixtures import default_encoder

        encoder = default_encoder()
    merged = merge_parameters(run.learned_params, run.original_params, strategy)
    model = Denoiser(run.layout, params=merged)
    judge = Denoiser(run.layout, params=run.original_params)
    requests = [
        EditRequest(
            target_prompt=target_prompt,
            combination=spec.combination,
            strategy=strategy,
            guidance_scale=guidance_scale,
            seed=seed,
            ddim_steps=ddim_steps,
            allow_projection_forgetting=allow_projection_forgetting,
            **point,
        )
        for point in spec.grid()
    ]

    done = 0

    def run_one(pair):
        nonlocal done
        i, req = pair
        result = edit(run, req, encoder=encoder, sched=sched, _model=model, _judge=judge, grid_index=i)
        done += 1
        if progress_cb is not None:
            progress_cb(done / len(requests))
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_one, enumerate(requests)))
    return [run_one(p) for p in enumerate(requests)]


@dataclass(frozen=True)
class Thresholds:
    min_fidelity: float
    min_alignment: float


@dataclass
class AutoResult:
    candidate: CandidateResult
    cleared: bool
    trace: list  # one record per stage tried
    stage_candidates: list  # list of candidate lists, parallel to trace

    def trace_dict(self) -> dict:
        return {"cleared": self.cleared, "stages": self.trace}


def auto_workflow(
    run: FinetuneResult,
    target_prompt: str,
    thresholds: Thresholds,
    *,
    strategy_order: tuple = ("decoderattn", "encoderattn"),
    seed: int = 0,
    guidance_scale: float = GUIDANCE_SCALE_DEFAULT,
    ddim_steps: int = DDIM_STEPS_DEFAULT,
    encoder: ToyTextEncoder | None = None,
    sched: NoiseSchedule | None = None,
    workers: int = 1,
    progress_cb=None,
) -> AutoResult:
    """Threshold-automated editing: no-forgetting sweep first, then forgetting
    strategies until a candidate clears both thresholds.

    Returns the best clearing candidate by alignment, or the overall
    best-by-alignment flagged as not cleared once every stage is exhausted.
    """
    stages = [builtin_strategy("none")] + [builtin_strategy(n) for n in strategy_order]
    specs = [SweepSpec.subtraction(forgetting=s.name != "none") for s in stages]
    total = sum(len(spec.grid()) for spec in specs)
    completed = 0
    trace: list[dict] = []
    stage_candidates: list[list[CandidateResult]] = []
    best_overall: CandidateResult | None = None
    for index, (strategy, spec) in enumerate(zip(stages, specs)):
        base = completed

        def stage_progress(frac: float, _base=base, _n=len(spec.grid())) -> None:
            if progress_cb is not None:
                progress_cb((_base + frac * _n) / total)

        candidates = sweep(
            run,
            target_prompt,
            spec,
            strategy,
            seed=seed,
            guidance_scale=guidance_scale,
            ddim_steps=ddim_steps,
            encoder=encoder,
            sched=sched,
            workers=workers,
            progress_cb=stage_progress,
        )
        completed += len(candidates)
        stage_candidates.append(candidates)
        clearing = [
            c
            for c in candidates
            if c.fidelity >= thresholds.min_fidelity and c.alignment >= thresholds.min_alignment
        ]
        stage_best = max(candidates, key=lambda c: c.alignment)
        if best_overall is None or stage_best.alignment > best_overall.alignment:
            best_overall = stage_best
        chosen = max(clearing, key=lambda c: c.alignment) if clearing else None
        trace.append(
            {
                "stage": index,
                "strategy": strategy.name,
                "gamma_grid": list(spec.gammas),
                "candidates": len(candidates),
                "cleared": len(clearing),
                "best_fidelity": max(c.fidelity for c in candidates),
                "best_alignment": stage_best.alignment,
                "decision": "accept" if chosen else "continue",
                "chosen_grid_index": chosen.grid_index if chosen else None,
            }
        )
        if chosen is not None:
            return AutoResult(chosen, True, trace, stage_candidates)
    trace[-1]["decision"] = "exhausted"
    return AutoResult(best_overall, False, trace, stage_candidates)
