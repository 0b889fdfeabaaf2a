"""Vision-language joint fine-tuning on a single image.

The source prompt's embedding is treated as a parameter and optimized jointly
with the shallow UNet stages (encoder 0-2, decoder 1-3; encoder.3, mid and
decoder.0 stay frozen), with separate learning rates for the embedding and
the UNet.  Each step replicates the image on the batch dimension, draws an
independent (t, eps) pair per batch element, and minimizes the mean squared
noise-prediction error.  Training stops once the per-step batch loss drops
below the threshold after a minimum number of steps, or at the step cap.

Also provides the single-image DreamBooth-style trainer (one learning rate,
whole UNet, fixed step count; optionally the text-table rows used by the
prompt) and the corpus pretrainer that produces the starting checkpoint.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
import torch

from .embedding import PromptEmbedding
from .errors import ArgumentError, TrainingDivergedError
from .schedule import NoiseSchedule
from .text import ToyTextEncoder
from .unet import DEFAULT_LAYOUT, Denoiser, DenoiserParams, StageLayout, trainable_paths


@dataclass(frozen=True)
class FinetuneConfig:
    lr_embedding: float = 1e-3
    lr_unet: float = 6e-5
    batch_repeat: int = 10
    min_steps: int = 35
    max_steps: int = 40
    loss_threshold: float = 0.03
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.min_steps > self.max_steps:
            raise ArgumentError("min_steps must be <= max_steps")
        if self.lr_embedding < 0 or self.lr_unet < 0:
            raise ArgumentError("learning rates must be non-negative")
        if self.batch_repeat < 1:
            raise ArgumentError("batch_repeat must be >= 1")


@dataclass(frozen=True)
class DreamBoothConfig:
    lr: float = 5e-6
    batch: int = 4
    steps: int = 100
    variant: str = "unet-only"  # or "unet-and-text"
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ArgumentError("lr must be positive")
        if self.steps < 1:
            raise ArgumentError("steps must be >= 1")
        if self.variant not in ("unet-only", "unet-and-text"):
            raise ArgumentError(f"unknown variant {self.variant!r}")


@dataclass
class FinetuneResult:
    learned_embedding: PromptEmbedding
    learned_params: DenoiserParams
    original_params: DenoiserParams
    loss_trace: list
    steps_run: int
    wall_time: float
    trained_paths: frozenset
    caption: str
    source_latent: np.ndarray
    kind: str
    config: dict
    layout: StageLayout = field(default=DEFAULT_LAYOUT)
    learned_table: np.ndarray | None = None


def _check_latent(latent: np.ndarray, layout: StageLayout) -> np.ndarray:
    latent = np.asarray(latent, dtype=np.float64)
    if latent.shape != layout.input_shape:
        raise ArgumentError(f"latent shape {latent.shape} does not match layout {layout.input_shape}")
    return latent


def _noisy_batch(rng, z0: np.ndarray, sched: NoiseSchedule, batch: int):
    """Per-element (t, eps) draws and the corresponding x_t batch."""
    ts = rng.integers(1, sched.T + 1, size=batch)
    eps = rng.standard_normal((batch,) + z0.shape)
    a = sched.alphas[ts][:, None, None, None]
    xt = np.sqrt(a) * z0[None] + np.sqrt(1.0 - a) * eps
    return ts, eps, xt


def _step_loss(model, xt, ts, eps, e_batch) -> torch.Tensor:
    pred = model(torch.from_numpy(xt), torch.from_numpy(ts), e_batch)
    return ((pred - torch.from_numpy(eps)) ** 2).mean()


def joint_finetune(
    image,
    source_prompt: str,
    params: DenoiserParams,
    cfg: FinetuneConfig,
    *,
    layout: StageLayout = DEFAULT_LAYOUT,
    sched: NoiseSchedule | None = None,
    encoder: ToyTextEncoder | None = None,
    progress_cb=None,
) -> FinetuneResult:
    """Optimize (e_src, shallow UNet stages) to reconstruct one image."""
    sched = sched or NoiseSchedule.cosine()
    if encoder is None:
        from .fixtures import default_encoder

        encoder = default_encoder()
    z0 = _check_latent(image.data if hasattr(image, "data") else image, layout)
    original = params.copy()
    model = Denoiser(layout, params=params)

    emb = torch.from_numpy(encoder.encode(source_prompt).data.copy())
    # lr 0 means the group is a constant; keeping it out of the graph makes the
    # frozen-embedding run bit-identical to a plain noise-prediction trainer
    emb.requires_grad_(cfg.lr_embedding > 0)
    train_set = trainable_paths(params)
    groups = []
    if cfg.lr_embedding > 0:
        groups.append({"params": [emb], "lr": cfg.lr_embedding})
    unet_trainable = []
    for name, p in model.named_parameters():
        if name in train_set and cfg.lr_unet > 0:
            unet_trainable.append(p)
        else:
            p.requires_grad_(False)
    trained = frozenset(train_set) if cfg.lr_unet > 0 else frozenset()
    if unet_trainable:
        groups.append({"params": unet_trainable, "lr": cfg.lr_unet})
    opt = torch.optim.Adam(groups, betas=cfg.adam_betas, eps=cfg.adam_eps) if groups else None

    rng = np.random.default_rng(cfg.seed)
    trace: list[float] = []
    start = time.perf_counter()
    for step in range(1, cfg.max_steps + 1):
        ts, eps, xt = _noisy_batch(rng, z0, sched, cfg.batch_repeat)
        e_batch = emb.expand(cfg.batch_repeat, -1, -1)
        loss = _step_loss(model, xt, ts, eps, e_batch)
        value = float(loss.detach())
        if not np.isfinite(value):
            raise TrainingDivergedError(step, value)
        if opt is not None:
            opt.zero_grad()
            loss.backward()
            opt.step()
        trace.append(value)
        if progress_cb is not None:
            progress_cb(step / cfg.max_steps)
        if step >= cfg.min_steps and value < cfg.loss_threshold:
            break

    return FinetuneResult(
        learned_embedding=PromptEmbedding(emb.detach().numpy().copy(), provenance="learned"),
        learned_params=model.export_params(),
        original_params=original,
        loss_trace=trace,
        steps_run=len(trace),
        wall_time=time.perf_counter() - start,
        trained_paths=trained,
        caption=source_prompt,
        source_latent=z0,
        kind="joint",
        config=asdict(cfg),
        layout=layout,
    )


def dreambooth_finetune(
    image,
    source_prompt: str,
    params: DenoiserParams,
    cfg: DreamBoothConfig,
    *,
    layout: StageLayout = DEFAULT_LAYOUT,
    sched: NoiseSchedule | None = None,
    encoder: ToyTextEncoder | None = None,
    progress_cb=None,
) -> FinetuneResult:
    """Reconstruction training of the whole UNet at one learning rate.

    unet-only keeps the prompt embedding frozen at its encoded value;
    unet-and-text also trains the text-table rows the prompt touches (on a
    private copy of the table — the shared encoder is never mutated).
    """
    sched = sched or NoiseSchedule.cosine()
    if encoder is None:
        from .fixtures import default_encoder

        encoder = default_encoder()
    z0 = _check_latent(image.data if hasattr(image, "data") else image, layout)
    original = params.copy()
    model = Denoiser(layout, params=params)

    ids = encoder.token_ids(source_prompt)
    distinct = sorted(set(ids))
    index_map = torch.tensor([distinct.index(i) for i in ids], dtype=torch.long)
    rows = torch.from_numpy(encoder.table[distinct].copy())
    pos = torch.from_numpy(encoder.pos.copy())
    train_text = cfg.variant == "unet-and-text"
    rows.requires_grad_(train_text)

    groups = [{"params": list(model.parameters()), "lr": cfg.lr}]
    if train_text:
        groups.append({"params": [rows], "lr": cfg.lr})
    opt = torch.optim.Adam(groups, betas=cfg.adam_betas, eps=cfg.adam_eps)

    rng = np.random.default_rng(cfg.seed)
    trace: list[float] = []
    start = time.perf_counter()
    for step in range(1, cfg.steps + 1):
        ts, eps, xt = _noisy_batch(rng, z0, sched, cfg.batch)
        e = (rows[index_map] + pos)[None]
        loss = _step_loss(model, xt, ts, eps, e.expand(cfg.batch, -1, -1))
        value = float(loss.detach())
        if not np.isfinite(value):
            raise TrainingDivergedError(step, value)
        opt.zero_grad()
        loss.backward()
        opt.step()
        trace.append(value)
        if progress_cb is not None:
            progress_cb(step / cfg.steps)

    learned_table = None
    if train_text:
        learned_table = encoder.table.copy()
        learned_table[distinct] = rows.detach().numpy()
        learned_embedding = encoder.encode_with_table(source_prompt, learned_table)
        learned_embedding = PromptEmbedding(learned_embedding.data, provenance="learned")
    else:
        learned_embedding = encoder.encode(source_prompt)

    return FinetuneResult(
        learned_embedding=learned_embedding,
        learned_params=model.export_params(),
        original_params=original,
        loss_trace=trace,
        steps_run=len(trace),
        wall_time=time.perf_counter() - start,
        trained_paths=frozenset(params.paths()),
        caption=source_prompt,
        source_latent=z0,
        kind=f"dreambooth/{cfg.variant}",
        config=asdict(cfg),
        layout=layout,
        learned_table=learned_table,
    )


def pretrain(
    latents: Sequence[np.ndarray],
    embeddings: Sequence[np.ndarray],
    *,
    layout: StageLayout = DEFAULT_LAYOUT,
    sched: NoiseSchedule | None = None,
    steps: int = 2000,
    batch: int = 16,
    lr: float = 1e-3,
    seed: int = 7,
    uncond_embedding: np.ndarray | None = None,
    uncond_prob: float = 0.1,
) -> tuple[DenoiserParams, list]:
    """Train a fresh denoiser on a small captioned corpus.

    Returns the resulting parameters and the loss trace.  This is the
    "functioning denoiser" every fine-tune starts from.  A fraction of batch
    elements swap their caption for the unconditional embedding so guided
    sampling has a trained unconditional branch to lean on.
    """
    sched = sched or NoiseSchedule.cosine()
    if len(latents) != len(embeddings) or not latents:
        raise ArgumentError("need equally many latents and embeddings")
    z = np.stack([_check_latent(l, layout) for l in latents])
    e = np.stack([np.asarray(v, dtype=np.float64) for v in embeddings])
    if uncond_embedding is None:
        from .fixtures import default_encoder

        uncond_embedding = default_encoder().encode("").data[0]
    uncond = np.asarray(uncond_embedding, dtype=np.float64)

    from .unet import init_params

    model = Denoiser(layout, params=init_params(layout, seed=seed))
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    trace: list[float] = []
    for step in range(1, steps + 1):
        idx = rng.integers(0, len(z), size=batch)
        ts = rng.integers(1, sched.T + 1, size=batch)
        eps = rng.standard_normal((batch,) + layout.input_shape)
        e_batch = e[idx].copy()
        if uncond_prob > 0:
            drop = rng.random(batch) < uncond_prob
            e_batch[drop] = uncond
        a = sched.alphas[ts][:, None, None, None]
        xt = np.sqrt(a) * z[idx] + np.sqrt(1.0 - a) * eps
        loss = _step_loss(model, xt, ts, eps, torch.from_numpy(e_batch))
        value = float(loss.detach())
        if not np.isfinite(value):
            raise TrainingDivergedError(step, value)
        opt.zero_grad()
        loss.backward()
        opt.step()
        trace.append(value)
    return model.export_params(), trace
