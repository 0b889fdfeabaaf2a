"""Shared expensive fixtures: the pretrained checkpoint and the calibrated
fine-tune run, cached on disk under tests/_cache so repeated suite runs skip
the heavy work."""

from pathlib import Path

import pytest

from forgedit import fixtures
from forgedit.checkpoint import load_checkpoint, save_checkpoint
from forgedit.finetune import FinetuneConfig, joint_finetune, pretrain
from forgedit.imaging import image_to_latent, png_bytes
from forgedit.schedule import NoiseSchedule
from forgedit.store import ArtifactStore
from forgedit.unet import DEFAULT_LAYOUT

CACHE = Path(__file__).parent / "_cache"


@pytest.fixture(scope="session")
def calibration() -> dict:
    return fixtures.calibration()


@pytest.fixture(scope="session")
def sched() -> NoiseSchedule:
    return NoiseSchedule.cosine()


def _pretrain_key(cfg: dict) -> str:
    return "pretrained_" + "_".join(f"{k}-{cfg[k]}" for k in sorted(cfg)) + ".ckpt"


@pytest.fixture(scope="session")
def pretrained(calibration, sched):
    """(params, layout) of the corpus-pretrained denoiser, disk-cached."""
    cfg = calibration["pretrain"]
    path = CACHE / _pretrain_key(cfg)
    if not path.exists():
        CACHE.mkdir(exist_ok=True)
        enc = fixtures.default_encoder()
        corpus = fixtures.load_corpus()
        latents = [image_to_latent(item.image) for item in corpus]
        embeddings = [enc.encode(item.caption).data[0] for item in corpus]
        params, _ = pretrain(
            latents,
            embeddings,
            layout=DEFAULT_LAYOUT,
            sched=sched,
            steps=cfg["steps"],
            batch=cfg["batch"],
            lr=cfg["lr"],
            seed=cfg["seed"],
            uncond_prob=cfg["uncond_prob"],
        )
        save_checkpoint(path, params, DEFAULT_LAYOUT)
    return load_checkpoint(path)


@pytest.fixture(scope="session")
def desk_run(calibration, pretrained, sched):
    """The calibrated fine-tune run on the held-out fixture, cached as a run dir."""
    cfg_dict = calibration["finetune"]
    key = "deskrun_" + "_".join(f"{k}-{cfg_dict[k]}" for k in sorted(cfg_dict))
    store = ArtifactStore(CACHE / "store")
    if not store.run_exists(key):
        params, layout = pretrained
        item = fixtures.edit_fixture()
        result = joint_finetune(
            image_to_latent(item.image),
            item.caption,
            params,
            FinetuneConfig(**cfg_dict),
            layout=layout,
            sched=sched,
            encoder=fixtures.default_encoder(),
        )
        store.save_run(result, png_bytes(item.image), run_id=key)
    return store.load_run(key)
