"""Regenerate the committed golden auto-workflow trace from the calibrated
fixtures.  Uses the same cached pretrain/fine-tune artifacts as the test
suite (tests/_cache), so the recorded trace is exactly what the acceptance
test recomputes.

Usage: python scripts/record_golden.py
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "tests"))

from forgedit import fixtures
from forgedit.checkpoint import load_checkpoint, save_checkpoint
from forgedit.editor import Thresholds, auto_workflow
from forgedit.finetune import FinetuneConfig, joint_finetune, pretrain
from forgedit.imaging import image_to_latent, png_bytes
from forgedit.schedule import NoiseSchedule
from forgedit.store import ArtifactStore
from forgedit.unet import DEFAULT_LAYOUT

CACHE = Path(__file__).parent.parent / "tests" / "_cache"


def cached_pretrained(calib, sched):
    cfg = calib["pretrain"]
    key = "pretrained_" + "_".join(f"{k}-{cfg[k]}" for k in sorted(cfg)) + ".ckpt"
    path = CACHE / key
    if not path.exists():
        CACHE.mkdir(exist_ok=True)
        enc = fixtures.default_encoder()
        corpus = fixtures.load_corpus()
        latents = [image_to_latent(i.image) for i in corpus]
        embeddings = [enc.encode(i.caption).data[0] for i in corpus]
        params, _ = pretrain(latents, embeddings, layout=DEFAULT_LAYOUT, sched=sched,
                             steps=cfg["steps"], batch=cfg["batch"], lr=cfg["lr"],
                             seed=cfg["seed"], uncond_prob=cfg["uncond_prob"])
        save_checkpoint(path, params, DEFAULT_LAYOUT)
    return load_checkpoint(path)


def cached_desk_run(calib, sched):
    fin = calib["finetune"]
    key = "deskrun_" + "_".join(f"{k}-{fin[k]}" for k in sorted(fin))
    store = ArtifactStore(CACHE / "store")
    if not store.run_exists(key):
        params, layout = cached_pretrained(calib, sched)
        item = fixtures.edit_fixture()
        result = joint_finetune(image_to_latent(item.image), item.caption, params,
                                FinetuneConfig(**fin), layout=layout, sched=sched,
                                encoder=fixtures.default_encoder())
        store.save_run(result, png_bytes(item.image), run_id=key)
    return store.load_run(key)


def main() -> None:
    calib = fixtures.calibration()
    sched = NoiseSchedule.cosine()
    run = cached_desk_run(calib, sched)
    edit_cfg = calib["edit"]
    thresholds = calib["auto_thresholds"]
    result = auto_workflow(
        run,
        edit_cfg["target_prompt"],
        Thresholds(thresholds["min_fidelity"], thresholds["min_alignment"]),
        seed=edit_cfg["seed"],
        guidance_scale=edit_cfg["guidance_scale"],
        ddim_steps=edit_cfg["ddim_steps"],
        encoder=fixtures.default_encoder(),
        sched=sched,
    )
    doc = {
        "target_prompt": edit_cfg["target_prompt"],
        "thresholds": thresholds,
        "cleared": result.cleared,
        "stages": result.trace,
        "chosen": {
            "strategy": result.candidate.request.strategy.name,
            "grid_index": result.candidate.grid_index,
            **result.candidate.request.grid_point(),
            "fidelity": result.candidate.fidelity,
            "alignment": result.candidate.alignment,
        },
    }
    out = fixtures.golden_trace_path()
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    print(json.dumps(doc["chosen"], indent=2))


if __name__ == "__main__":
    main()
