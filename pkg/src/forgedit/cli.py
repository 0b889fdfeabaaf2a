"""Command-line front door mirroring the session service for scripted use.

Subcommands: pretrain, finetune, edit, sweep, auto, strategies, report.
Every flag has a config-file equivalent under the [cli] table of the same
TOML file the service reads (underscored key = long flag name); an explicit
flag wins over the file.  Artifacts land in the same store layout the
service uses, rooted at --data-dir (or FORGEDIT_DATA_DIR), so identical
inputs and seeds yield byte-identical artifacts through either front door.

Exit codes: 0 success, 1 method error, 2 usage error.  Each command prints a
single machine-readable key=value summary line on success.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ServiceConfig, build_caption_provider, load_config
from .editor import (
    DDIM_STEPS_DEFAULT,
    GUIDANCE_SCALE_DEFAULT,
    EditRequest,
    SweepSpec,
    Thresholds,
    auto_workflow,
    edit,
    sweep,
)
from .errors import ArgumentError, ForgeditError
from .finetune import DreamBoothConfig, FinetuneConfig, dreambooth_finetune, joint_finetune, pretrain
from .forgetting import BUILTIN_STRATEGY_NAMES, builtin_strategy, parse_strategy_spec, strategy_report
from .imaging import image_to_latent, load_image, png_bytes, save_png
from .schedule import NoiseSchedule
from .store import ArtifactStore
from .text import FixtureCaptionProvider
from .unet import DEFAULT_LAYOUT, init_params


def _kv(**pairs) -> str:
    return " ".join(f"{k}={v}" for k, v in pairs.items())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forgedit", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML config file (same file the service reads)")
    p.add_argument("--data-dir", help="artifact store root (FORGEDIT_DATA_DIR)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pretrain", help="train the toy denoiser on the fixture corpus")
    sp.add_argument("--ckpt", help="output checkpoint path (default <data-dir>/pretrained.ckpt)")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("finetune", help="fine-tune on one image")
    sp.add_argument("--image", required=True)
    sp.add_argument("--caption")
    sp.add_argument("--caption-file", help="TSV image-id<TAB>caption fixture table")
    sp.add_argument("--images-dir", help="directory of <image-id>.png next to --caption-file")
    sp.add_argument("--ckpt", help="pretrained checkpoint (default <data-dir>/pretrained.ckpt)")
    sp.add_argument("--run-id")
    sp.add_argument("--trainer", choices=("joint", "dreambooth"))
    sp.add_argument("--variant", choices=("unet-only", "unet-and-text"))
    sp.add_argument("--lr-embedding", type=float)
    sp.add_argument("--lr-unet", type=float)
    sp.add_argument("--batch-repeat", type=int)
    sp.add_argument("--min-steps", type=int)
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("--loss-threshold", type=float)
    sp.add_argument("--db-lr", type=float)
    sp.add_argument("--db-batch", type=int)
    sp.add_argument("--db-steps", type=int)
    sp.add_argument("--seed", type=int)

    for name in ("edit", "sweep", "auto"):
        sp = sub.add_parser(name)
        sp.add_argument("--run", required=True, help="run id within the store")
        sp.add_argument("--target", required=True)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--ddim-steps", type=int)
        sp.add_argument("--guidance-scale", type=float)
        if name in ("edit", "sweep"):
            sp.add_argument("--combination", choices=("subtraction", "projection"))
            sp.add_argument("--strategy", help="builtin name or custom:<globs>[;sigma=v]")
            sp.add_argument("--sigma", type=float)
            sp.add_argument("--allow-projection-forgetting", action="store_true")
        if name == "edit":
            sp.add_argument("--gamma", type=float)
            sp.add_argument("--alpha", type=float)
            sp.add_argument("--beta", type=float)
        if name == "sweep":
            sp.add_argument("--sweep-id")
            sp.add_argument("--workers", type=int)
        if name == "auto":
            sp.add_argument("--min-fidelity", type=float, required=True)
            sp.add_argument("--min-alignment", type=float, required=True)
            sp.add_argument("--strategy-order", help="comma-separated builtin names")
            sp.add_argument("--auto-id")

    sp = sub.add_parser("strategies", help="builtin forgetting strategies with path counts")
    sp.add_argument("--layout", choices=("default",))

    sp = sub.add_parser("report", help="summarize a stored run")
    sp.add_argument("--run", required=True)
    return p


class _Resolver:
    """Flag value -> [cli] config table -> builtin default."""

    def __init__(self, args: argparse.Namespace, table: dict):
        self.args = args
        self.table = table

    def get(self, key: str, default=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.table:
            return self.table[key]
        return default


def _store(res: _Resolver, service_cfg: ServiceConfig) -> ArtifactStore:
    root = res.get("data_dir", service_cfg.data_dir)
    return ArtifactStore(root)


def _resolve_caption(res: _Resolver, service_cfg: ServiceConfig, image: np.ndarray) -> str:
    caption = res.get("caption")
    if caption is not None:
        return caption
    caption_file = res.get("caption_file")
    if caption_file is not None:
        images_dir = res.get("images_dir", str(Path(caption_file).parent / "images"))
        provider = FixtureCaptionProvider(Path(caption_file), Path(images_dir))
        return provider.caption_for(image)
    return build_caption_provider(service_cfg).caption_for(image)


def _cmd_pretrain(res, service_cfg) -> int:
    from . import fixtures

    store = _store(res, service_cfg)
    ckpt = Path(res.get("ckpt", store.root / "pretrained.ckpt"))
    enc = fixtures.default_encoder()
    corpus = fixtures.load_corpus()
    latents = [image_to_latent(item.image) for item in corpus]
    embeddings = [enc.encode(item.caption).data[0] for item in corpus]
    params, trace = pretrain(
        latents,
        embeddings,
        layout=DEFAULT_LAYOUT,
        steps=int(res.get("steps", 1200)),
        batch=int(res.get("batch", 16)),
        lr=float(res.get("lr", 1e-3)),
        seed=int(res.get("seed", 7)),
    )
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, params, DEFAULT_LAYOUT)
    print(_kv(ckpt=ckpt, steps=len(trace), final_loss=repr(trace[-1])))
    return 0


def _cmd_finetune(res, service_cfg) -> int:
    from . import fixtures

    store = _store(res, service_cfg)
    image = load_image(res.get("image"))
    caption = _resolve_caption(res, service_cfg, image)
    ckpt = Path(res.get("ckpt", store.root / "pretrained.ckpt"))
    if not ckpt.exists():
        raise ArgumentError(f"no pretrained checkpoint at {ckpt}; run `forgedit pretrain` first")
    params, layout = load_checkpoint(ckpt)
    sched = NoiseSchedule.cosine()
    encoder = fixtures.default_encoder()
    latent = image_to_latent(image)
    seed = int(res.get("seed", 0))
    if res.get("trainer", "joint") == "dreambooth":
        cfg = DreamBoothConfig(
            lr=float(res.get("db_lr", 5e-6)),
            batch=int(res.get("db_batch", 4)),
            steps=int(res.get("db_steps", 100)),
            variant=res.get("variant", "unet-only"),
            seed=seed,
        )
        result = dreambooth_finetune(latent, caption, params, cfg, layout=layout,
                                     sched=sched, encoder=encoder)
    else:
        cfg = FinetuneConfig(
            lr_embedding=float(res.get("lr_embedding", 1e-3)),
            lr_unet=float(res.get("lr_unet", 6e-5)),
            batch_repeat=int(res.get("batch_repeat", 10)),
            min_steps=int(res.get("min_steps", 35)),
            max_steps=int(res.get("max_steps", 40)),
            loss_threshold=float(res.get("loss_threshold", 0.03)),
            seed=seed,
        )
        result = joint_finetune(latent, caption, params, cfg, layout=layout,
                                sched=sched, encoder=encoder)
    run_id = store.save_run(result, png_bytes(image), run_id=res.get("run_id"))
    print(
        _kv(
            run=run_id,
            dir=store.run_dir(run_id),
            steps=result.steps_run,
            final_loss=repr(result.loss_trace[-1]),
            caption=json.dumps(caption),
        )
    )
    return 0


def _strategy_from_flags(res) -> "ForgettingStrategy":
    strategy = parse_strategy_spec(res.get("strategy", "none"))
    sigma = res.get("sigma")
    if sigma is not None:
        strategy = strategy.with_sigma(float(sigma))
    return strategy


def _cmd_edit(res, service_cfg) -> int:
    from . import fixtures

    store = _store(res, service_cfg)
    run = store.load_run(res.get("run"))
    req = EditRequest(
        target_prompt=res.get("target"),
        combination=res.get("combination", "subtraction"),
        strategy=_strategy_from_flags(res),
        gamma=res.get("gamma"),
        alpha=res.get("alpha"),
        beta=res.get("beta"),
        guidance_scale=float(res.get("guidance_scale", GUIDANCE_SCALE_DEFAULT)),
        seed=int(res.get("seed", 0)),
        ddim_steps=int(res.get("ddim_steps", DDIM_STEPS_DEFAULT)),
        allow_projection_forgetting=bool(res.get("allow_projection_forgetting", False)),
    )
    candidate = edit(run, req, encoder=fixtures.default_encoder())
    edit_id = store.new_id("edit")
    d = store.root / "edits" / edit_id
    d.mkdir(parents=True)
    save_png(candidate.image, d / "candidate.png")
    (d / "edit.json").write_text(
        json.dumps(
            {"edit_id": edit_id, "run_id": res.get("run"), **req.to_dict(),
             "fidelity": candidate.fidelity, "alignment": candidate.alignment},
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )
    print(_kv(edit=edit_id, dir=d, fidelity=repr(candidate.fidelity), alignment=repr(candidate.alignment)))
    return 0


def _cmd_sweep(res, service_cfg) -> int:
    from . import fixtures

    store = _store(res, service_cfg)
    run_id = res.get("run")
    run = store.load_run(run_id)
    strategy = _strategy_from_flags(res)
    combination = res.get("combination", "subtraction")
    if combination == "projection":
        spec = SweepSpec.projection()
    else:
        spec = SweepSpec.subtraction(forgetting=strategy.name != "none")
    seed = int(res.get("seed", 0))
    guidance = float(res.get("guidance_scale", GUIDANCE_SCALE_DEFAULT))
    steps = int(res.get("ddim_steps", DDIM_STEPS_DEFAULT))
    candidates = sweep(
        run,
        res.get("target"),
        spec,
        strategy,
        seed=seed,
        guidance_scale=guidance,
        ddim_steps=steps,
        encoder=fixtures.default_encoder(),
        workers=int(res.get("workers", 1)),
        allow_projection_forgetting=bool(res.get("allow_projection_forgetting", False)),
    )
    meta = {
        "run_id": run_id,
        "target_prompt": res.get("target"),
        "combination": combination,
        "strategy": strategy.name,
        "sigma": strategy.sigma,
        "seed": seed,
        "guidance_scale": guidance,
        "ddim_steps": steps,
        "grid": spec.to_dict(),
    }
    sweep_id = store.save_sweep(candidates, meta, sweep_id=res.get("sweep_id"))
    best = max(candidates, key=lambda c: c.alignment)
    print(
        _kv(
            sweep=sweep_id,
            dir=store.sweep_dir(sweep_id),
            candidates=len(candidates),
            best_index=best.grid_index,
            best_alignment=repr(best.alignment),
        )
    )
    return 0


def _cmd_auto(res, service_cfg) -> int:
    from . import fixtures

    store = _store(res, service_cfg)
    run_id = res.get("run")
    run = store.load_run(run_id)
    order = tuple((res.get("strategy_order") or "decoderattn,encoderattn").split(","))
    result = auto_workflow(
        run,
        res.get("target"),
        Thresholds(float(res.get("min_fidelity")), float(res.get("min_alignment"))),
        strategy_order=order,
        seed=int(res.get("seed", 0)),
        guidance_scale=float(res.get("guidance_scale", GUIDANCE_SCALE_DEFAULT)),
        ddim_steps=int(res.get("ddim_steps", DDIM_STEPS_DEFAULT)),
        encoder=fixtures.default_encoder(),
    )
    auto_id = res.get("auto_id") or store.new_id("auto")
    sweep_ids = []
    for stage_idx, candidates in enumerate(result.stage_candidates):
        sid = f"{auto_id}-s{stage_idx}"
        store.save_sweep(
            candidates,
            {
                "run_id": run_id,
                "target_prompt": res.get("target"),
                "combination": "subtraction",
                "strategy": result.trace[stage_idx]["strategy"],
                "sigma": 0.0,
                "seed": int(res.get("seed", 0)),
                "auto_id": auto_id,
                "stage": stage_idx,
            },
            sweep_id=sid,
        )
        sweep_ids.append(sid)
    chosen = result.candidate
    trace_doc = {
        "auto_id": auto_id,
        "run_id": run_id,
        "target_prompt": res.get("target"),
        "thresholds": {
            "min_fidelity": float(res.get("min_fidelity")),
            "min_alignment": float(res.get("min_alignment")),
        },
        "cleared": result.cleared,
        "stages": result.trace,
        "chosen": {
            "sweep_id": sweep_ids[len(result.trace) - 1],
            "grid_index": chosen.grid_index,
            **chosen.request.grid_point(),
            "strategy": chosen.request.strategy.name,
            "fidelity": chosen.fidelity,
            "alignment": chosen.alignment,
        },
    }
    store.save_auto(auto_id, trace_doc, png_bytes(chosen.image))
    print(
        _kv(
            auto=auto_id,
            dir=store.root / "autos" / auto_id,
            cleared=str(result.cleared).lower(),
            stages=len(result.trace),
            strategy=chosen.request.strategy.name,
            gamma=chosen.request.gamma,
            alignment=repr(chosen.alignment),
        )
    )
    return 0


def _cmd_strategies(res, service_cfg) -> int:
    params = init_params(DEFAULT_LAYOUT, seed=0)
    print(f"{'strategy':<26} {'forgotten':>9} {'kept':>6}  forgotten-by-stage")
    for name in BUILTIN_STRATEGY_NAMES:
        report = strategy_report(params, params, builtin_strategy(name))
        stages = {s: v["forgotten"] for s, v in report.per_stage.items() if v["forgotten"]}
        print(f"{name:<26} {report.forgotten_total:>9} {report.kept_total:>6}  {stages}")
    print(_kv(strategies=len(BUILTIN_STRATEGY_NAMES)))
    return 0


def _cmd_report(res, service_cfg) -> int:
    store = _store(res, service_cfg)
    run_id = res.get("run")
    d = store.run_dir(run_id)
    manifest = json.loads((d / "manifest.json").read_text())
    config = json.loads((d / "config.json").read_text())
    trace = [float(line.split(",")[1]) for line in (d / "loss_trace.csv").read_text().splitlines()[1:] if line]
    print(
        _kv(
            run=run_id,
            kind=manifest["kind"],
            caption=json.dumps(manifest["caption"]),
            steps=manifest["steps_run"],
            final_loss=repr(trace[-1]),
            min_loss=repr(min(trace)),
            seed=config.get("seed"),
            artifacts=",".join(manifest["artifacts"]),
        )
    )
    return 0


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "finetune": _cmd_finetune,
    "edit": _cmd_edit,
    "sweep": _cmd_sweep,
    "auto": _cmd_auto,
    "strategies": _cmd_strategies,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage to stderr itself
        return int(exc.code or 0)
    try:
        service_cfg, cli_table = load_config(args.config)
        res = _Resolver(args, cli_table)
        return _COMMANDS[args.command](res, service_cfg)
    except ForgeditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # method failure, still a clean exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
