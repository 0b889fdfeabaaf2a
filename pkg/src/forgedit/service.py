"""HTTP session service: fine-tune runs, sweeps, the auto workflow, and
candidate retrieval, with directory-tree persistence.

Jobs execute on a small private worker pool (one worker by default so golden
traces stay bit-reproducible); job state moves strictly forward
queued -> running -> done|failed with monotone progress, and every artifact
is written once so a restarted process serves identical bytes.

Run `python -m forgedit.service` (honors FORGEDIT_DATA_DIR, FORGEDIT_PORT,
FORGEDIT_CONFIG) or mount `build_app(...)` under any ASGI server.
"""

from __future__ import annotations

import base64
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from pydantic import BaseModel

from . import fixtures
from .checkpoint import load_checkpoint
from .config import ServiceConfig, build_caption_provider, load_config
from .editor import (
    SweepSpec,
    Thresholds,
    auto_workflow,
    sweep,
)
from .errors import ConflictError, ForgeditError, NotFoundError
from .finetune import DreamBoothConfig, FinetuneConfig, dreambooth_finetune, joint_finetune
from .forgetting import parse_strategy_spec
from .imaging import image_to_latent, load_image, png_bytes
from .schedule import NoiseSchedule
from .store import ArtifactStore


class JobManager:
    """Single-process job queue with persisted job records."""

    def __init__(self, store: ArtifactStore, workers: int = 1):
        self.store = store
        self.pool = ThreadPoolExecutor(max_workers=max(1, workers))
        self.lock = threading.Lock()
        self.jobs: dict[str, dict] = {}
        self.pending_refs: dict[str, str] = {}  # artifact id -> job id (until done)

    def restore(self) -> None:
        for path in (self.store.root / "jobs").glob("*.json"):
            doc = self.store.load_job(path.stem)
            if doc["state"] in ("queued", "running"):
                doc["state"] = "failed"
                doc["error"] = "interrupted by restart"
                self.store.save_job(doc)
            self.jobs[doc["job_id"]] = doc

    def has_active_finetune(self, session_id: str) -> bool:
        with self.lock:
            return any(
                d["kind"] == "finetune"
                and d["session_id"] == session_id
                and d["state"] in ("queued", "running")
                for d in self.jobs.values()
            )

    def submit(self, kind: str, session_id: str, fn, refs: dict | None = None) -> dict:
        job_id = self.store.new_id("job")
        doc = {
            "job_id": job_id,
            "kind": kind,
            "session_id": session_id,
            "state": "queued",
            "progress": 0.0,
            "result": dict(refs) if refs else None,
            "error": None,
            "created_at": time.time(),
        }
        with self.lock:
            self.jobs[job_id] = doc
            if refs:
                for ref in refs.values():
                    if isinstance(ref, str):
                        self.pending_refs[ref] = job_id
        self.store.save_job(doc)
        self.pool.submit(self._run, job_id, fn)
        return dict(doc)

    def _update(self, job_id: str, **changes) -> None:
        with self.lock:
            doc = self.jobs[job_id]
            if "progress" in changes:
                changes["progress"] = max(doc["progress"], min(1.0, changes["progress"]))
            doc.update(changes)
            snapshot = dict(doc)
        self.store.save_job(snapshot)

    def _run(self, job_id: str, fn) -> None:
        self._update(job_id, state="running")

        def progress(frac: float) -> None:
            self._update(job_id, progress=float(frac))

        try:
            result = fn(progress)
            with self.lock:
                prior = self.jobs[job_id].get("result") or {}
            self._update(job_id, state="done", progress=1.0, result={**prior, **result})
        except Exception as exc:  # surfaced through the job record
            self._update(job_id, state="failed", error=f"{type(exc).__name__}: {exc}")
        finally:
            with self.lock:
                for ref, owner in list(self.pending_refs.items()):
                    if owner == job_id:
                        del self.pending_refs[ref]

    def get(self, job_id: str) -> dict:
        with self.lock:
            if job_id in self.jobs:
                return dict(self.jobs[job_id])
        return self.store.load_job(job_id)

    def pending_owner(self, ref: str) -> str | None:
        with self.lock:
            return self.pending_refs.get(ref)


class CreateSessionBody(BaseModel):
    image_b64: str
    caption: str | None = None


class FinetuneBody(BaseModel):
    kind: str = "joint"  # joint | dreambooth
    seed: int = 0
    lr_embedding: float | None = None
    lr_unet: float | None = None
    batch_repeat: int | None = None
    min_steps: int | None = None
    max_steps: int | None = None
    loss_threshold: float | None = None
    lr: float | None = None
    batch: int | None = None
    steps: int | None = None
    variant: str = "unet-only"


class SweepBody(BaseModel):
    run_id: str
    target_prompt: str
    combination: str = "subtraction"
    strategy: str = "none"
    seed: int = 0
    guidance_scale: float = 7.5
    ddim_steps: int = 50
    gammas: list[float] | None = None
    alphas: list[float] | None = None
    betas: list[float] | None = None


class AutoBody(BaseModel):
    run_id: str
    target_prompt: str
    min_fidelity: float
    min_alignment: float
    strategy_order: list[str] = ["decoderattn", "encoderattn"]
    seed: int = 0
    guidance_scale: float = 7.5
    ddim_steps: int = 50


def _overrides(body: FinetuneBody, fields: tuple) -> dict:
    return {k: getattr(body, k) for k in fields if getattr(body, k) is not None}


def build_app(cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or load_config()[0]
    store = ArtifactStore(cfg.data_dir)
    provider = build_caption_provider(cfg)
    jobs = JobManager(store, cfg.workers)
    jobs.restore()
    encoder = fixtures.default_encoder()
    sched = NoiseSchedule.cosine()

    app = FastAPI(title="forgedit session service")
    app.state.store = store
    app.state.jobs = jobs
    app.state.config = cfg

    def http_error(exc: ForgeditError) -> HTTPException:
        if isinstance(exc, NotFoundError):
            return HTTPException(404, str(exc))
        if isinstance(exc, ConflictError):
            return HTTPException(409, str(exc))
        return HTTPException(400, str(exc))

    def load_session_or_404(session_id: str) -> dict:
        try:
            return store.load_session(session_id)
        except NotFoundError as exc:
            raise http_error(exc)

    def pretrained_params():
        path = cfg.resolve_pretrained()
        if not path.exists():
            raise HTTPException(409, f"no pretrained checkpoint at {path}; run `forgedit pretrain` first")
        return load_checkpoint(path)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        try:
            raw = base64.b64decode(body.image_b64, validate=True)
            image = load_image(raw)
        except Exception as exc:
            raise HTTPException(422, f"undecodable image: {exc}")
        if body.caption is not None:
            caption = body.caption
            overridden = True
        else:
            try:
                caption = provider.caption_for(image)
            except NotFoundError as exc:
                raise HTTPException(422, f"caption provider failed: {exc}")
            overridden = False
        session_id = store.new_id("session")
        png = png_bytes(image)
        image_id = f"{session_id}_orig"
        store.register_image(image_id, png)
        doc = {
            "session_id": session_id,
            "caption": caption,
            "caption_overridden": overridden,
            "created_at": time.time(),
            "runs": [],
            "sweeps": [],
            "autos": [],
            "image_id": image_id,
            "image_url": f"/images/{image_id}.png",
        }
        store.save_session(doc, png)
        return doc

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return load_session_or_404(session_id)

    @app.post("/sessions/{session_id}/finetune", status_code=202)
    def start_finetune(session_id: str, body: FinetuneBody):
        session = load_session_or_404(session_id)
        if jobs.has_active_finetune(session_id):
            raise http_error(ConflictError(f"session {session_id} already has a fine-tune running"))
        params, layout = pretrained_params()
        if body.kind == "joint":
            fields = ("lr_embedding", "lr_unet", "batch_repeat", "min_steps", "max_steps", "loss_threshold")
            run_cfg = FinetuneConfig(seed=body.seed, **_overrides(body, fields))
        elif body.kind == "dreambooth":
            fields = ("lr", "batch", "steps")
            run_cfg = DreamBoothConfig(seed=body.seed, variant=body.variant, **_overrides(body, fields))
        else:
            raise HTTPException(400, f"unknown trainer kind {body.kind!r}")
        image = store.session_image(session_id)
        caption = session["caption"]
        run_id = store.new_id("run")

        def work(progress):
            latent = image_to_latent(image)
            if isinstance(run_cfg, FinetuneConfig):
                result = joint_finetune(latent, caption, params, run_cfg,
                                        layout=layout, sched=sched, encoder=encoder,
                                        progress_cb=progress)
            else:
                result = dreambooth_finetune(latent, caption, params, run_cfg,
                                             layout=layout, sched=sched, encoder=encoder,
                                             progress_cb=progress)
            store.save_run(result, png_bytes(image), run_id=run_id)
            session = store.load_session(session_id)
            session["runs"].append(run_id)
            store.update_session(session)
            return {"run_id": run_id, "steps_run": result.steps_run,
                    "final_loss": result.loss_trace[-1]}

        return jobs.submit("finetune", session_id, work, refs={"run_id": run_id})

    @app.post("/sessions/{session_id}/sweeps", status_code=202)
    def start_sweep(session_id: str, body: SweepBody):
        load_session_or_404(session_id)
        if not store.run_exists(body.run_id):
            raise http_error(NotFoundError(f"no run {body.run_id!r}"))
        try:
            strategy = parse_strategy_spec(body.strategy)
            if body.combination == "projection":
                spec = SweepSpec(
                    "projection",
                    alphas=tuple(body.alphas) if body.alphas else SweepSpec.projection().alphas,
                    betas=tuple(body.betas) if body.betas else SweepSpec.projection().betas,
                )
            else:
                spec = (
                    SweepSpec("subtraction", gammas=tuple(body.gammas))
                    if body.gammas
                    else SweepSpec.subtraction(forgetting=strategy.name != "none")
                )
        except ForgeditError as exc:
            raise http_error(exc)
        sweep_id = store.new_id("sweep")

        def work(progress):
            run = store.load_run(body.run_id)
            candidates = sweep(
                run,
                body.target_prompt,
                spec,
                strategy,
                seed=body.seed,
                guidance_scale=body.guidance_scale,
                ddim_steps=body.ddim_steps,
                encoder=encoder,
                sched=sched,
                progress_cb=progress,
            )
            meta = {
                "run_id": body.run_id,
                "session_id": session_id,
                "target_prompt": body.target_prompt,
                "combination": body.combination,
                "strategy": strategy.name,
                "sigma": strategy.sigma,
                "seed": body.seed,
                "guidance_scale": body.guidance_scale,
                "ddim_steps": body.ddim_steps,
                "grid": spec.to_dict(),
            }
            store.save_sweep(candidates, meta, sweep_id=sweep_id)
            session = store.load_session(session_id)
            session["sweeps"].append(sweep_id)
            store.update_session(session)
            return {"sweep_id": sweep_id, "count": len(candidates)}

        return jobs.submit("sweep", session_id, work, refs={"sweep_id": sweep_id})

    @app.post("/sessions/{session_id}/auto", status_code=202)
    def start_auto(session_id: str, body: AutoBody):
        load_session_or_404(session_id)
        if not store.run_exists(body.run_id):
            raise http_error(NotFoundError(f"no run {body.run_id!r}"))
        auto_id = store.new_id("auto")

        def work(progress):
            run = store.load_run(body.run_id)
            result = auto_workflow(
                run,
                body.target_prompt,
                Thresholds(body.min_fidelity, body.min_alignment),
                strategy_order=tuple(body.strategy_order),
                seed=body.seed,
                guidance_scale=body.guidance_scale,
                ddim_steps=body.ddim_steps,
                encoder=encoder,
                sched=sched,
                workers=1,
                progress_cb=progress,
            )
            sweep_ids = []
            for stage_idx, candidates in enumerate(result.stage_candidates):
                stage = result.trace[stage_idx]
                sid = f"{auto_id}-s{stage_idx}"
                store.save_sweep(
                    candidates,
                    {
                        "run_id": body.run_id,
                        "session_id": session_id,
                        "target_prompt": body.target_prompt,
                        "combination": "subtraction",
                        "strategy": stage["strategy"],
                        "sigma": 0.0,
                        "seed": body.seed,
                        "guidance_scale": body.guidance_scale,
                        "ddim_steps": body.ddim_steps,
                        "auto_id": auto_id,
                        "stage": stage_idx,
                    },
                    sweep_id=sid,
                )
                sweep_ids.append(sid)
            chosen = result.candidate
            trace_doc = {
                "auto_id": auto_id,
                "run_id": body.run_id,
                "target_prompt": body.target_prompt,
                "thresholds": {"min_fidelity": body.min_fidelity, "min_alignment": body.min_alignment},
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
            session = store.load_session(session_id)
            session["autos"].append(auto_id)
            session["sweeps"].extend(sweep_ids)
            store.update_session(session)
            return {"auto_id": auto_id, "sweep_ids": sweep_ids,
                    "cleared": result.cleared, "trace": trace_doc}

        return jobs.submit("auto", session_id, work, refs={"auto_id": auto_id})

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            return jobs.get(job_id)
        except NotFoundError as exc:
            raise http_error(exc)

    @app.get("/sweeps/{sweep_id}/candidates")
    def get_candidates(sweep_id: str):
        if store.sweep_exists(sweep_id):
            manifest = store.load_sweep_manifest(sweep_id)
            for cand in manifest["candidates"]:
                cand["image_url"] = f"/images/{cand['image_id']}.png"
            return manifest
        owner = jobs.pending_owner(sweep_id)
        if owner is not None:
            raise HTTPException(409, f"sweep {sweep_id} still running (job {owner})")
        raise HTTPException(404, f"no sweep {sweep_id!r}")

    @app.get("/autos/{auto_id}")
    def get_auto(auto_id: str):
        try:
            return store.load_auto(auto_id)
        except NotFoundError as exc:
            owner = jobs.pending_owner(auto_id)
            if owner is not None:
                raise HTTPException(409, f"auto run {auto_id} still running (job {owner})")
            raise http_error(exc)

    @app.get("/images/{image_id}.png")
    def get_image(image_id: str):
        try:
            return FileResponse(store.image_path(image_id), media_type="image/png")
        except NotFoundError as exc:
            raise http_error(exc)

    @app.get("/strategies")
    def get_strategies():
        from .forgetting import BUILTIN_STRATEGY_NAMES, builtin_strategy, strategy_report

        params = _strategy_params()
        out = []
        for name in BUILTIN_STRATEGY_NAMES:
            report = strategy_report(params, params, builtin_strategy(name))
            out.append(report.to_dict())
        return {"strategies": out}

    return app


_strategy_params_cache = []


def _strategy_params():
    if not _strategy_params_cache:
        from .unet import DEFAULT_LAYOUT, init_params

        _strategy_params_cache.append(init_params(DEFAULT_LAYOUT, seed=0))
    return _strategy_params_cache[0]


def main() -> None:  # pragma: no cover - thin daemon wrapper
    import os

    import uvicorn

    cfg, _ = load_config(os.environ.get("FORGEDIT_CONFIG"))
    uvicorn.run(build_app(cfg), host="0.0.0.0", port=cfg.port)


if __name__ == "__main__":  # pragma: no cover
    main()
