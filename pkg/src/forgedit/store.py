"""On-disk artifact store shared by the CLI and the session service.

Directory tree under one root:

    runs/<run-id>/      config.json, loss_trace.csv, learned.ckpt,
                        original.ckpt, embedding.bin, manifest.json,
                        source.png [, text_table.npy]
    sweeps/<sweep-id>/  manifest.json, manifest.csv, candidate_<k>.png
    autos/<auto-id>/    trace.json, chosen.png
    sessions/<id>/      session.json, original.png
    jobs/<job-id>.json
    images/<image-id>.png   (flat write-once registry served over HTTP)

Artifacts are write-once; numeric files round-trip exactly (repr floats in
CSV, npy for arrays, fixed-metadata zips for checkpoints), so identical
seeds produce byte-identical artifacts no matter which front door ran them.
"""

from __future__ import annotations

import io
import json
import time
import uuid
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .editor import CandidateResult
from .embedding import PromptEmbedding
from .errors import NotFoundError
from .finetune import FinetuneResult
from .imaging import image_to_latent, load_image, png_bytes


def _json_dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _fmt(v) -> str:
    return "" if v is None else repr(v)


class ArtifactStore:
    def __init__(self, root):
        self.root = Path(root)
        for sub in ("runs", "sweeps", "autos", "sessions", "jobs", "images"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    @staticmethod
    def new_id(prefix: str) -> str:
        return f"{prefix}-{uuid.uuid4().hex[:10]}"

    # -- images --------------------------------------------------------------

    def register_image(self, image_id: str, png: bytes) -> str:
        path = self.root / "images" / f"{image_id}.png"
        if not path.exists():
            path.write_bytes(png)
        return image_id

    def image_path(self, image_id: str) -> Path:
        path = self.root / "images" / f"{image_id}.png"
        if not path.exists():
            raise NotFoundError(f"no image {image_id!r}")
        return path

    # -- runs ----------------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def save_run(self, result: FinetuneResult, source_png: bytes, run_id: str | None = None) -> str:
        run_id = run_id or self.new_id("run")
        d = self.run_dir(run_id)
        d.mkdir(parents=True, exist_ok=False)
        (d / "config.json").write_text(_json_dumps({"kind": result.kind, **result.config}))
        rows = "\n".join(f"{i},{loss!r}" for i, loss in enumerate(result.loss_trace, start=1))
        (d / "loss_trace.csv").write_text("step,loss\n" + rows + "\n")
        save_checkpoint(d / "learned.ckpt", result.learned_params, result.layout)
        save_checkpoint(d / "original.ckpt", result.original_params, result.layout)
        buf = io.BytesIO()
        np.save(buf, result.learned_embedding.data)
        (d / "embedding.bin").write_bytes(buf.getvalue())
        (d / "source.png").write_bytes(source_png)
        if result.learned_table is not None:
            table_buf = io.BytesIO()
            np.save(table_buf, result.learned_table)
            (d / "text_table.npy").write_bytes(table_buf.getvalue())
        artifacts = sorted(p.name for p in d.iterdir()) + ["manifest.json"]
        (d / "manifest.json").write_text(
            _json_dumps(
                {
                    "run_id": run_id,
                    "kind": result.kind,
                    "caption": result.caption,
                    "steps_run": result.steps_run,
                    "final_loss": result.loss_trace[-1],
                    "wall_time": result.wall_time,
                    "trained_paths": sorted(result.trained_paths),
                    "created_at": time.time(),
                    "artifacts": sorted(artifacts),
                }
            )
        )
        return run_id

    def load_run(self, run_id: str) -> FinetuneResult:
        d = self.run_dir(run_id)
        if not d.is_dir():
            raise NotFoundError(f"no run {run_id!r}")
        manifest = json.loads((d / "manifest.json").read_text())
        config = json.loads((d / "config.json").read_text())
        kind = config.pop("kind")
        learned, layout = load_checkpoint(d / "learned.ckpt")
        original, _ = load_checkpoint(d / "original.ckpt")
        emb = np.load(io.BytesIO((d / "embedding.bin").read_bytes()))
        trace = [
            float(line.split(",")[1])
            for line in (d / "loss_trace.csv").read_text().splitlines()[1:]
            if line
        ]
        table_path = d / "text_table.npy"
        learned_table = np.load(io.BytesIO(table_path.read_bytes())) if table_path.exists() else None
        source = load_image(d / "source.png")
        return FinetuneResult(
            learned_embedding=PromptEmbedding(emb, provenance="learned"),
            learned_params=learned,
            original_params=original,
            loss_trace=trace,
            steps_run=manifest["steps_run"],
            wall_time=manifest["wall_time"],
            trained_paths=frozenset(manifest["trained_paths"]),
            caption=manifest["caption"],
            source_latent=image_to_latent(source),
            kind=kind,
            config=config,
            layout=layout,
            learned_table=learned_table,
        )

    def run_exists(self, run_id: str) -> bool:
        return self.run_dir(run_id).is_dir()

    # -- sweeps ----------------------------------------------------------------

    def sweep_dir(self, sweep_id: str) -> Path:
        return self.root / "sweeps" / sweep_id

    def save_sweep(
        self,
        candidates: list[CandidateResult],
        meta: dict,
        sweep_id: str | None = None,
    ) -> str:
        sweep_id = sweep_id or self.new_id("sweep")
        d = self.sweep_dir(sweep_id)
        d.mkdir(parents=True, exist_ok=False)
        rows = ["index,gamma,alpha,beta,seed,fidelity,alignment,file"]
        records = []
        for cand in candidates:
            fname = f"candidate_{cand.grid_index:02d}.png"
            png = png_bytes(cand.image)
            (d / fname).write_bytes(png)
            image_id = f"{sweep_id}_{cand.grid_index:02d}"
            self.register_image(image_id, png)
            point = cand.request.grid_point()
            rows.append(
                ",".join(
                    [
                        str(cand.grid_index),
                        _fmt(point.get("gamma")),
                        _fmt(point.get("alpha")),
                        _fmt(point.get("beta")),
                        str(cand.request.seed),
                        repr(cand.fidelity),
                        repr(cand.alignment),
                        fname,
                    ]
                )
            )
            records.append(
                {
                    "index": cand.grid_index,
                    **point,
                    "seed": cand.request.seed,
                    "fidelity": cand.fidelity,
                    "alignment": cand.alignment,
                    "file": fname,
                    "image_id": image_id,
                }
            )
        (d / "manifest.csv").write_text("\n".join(rows) + "\n")
        (d / "manifest.json").write_text(
            _json_dumps({"sweep_id": sweep_id, **meta, "count": len(records), "candidates": records})
        )
        return sweep_id

    def load_sweep_manifest(self, sweep_id: str) -> dict:
        path = self.sweep_dir(sweep_id) / "manifest.json"
        if not path.exists():
            raise NotFoundError(f"no sweep {sweep_id!r}")
        return json.loads(path.read_text())

    def sweep_exists(self, sweep_id: str) -> bool:
        return (self.sweep_dir(sweep_id) / "manifest.json").exists()

    # -- autos -----------------------------------------------------------------

    def save_auto(self, auto_id: str, trace_doc: dict, chosen_png: bytes) -> None:
        d = self.root / "autos" / auto_id
        d.mkdir(parents=True, exist_ok=False)
        (d / "trace.json").write_text(_json_dumps(trace_doc))
        (d / "chosen.png").write_bytes(chosen_png)

    def load_auto(self, auto_id: str) -> dict:
        path = self.root / "autos" / auto_id / "trace.json"
        if not path.exists():
            raise NotFoundError(f"no auto run {auto_id!r}")
        return json.loads(path.read_text())

    # -- sessions ----------------------------------------------------------------

    def save_session(self, doc: dict, original_png: bytes) -> None:
        d = self.root / "sessions" / doc["session_id"]
        d.mkdir(parents=True, exist_ok=True)
        (d / "original.png").write_bytes(original_png)
        (d / "session.json").write_text(_json_dumps(doc))

    def update_session(self, doc: dict) -> None:
        d = self.root / "sessions" / doc["session_id"]
        if not d.is_dir():
            raise NotFoundError(f"no session {doc['session_id']!r}")
        (d / "session.json").write_text(_json_dumps(doc))

    def load_session(self, session_id: str) -> dict:
        path = self.root / "sessions" / session_id / "session.json"
        if not path.exists():
            raise NotFoundError(f"no session {session_id!r}")
        return json.loads(path.read_text())

    def session_image(self, session_id: str) -> np.ndarray:
        path = self.root / "sessions" / session_id / "original.png"
        if not path.exists():
            raise NotFoundError(f"no session {session_id!r}")
        return load_image(path)

    # -- jobs ------------------------------------------------------------------

    def save_job(self, doc: dict) -> None:
        (self.root / "jobs" / f"{doc['job_id']}.json").write_text(_json_dumps(doc))

    def load_job(self, job_id: str) -> dict:
        path = self.root / "jobs" / f"{job_id}.json"
        if not path.exists():
            raise NotFoundError(f"no job {job_id!r}")
        return json.loads(path.read_text())
