"""Service/CLI configuration: a small TOML file plus environment overrides.

Two tables: [service] for the HTTP daemon (storage root, port, worker count,
caption provider) and [cli] for flag defaults (any long flag name with
dashes replaced by underscores).  Environment variables FORGEDIT_DATA_DIR
and FORGEDIT_PORT override the file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ArgumentError
from .text import CaptionProvider, ConstantCaptionProvider, FixtureCaptionProvider, HTTPCaptionProvider


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: str = "./forgedit-data"
    port: int = 8765
    workers: int = 1
    caption_provider: str = "fixture"  # fixture | constant | http
    caption_text: str = "an image"
    captions_file: str | None = None
    images_dir: str | None = None
    caption_url: str | None = None
    caption_fallback: str | None = "an image"
    pretrained_ckpt: str | None = None

    def resolve_pretrained(self) -> Path:
        path = Path(self.pretrained_ckpt) if self.pretrained_ckpt else Path(self.data_dir) / "pretrained.ckpt"
        return path


def _load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_config(path=None, env: dict | None = None) -> tuple[ServiceConfig, dict]:
    """Returns (service config, raw [cli] defaults table)."""
    env = os.environ if env is None else env
    doc: dict = {}
    if path is not None:
        doc = _load_toml(path)
    service_tbl = dict(doc.get("service", {}))
    cli_tbl = dict(doc.get("cli", {}))
    if env.get("FORGEDIT_DATA_DIR"):
        service_tbl["data_dir"] = env["FORGEDIT_DATA_DIR"]
    if env.get("FORGEDIT_PORT"):
        service_tbl["port"] = int(env["FORGEDIT_PORT"])
    known = {f for f in ServiceConfig.__dataclass_fields__}
    unknown = set(service_tbl) - known
    if unknown:
        raise ArgumentError(f"unknown [service] keys: {sorted(unknown)}")
    return ServiceConfig(**service_tbl), cli_tbl


def build_caption_provider(cfg: ServiceConfig) -> CaptionProvider:
    if cfg.caption_provider == "constant":
        return ConstantCaptionProvider(cfg.caption_text)
    if cfg.caption_provider == "fixture":
        if cfg.captions_file:
            return FixtureCaptionProvider(
                Path(cfg.captions_file),
                Path(cfg.images_dir) if cfg.images_dir else Path(cfg.captions_file).parent / "images",
                fallback=cfg.caption_fallback,
            )
        from . import fixtures

        return fixtures.fixture_caption_provider(fallback=cfg.caption_fallback)
    if cfg.caption_provider == "http":
        if not cfg.caption_url:
            raise ArgumentError("caption_provider=http needs caption_url")
        return HTTPCaptionProvider(cfg.caption_url)
    raise ArgumentError(f"unknown caption provider {cfg.caption_provider!r}")
