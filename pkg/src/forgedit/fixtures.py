"""Bundled desk-scale fixtures: a 64-image synthetic corpus, captions, the
held-out editing image, the shared vocabulary, and calibration constants.

Images are 32x32 flat-color scenes (one shape on a plain background) rendered
from integer coordinate masks, so regeneration is bit-deterministic.  The
committed copies under data/ are the source of truth at runtime; the
generator exists so tests can prove the committed files match the code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .imaging import IMAGE_SIZE, load_image, save_png
from .text import FixtureCaptionProvider, ToyTextEncoder

DATA_DIR = Path(__file__).parent / "data"

COLORS = {
    "red": (0.85, 0.10, 0.10),
    "green": (0.10, 0.75, 0.20),
    "blue": (0.15, 0.30, 0.90),
    "yellow": (0.95, 0.85, 0.10),
}
BACKGROUNDS = {
    "black": (0.05, 0.05, 0.05),
    "white": (0.95, 0.95, 0.95),
    "gray": (0.50, 0.50, 0.50),
}
SHAPES = ("circle", "square")
POSITIONS = {
    "center": (16, 16),
    "left": (9, 16),
    "right": (23, 16),
    "top": (16, 9),
    "bottom": (16, 23),
}
CORPUS_SIZE = 64
_SHUFFLE_SEED = 2024


@dataclass(frozen=True)
class CorpusItem:
    image_id: str
    caption: str
    image: np.ndarray


def render_scene(color: str, shape: str, bg: str, position: str) -> np.ndarray:
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    cx, cy = POSITIONS[position]
    if shape == "circle":
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= 8**2
    else:
        mask = (np.abs(xx - cx) <= 7) & (np.abs(yy - cy) <= 7)
    img = np.empty((3, IMAGE_SIZE, IMAGE_SIZE))
    for c in range(3):
        img[c] = BACKGROUNDS[bg][c]
        img[c][mask] = COLORS[color][c]
    return img


def scene_caption(color: str, shape: str, bg: str, position: str) -> str:
    if position == "center":
        return f"a {color} {shape} on {bg}"
    return f"a {color} {shape} {position} on {bg}"


def _all_combos() -> list[tuple]:
    return [
        (color, shape, bg, pos)
        for color in COLORS
        for shape in SHAPES
        for bg in BACKGROUNDS
        for pos in POSITIONS
    ]


def generate_corpus() -> tuple[list[CorpusItem], CorpusItem]:
    """The 64 pretraining scenes plus the held-out editing fixture."""
    combos = _all_combos()
    order = np.random.default_rng(_SHUFFLE_SEED).permutation(len(combos))
    train = [combos[i] for i in order[:CORPUS_SIZE]]
    held_out = combos[order[CORPUS_SIZE]]
    items = [
        CorpusItem(f"img_{i:03d}", scene_caption(*combo), render_scene(*combo))
        for i, combo in enumerate(train)
    ]
    edit_item = CorpusItem("edit_000", scene_caption(*held_out), render_scene(*held_out))
    return items, edit_item


def vocabulary_words() -> list[str]:
    words = set()
    items, edit_item = generate_corpus()
    for item in items + [edit_item]:
        words.update(item.caption.split())
    return sorted(words)


def write_fixture_data(data_dir: Path = DATA_DIR) -> None:
    """Regenerate the committed fixture files (images, captions, vocab)."""
    data_dir = Path(data_dir)
    (data_dir / "images").mkdir(parents=True, exist_ok=True)
    items, edit_item = generate_corpus()
    lines = []
    for item in items + [edit_item]:
        save_png(item.image, data_dir / "images" / f"{item.image_id}.png")
        lines.append(f"{item.image_id}\t{item.caption}")
    (data_dir / "captions.tsv").write_text("\n".join(lines) + "\n")
    (data_dir / "vocab.txt").write_text("\n".join(vocabulary_words()) + "\n")


def captions_file() -> Path:
    return DATA_DIR / "captions.tsv"


def images_dir() -> Path:
    return DATA_DIR / "images"


@lru_cache(maxsize=1)
def caption_table() -> dict:
    table = {}
    for line in captions_file().read_text().splitlines():
        if line.strip():
            image_id, caption = line.split("\t", 1)
            table[image_id] = caption
    return table


def load_corpus() -> list[CorpusItem]:
    """The committed pretraining corpus (images decoded from data/images)."""
    table = caption_table()
    return [
        CorpusItem(image_id, table[image_id], load_image(images_dir() / f"{image_id}.png"))
        for image_id in sorted(table)
        if image_id.startswith("img_")
    ]


def edit_fixture() -> CorpusItem:
    table = caption_table()
    return CorpusItem("edit_000", table["edit_000"], load_image(images_dir() / "edit_000.png"))


@lru_cache(maxsize=1)
def default_encoder() -> ToyTextEncoder:
    return ToyTextEncoder.from_vocab_file(DATA_DIR / "vocab.txt")


def fixture_caption_provider(fallback: str | None = None) -> FixtureCaptionProvider:
    return FixtureCaptionProvider(captions_file(), images_dir(), fallback=fallback)


@lru_cache(maxsize=1)
def calibration() -> dict:
    """Desk-scale configs and thresholds committed alongside the fixtures."""
    return json.loads((DATA_DIR / "calibration.json").read_text())


def golden_trace_path() -> Path:
    return DATA_DIR / "golden_trace.json"
