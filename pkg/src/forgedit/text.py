"""Deterministic toy text encoder and the caption-provider seam.

The encoder stands in for a real (frozen) language model: a fixed vocabulary,
a seeded embedding table, and seeded positional offsets.  Tokenization is
lowercase whitespace splitting; unknown words map to a reserved UNK row and
prompts are padded/truncated to the layout's token count.  The empty prompt
encodes to the all-padding embedding, which doubles as the unconditional
branch for guidance.

Caption providers resolve a source prompt for an image.  The bundled kinds:
fixture-table lookup by content fingerprint, a constant caption, and a thin
HTTP client for an external captioning service.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .embedding import PromptEmbedding
from .errors import ArgumentError, NotFoundError
from .imaging import image_fingerprint, load_image

PAD, UNK = "<pad>", "<unk>"
_TABLE_SCALE = 0.5
_POS_SCALE = 0.1


@dataclass(frozen=True)
class ToyTextEncoder:
    """Frozen prompt encoder: vocabulary + embedding table + positional rows."""

    vocab: dict
    table: np.ndarray  # (V, C)
    pos: np.ndarray  # (N, C)

    @classmethod
    def build(cls, words, tokens: int = 8, dim: int = 64, seed: int = 1234) -> "ToyTextEncoder":
        vocab = {PAD: 0, UNK: 1}
        for w in words:
            w = w.lower()
            if w and w not in vocab:
                vocab[w] = len(vocab)
        rng = np.random.default_rng(seed)
        table = rng.standard_normal((len(vocab), dim)) * _TABLE_SCALE
        table[vocab[PAD]] = 0.0
        pos = rng.standard_normal((tokens, dim)) * _POS_SCALE
        return cls(vocab, table, pos)

    @classmethod
    def from_vocab_file(cls, path, tokens: int = 8, dim: int = 64, seed: int = 1234) -> "ToyTextEncoder":
        words = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
        return cls.build(words, tokens=tokens, dim=dim, seed=seed)

    @property
    def tokens(self) -> int:
        return self.pos.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def token_ids(self, prompt: str) -> list[int]:
        words = prompt.lower().split()
        ids = [self.vocab.get(w, self.vocab[UNK]) for w in words][: self.tokens]
        ids += [self.vocab[PAD]] * (self.tokens - len(ids))
        return ids

    def encode(self, prompt: str) -> PromptEmbedding:
        ids = self.token_ids(prompt)
        data = self.table[ids] + self.pos
        return PromptEmbedding(data[None], provenance="encoded")

    def encode_with_table(self, prompt: str, table: np.ndarray) -> PromptEmbedding:
        """Encode against a replacement table (post-training snapshot)."""
        if table.shape != self.table.shape:
            raise ArgumentError(f"table shape {table.shape} != {self.table.shape}")
        ids = self.token_ids(prompt)
        return PromptEmbedding((table[ids] + self.pos)[None], provenance="encoded")


def encode_prompt(enc: ToyTextEncoder, prompt: str) -> PromptEmbedding:
    return enc.encode(prompt)


class CaptionProvider(Protocol):
    def caption_for(self, image: np.ndarray) -> str: ...


@dataclass(frozen=True)
class ConstantCaptionProvider:
    text: str

    def caption_for(self, image: np.ndarray) -> str:
        return self.text


@dataclass
class FixtureCaptionProvider:
    """Looks captions up in a tab-separated image-id -> prompt table.

    Image files named `<image-id>.png` next to the table supply the pixel
    fingerprints used for matching uploads.
    """

    captions_file: Path
    images_dir: Path
    fallback: str | None = None
    _by_fingerprint: dict = field(default_factory=dict, repr=False)
    _by_id: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.captions_file = Path(self.captions_file)
        self.images_dir = Path(self.images_dir)
        for line in self.captions_file.read_text().splitlines():
            if not line.strip():
                continue
            image_id, caption = line.split("\t", 1)
            self._by_id[image_id] = caption
            png = self.images_dir / f"{image_id}.png"
            if png.exists():
                self._by_fingerprint[image_fingerprint(load_image(png))] = caption

    def caption_by_id(self, image_id: str) -> str:
        if image_id not in self._by_id:
            raise NotFoundError(f"no caption for image id {image_id!r}")
        return self._by_id[image_id]

    def caption_for(self, image: np.ndarray) -> str:
        fp = image_fingerprint(image)
        if fp in self._by_fingerprint:
            return self._by_fingerprint[fp]
        if self.fallback is not None:
            return self.fallback
        raise NotFoundError("image not present in the fixture caption table")


@dataclass(frozen=True)
class HTTPCaptionProvider:
    """POSTs the image PNG to a captioning endpoint returning {"caption": ...}."""

    url: str
    timeout: float = 10.0

    def caption_for(self, image: np.ndarray) -> str:
        import httpx

        from .imaging import png_bytes

        resp = httpx.post(self.url, content=png_bytes(image),
                          headers={"content-type": "image/png"}, timeout=self.timeout)
        resp.raise_for_status()
        return str(resp.json()["caption"])
