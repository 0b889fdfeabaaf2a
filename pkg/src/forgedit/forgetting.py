"""Parameter forgetting: merge fine-tuned and pre-fine-tune weights.

Selected parameters are blended back toward their pre-fine-tune values,

    w = sigma * w_learned + (1 - sigma) * w_orig

with sigma = 0 (full forgetting of the selection) as the working default.
Which parameters to forget follows from the UNet's division of labor: the
encoder stages carry space/structure, the decoder stages appearance and
identity, and attention leaves carry the text coupling.  The builtin
strategies express the useful keep/forget splits over those path groups;
custom strategies are path-glob predicates.

Strategy spec strings (CLI/API): a builtin name, or
"custom:<comma-separated path-glob list>[;sigma=<v>]" where the globs select
the paths to FORGET.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ArgumentError, PathSetMismatchError
from .unet import DenoiserParams, STAGE_NAMES, is_attention_path, stage_of_path


@dataclass(frozen=True)
class ForgettingStrategy:
    """A named predicate over parameter paths plus the balance coefficient."""

    name: str
    forget_predicate: Callable[[str], bool] = field(repr=False)
    sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 1.0:
            raise ArgumentError(f"sigma must be in [0, 1], got {self.sigma}")

    def with_sigma(self, sigma: float) -> "ForgettingStrategy":
        return ForgettingStrategy(self.name, self.forget_predicate, sigma)

    def forgets(self, path: str) -> bool:
        return bool(self.forget_predicate(path))


def _enc(path: str) -> bool:
    return path.startswith("encoder.")


def _dec(path: str) -> bool:
    return path.startswith("decoder.")


# name -> predicate selecting the paths to forget
_BUILTINS: dict[str, Callable[[str], bool]] = {
    "none": lambda p: False,
    # keep only attention inside the stage group, forget the rest of it
    "encoderattn": lambda p: _enc(p) and not is_attention_path(p),
    "decoderattn": lambda p: _dec(p) and not is_attention_path(p),
    # decoder ablation ladder: keep cross-attention only / both attentions /
    # both attentions plus the whole decoder.2 block
    "decoder-keep-crossattn": lambda p: _dec(p) and "crossattn" not in p.split("."),
    "decoder-keep-attn": lambda p: _dec(p) and not is_attention_path(p),
    "decoder-keep-attn-block2": lambda p: _dec(p)
    and not is_attention_path(p)
    and not p.startswith("decoder.2."),
    # encoder ablation ladder: keep nothing / attentions / attentions + encoder.1
    "encoder-keep-none": _enc,
    "encoder-keep-attn": lambda p: _enc(p) and not is_attention_path(p),
    "encoder-keep-attn-block1": lambda p: _enc(p)
    and not is_attention_path(p)
    and not p.startswith("encoder.1."),
}

BUILTIN_STRATEGY_NAMES = tuple(_BUILTINS)


def builtin_strategy(name: str, sigma: float = 0.0) -> ForgettingStrategy:
    if name not in _BUILTINS:
        raise ArgumentError(f"unknown strategy {name!r}; builtins: {', '.join(_BUILTINS)}")
    return ForgettingStrategy(name, _BUILTINS[name], sigma)


def custom_strategy(globs, sigma: float = 0.0, name: str | None = None) -> ForgettingStrategy:
    globs = tuple(globs)
    if not globs:
        raise ArgumentError("custom strategy needs at least one path glob")

    def predicate(path: str, _globs=globs) -> bool:
        return any(fnmatch.fnmatchcase(path, g) for g in _globs)

    return ForgettingStrategy(name or f"custom:{','.join(globs)}", predicate, sigma)


def parse_strategy_spec(spec: str) -> ForgettingStrategy:
    """Parse the CLI/API strategy grammar."""
    spec = spec.strip()
    sigma = 0.0
    if ";" in spec:
        head, _, tail = spec.partition(";")
        key, _, value = tail.partition("=")
        if key.strip() != "sigma":
            raise ArgumentError(f"unknown strategy option {tail!r}")
        try:
            sigma = float(value)
        except ValueError as exc:
            raise ArgumentError(f"bad sigma value {value!r}") from exc
        spec = head.strip()
    if spec.startswith("custom:"):
        globs = [g.strip() for g in spec[len("custom:"):].split(",") if g.strip()]
        return custom_strategy(globs, sigma)
    return builtin_strategy(spec, sigma)


def merge_parameters(
    learned: DenoiserParams, original: DenoiserParams, strategy: ForgettingStrategy
) -> DenoiserParams:
    """Apply the balance merge on forgotten paths; keep learned values elsewhere.

    sigma = 0 copies originals bit-exactly, sigma = 1 is a no-op.
    """
    lp, op = set(learned.paths()), set(original.paths())
    if lp != op:
        raise PathSetMismatchError(lp - op, op - lp)
    sigma = strategy.sigma
    entries = {}
    for path, learned_arr in learned.items():
        orig_arr = original[path]
        if learned_arr.shape != orig_arr.shape:
            raise ArgumentError(f"shape mismatch at {path}: {learned_arr.shape} vs {orig_arr.shape}")
        if not strategy.forgets(path):
            entries[path] = learned_arr
        elif sigma == 0.0:
            entries[path] = orig_arr
        elif sigma == 1.0:
            entries[path] = learned_arr
        else:
            entries[path] = sigma * learned_arr + (1.0 - sigma) * orig_arr
    return DenoiserParams(entries)


@dataclass(frozen=True)
class StrategyReport:
    strategy: str
    sigma: float
    per_stage: dict  # stage -> {"forgotten": n, "kept": n}
    forgotten_total: int
    kept_total: int
    max_abs_delta_forgotten: float

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "sigma": self.sigma,
            "per_stage": self.per_stage,
            "forgotten_total": self.forgotten_total,
            "kept_total": self.kept_total,
            "max_abs_delta_forgotten": self.max_abs_delta_forgotten,
        }


def strategy_report(
    learned: DenoiserParams, original: DenoiserParams, strategy: ForgettingStrategy
) -> StrategyReport:
    """Per-stage forgotten/kept counts and the residual delta after merging."""
    merged = merge_parameters(learned, original, strategy)
    per_stage = {s: {"forgotten": 0, "kept": 0} for s in STAGE_NAMES}
    max_delta = 0.0
    forgotten = kept = 0
    for path, _ in learned.items():
        bucket = per_stage[stage_of_path(path)]
        if strategy.forgets(path):
            bucket["forgotten"] += 1
            forgotten += 1
            delta = float(np.max(np.abs(merged[path] - original[path]))) if merged[path].size else 0.0
            max_delta = max(max_delta, delta)
        else:
            bucket["kept"] += 1
            kept += 1
    return StrategyReport(strategy.name, strategy.sigma, per_stage, forgotten, kept, max_delta)
