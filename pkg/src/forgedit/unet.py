"""Conditional toy UNet noise predictor with a named parameter tree.

Every parameter path has the form

    <stage>.<block>.<leaf>

where <stage> is one of encoder.0..3, mid, decoder.0..3, and <block> is one
of resnet, selfattn, crossattn, proj.  The layer-freezing recipe and the
forgetting strategies both select parameters purely by these paths, so the
naming is part of the public contract (checkpoints, merge reports, CLI).

Topology at the default layout (4x8x8 input, widths 32/64/128/128):

    encoder.0  8x8 @32   -> down
    encoder.1  4x4 @64   -> down
    encoder.2  2x2 @128
    encoder.3  2x2 @128
    mid        2x2 @128
    decoder.0  2x2 @128  (skip from encoder.3)
    decoder.1  2x2 @128  (skip from encoder.2) -> up
    decoder.2  4x4 @64   (skip from encoder.1) -> up
    decoder.3  8x8 @32   (skip from encoder.0) -> out proj

Decoder stage i consumes the skip from encoder stage (3 - i).  Timesteps
enter through sinusoidal features projected per stage inside each resnet
block.  All math is float64 for tight gradient checks.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ArgumentError

torch.set_num_threads(int(os.environ.get("FORGEDIT_TORCH_THREADS", "1")))

ENCODER_STAGES = 4
DECODER_STAGES = 4
STAGE_NAMES = tuple(
    [f"encoder.{i}" for i in range(ENCODER_STAGES)]
    + ["mid"]
    + [f"decoder.{i}" for i in range(DECODER_STAGES)]
)
TRAINABLE_STAGES = ("encoder.0", "encoder.1", "encoder.2", "decoder.1", "decoder.2", "decoder.3")
FROZEN_STAGES = ("encoder.3", "mid", "decoder.0")


@dataclass(frozen=True)
class StageLayout:
    """Static shape configuration of the denoiser."""

    in_channels: int = 4
    image_size: int = 8
    widths: tuple = (32, 64, 128, 128)
    context_tokens: int = 8  # N
    context_dim: int = 64  # C
    time_dim: int = 32
    norm_groups: int = 8

    def __post_init__(self):
        if len(self.widths) != ENCODER_STAGES:
            raise ArgumentError(f"expected {ENCODER_STAGES} stage widths, got {self.widths}")
        for w in self.widths:
            if w % self.norm_groups != 0:
                raise ArgumentError(f"width {w} not divisible by norm_groups={self.norm_groups}")

    @property
    def input_shape(self) -> tuple:
        return (self.in_channels, self.image_size, self.image_size)

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "image_size": self.image_size,
            "widths": list(self.widths),
            "context_tokens": self.context_tokens,
            "context_dim": self.context_dim,
            "time_dim": self.time_dim,
            "norm_groups": self.norm_groups,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StageLayout":
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        return cls(**d)


DEFAULT_LAYOUT = StageLayout()


def stage_of_path(path: str) -> str:
    """Stage prefix ("encoder.2", "mid", ...) of a parameter path."""
    parts = path.split(".")
    if parts[0] == "mid":
        return "mid"
    if parts[0] in ("encoder", "decoder") and len(parts) >= 2:
        return f"{parts[0]}.{parts[1]}"
    raise ArgumentError(f"not a denoiser parameter path: {path!r}")


def is_attention_path(path: str) -> bool:
    """True for every leaf under a selfattn or crossattn block segment."""
    parts = path.split(".")
    return "selfattn" in parts or "crossattn" in parts


class DenoiserParams:
    """Ordered map parameter-path -> float64 array.

    The path set is fixed at construction; merging and loading never add or
    remove paths.  Arrays are owned (copied in, copied out).
    """

    def __init__(self, entries: dict):
        self._entries: dict[str, np.ndarray] = {}
        for path, arr in entries.items():
            stage_of_path(path)  # validates prefix
            owned = np.array(arr, dtype=np.float64)
            owned.flags.writeable = False
            self._entries[path] = owned
        for stage in STAGE_NAMES:
            kinds = {p.split(".")[-2] for p in self._entries if stage_of_path(p) == stage}
            if "selfattn" not in kinds or "crossattn" not in kinds:
                raise ArgumentError(f"stage {stage} lacks selfattn/crossattn parameters")

    def paths(self) -> list[str]:
        return list(self._entries)

    def __getitem__(self, path: str) -> np.ndarray:
        return self._entries[path]

    def __contains__(self, path: str) -> bool:
        return path in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> Iterable:
        return self._entries.items()

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self._entries)

    def bit_equal(self, other: "DenoiserParams", paths: Iterable[str] | None = None) -> bool:
        """Exact byte equality over the given paths (all paths if None)."""
        paths = list(paths) if paths is not None else self.paths()
        for p in paths:
            a, b = self._entries[p], other._entries[p]
            if a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        return True


def trainable_paths(params: DenoiserParams) -> set:
    """Paths optimized during joint fine-tuning (shallow encoder/decoder stages)."""
    return {p for p in params.paths() if stage_of_path(p) in TRAINABLE_STAGES}


def select_paths(params: DenoiserParams, predicate: Callable[[str], bool]) -> set:
    return {p for p in params.paths() if predicate(p)}


def sinusoidal_time_features(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos positional features of integer timesteps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1)
    )
    ang = t.to(torch.float64)[:, None] * freqs[None, :]
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=1)


def _p(shape) -> nn.Parameter:
    return nn.Parameter(torch.zeros(*shape, dtype=torch.float64))


class _Resnet(nn.Module):
    def __init__(self, c_in: int, c_out: int, time_dim: int, groups: int):
        super().__init__()
        self.c_in, self.c_out, self.groups = c_in, c_out, groups
        self.n1w, self.n1b = _p((c_in,)), _p((c_in,))
        self.w1, self.b1 = _p((c_out, c_in, 3, 3)), _p((c_out,))
        self.tw, self.tb = _p((time_dim, c_out)), _p((c_out,))
        self.n2w, self.n2b = _p((c_out,)), _p((c_out,))
        self.w2, self.b2 = _p((c_out, c_out, 3, 3)), _p((c_out,))
        if c_in != c_out:
            self.ws, self.bs = _p((c_out, c_in, 1, 1)), _p((c_out,))

    def forward(self, x, temb):
        h = F.silu(F.group_norm(x, self.groups, self.n1w, self.n1b))
        h = F.conv2d(h, self.w1, self.b1, padding=1)
        h = h + (temb @ self.tw + self.tb)[:, :, None, None]
        h = F.silu(F.group_norm(h, self.groups, self.n2w, self.n2b))
        h = F.conv2d(h, self.w2, self.b2, padding=1)
        skip = x if self.c_in == self.c_out else F.conv2d(x, self.ws, self.bs)
        return skip + h


class _Attention(nn.Module):
    """Single-head attention over spatial positions; cross variant keys/values
    come from the token context."""

    def __init__(self, ch: int, kv_dim: int, groups: int):
        super().__init__()
        self.ch, self.groups = ch, groups
        self.nw, self.nb = _p((ch,)), _p((ch,))
        self.qw, self.qb = _p((ch, ch)), _p((ch,))
        self.kw, self.kb = _p((kv_dim, ch)), _p((ch,))
        self.vw, self.vb = _p((kv_dim, ch)), _p((ch,))
        self.ow, self.ob = _p((ch, ch)), _p((ch,))

    def forward(self, x, context=None):
        b, c, hh, ww = x.shape
        h = F.group_norm(x, self.groups, self.nw, self.nb)
        tokens = h.reshape(b, c, hh * ww).transpose(1, 2)  # (B, HW, ch)
        kv = tokens if context is None else context
        q = tokens @ self.qw + self.qb
        k = kv @ self.kw + self.kb
        v = kv @ self.vw + self.vb
        attn = torch.softmax(q @ k.transpose(1, 2) / math.sqrt(c), dim=-1)
        out = (attn @ v) @ self.ow + self.ob
        return x + out.transpose(1, 2).reshape(b, c, hh, ww)


class _Proj(nn.Module):
    """Container for a stage's non-block convolutions (input/output/resampling)."""

    def __init__(self, in_conv=None, down=None, up=None, out_conv=None):
        super().__init__()
        if in_conv:
            self.in_w, self.in_b = _p((in_conv[1], in_conv[0], 3, 3)), _p((in_conv[1],))
        if down:
            self.down_w, self.down_b = _p((down[1], down[0], 3, 3)), _p((down[1],))
        if up:
            self.up_w, self.up_b = _p((up[1], up[0], 3, 3)), _p((up[1],))
        if out_conv:
            self.out_w, self.out_b = _p((out_conv[1], out_conv[0], 3, 3)), _p((out_conv[1],))


class _Stage(nn.Module):
    def __init__(self, c_in: int, c_out: int, layout: StageLayout, **proj_kw):
        super().__init__()
        g = layout.norm_groups
        self.resnet = _Resnet(c_in, c_out, layout.time_dim, g)
        self.selfattn = _Attention(c_out, c_out, g)
        self.crossattn = _Attention(c_out, layout.context_dim, g)
        if any(proj_kw.values()):
            self.proj = _Proj(**proj_kw)

    def blocks(self, x, temb, context):
        x = self.resnet(x, temb)
        x = self.selfattn(x)
        x = self.crossattn(x, context)
        return x


class Denoiser(nn.Module):
    """eps_theta(x_t, t, e): predicts the noise added to a latent.

    Thread-safety: forward is read-only over parameters; training must run on
    a private instance.
    """

    def __init__(self, layout: StageLayout = DEFAULT_LAYOUT, params: DenoiserParams | None = None,
                 init_seed: int = 0):
        super().__init__()
        self.layout = layout
        w = layout.widths
        self.encoder = nn.ModuleList(
            [
                _Stage(w[0], w[0], layout, in_conv=(layout.in_channels, w[0]), down=(w[0], w[0])),
                _Stage(w[0], w[1], layout, down=(w[1], w[1])),
                _Stage(w[1], w[2], layout),
                _Stage(w[2], w[3], layout),
            ]
        )
        self.mid = _Stage(w[3], w[3], layout)
        # decoder widths mirror the encoder; stage i sees skip from encoder 3-i
        self.decoder = nn.ModuleList(
            [
                _Stage(w[3] + w[3], w[3], layout),
                _Stage(w[3] + w[2], w[3], layout, up=(w[3], w[1])),
                _Stage(w[1] + w[1], w[1], layout, up=(w[1], w[0])),
                _Stage(w[0] + w[0], w[0], layout, out_conv=(w[0], layout.in_channels)),
            ]
        )
        if params is _RAW_ZEROS:
            pass
        elif params is not None:
            self.load_params(params)
        else:
            self.load_params(_fill_params(self, init_seed))

    # -- parameter tree ----------------------------------------------------

    def param_paths(self) -> list[str]:
        return [name for name, _ in self.named_parameters()]

    def export_params(self) -> DenoiserParams:
        return DenoiserParams(
            {name: p.detach().numpy() for name, p in self.named_parameters()}
        )

    def load_params(self, params: DenoiserParams) -> "Denoiser":
        own = dict(self.named_parameters())
        if set(own) != set(params.paths()):
            raise ArgumentError("parameter paths do not match this layout")
        with torch.no_grad():
            for name, p in own.items():
                arr = params[name]
                if tuple(arr.shape) != tuple(p.shape):
                    raise ArgumentError(f"shape mismatch at {name}: {arr.shape} vs {tuple(p.shape)}")
                p.copy_(torch.from_numpy(np.array(arr)))
        return self

    # -- forward -----------------------------------------------------------

    def forward(self, x: torch.Tensor, t, e: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4:
            raise ArgumentError(f"x must be (B, C, H, W), got {tuple(x.shape)}")
        lay = self.layout
        if x.shape[1:] != (lay.in_channels, lay.image_size, lay.image_size):
            raise ArgumentError(f"x shape {tuple(x.shape)} does not match layout {lay.input_shape}")
        if e.ndim != 3 or e.shape[0] != x.shape[0] or e.shape[1:] != (lay.context_tokens, lay.context_dim):
            raise ArgumentError(
                f"e must be ({x.shape[0]}, {lay.context_tokens}, {lay.context_dim}), got {tuple(e.shape)}"
            )
        if isinstance(t, int):
            t = torch.full((x.shape[0],), t, dtype=torch.long)
        else:
            t = torch.as_tensor(t, dtype=torch.long)
        temb = sinusoidal_time_features(t, lay.time_dim)

        enc0 = self.encoder[0]
        x = F.conv2d(x, enc0.proj.in_w, enc0.proj.in_b, padding=1)
        skips = []
        for stage in self.encoder:
            x = stage.blocks(x, temb, e)
            skips.append(x)
            if hasattr(stage, "proj") and hasattr(stage.proj, "down_w"):
                x = F.conv2d(x, stage.proj.down_w, stage.proj.down_b, stride=2, padding=1)
        x = self.mid.blocks(x, temb, e)
        for i, stage in enumerate(self.decoder):
            x = torch.cat([x, skips[DECODER_STAGES - 1 - i]], dim=1)
            x = stage.blocks(x, temb, e)
            if hasattr(stage, "proj") and hasattr(stage.proj, "up_w"):
                x = F.interpolate(x, scale_factor=2, mode="nearest")
                x = F.conv2d(x, stage.proj.up_w, stage.proj.up_b, padding=1)
        dec3 = self.decoder[-1]
        return F.conv2d(x, dec3.proj.out_w, dec3.proj.out_b, padding=1)

    def predict(self, xt: np.ndarray, t: int, e: np.ndarray) -> np.ndarray:
        """Single-sample numpy convenience wrapper around forward."""
        with torch.no_grad():
            out = self.forward(
                torch.tensor(xt, dtype=torch.float64)[None],
                t,
                torch.tensor(e, dtype=torch.float64),
            )
        return out[0].numpy()


class _RawZeros:
    """Sentinel: build the module tree but skip parameter loading."""


_RAW_ZEROS = _RawZeros()


def _fill_params(skeleton: nn.Module, seed: int) -> DenoiserParams:
    rng = np.random.default_rng(seed)
    entries = {}
    for name, p in skeleton.named_parameters():
        shape = tuple(p.shape)
        leaf = name.split(".")[-1]
        if leaf in ("n1w", "n2w", "nw"):
            arr = np.ones(shape)
        elif leaf.endswith("b") or leaf == "bs":
            arr = np.zeros(shape)
        elif len(shape) == 4:
            fan_in = shape[1] * shape[2] * shape[3]
            arr = rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)
            # damp residual-branch outputs so the stacked skip stream starts tame
            if leaf in ("w2", "out_w"):
                arr *= 0.2
        elif len(shape) == 2:
            arr = rng.standard_normal(shape) / math.sqrt(shape[0])
            if leaf == "ow":
                arr *= 0.2
        else:
            arr = np.zeros(shape)
        entries[name] = arr
    return DenoiserParams(entries)


def init_params(layout: StageLayout = DEFAULT_LAYOUT, seed: int = 0) -> DenoiserParams:
    """Seeded random initialization, shaped by walking the module tree.

    Norm weights start at 1, biases at 0, convolutions He-scaled, matmul
    weights 1/sqrt(fan_in); drawn from numpy so checkpoints are independent
    of the torch RNG.
    """
    return _fill_params(Denoiser(layout, params=_RAW_ZEROS), seed)


def predict_noise(params: DenoiserParams, xt, t: int, e, layout: StageLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Functional one-shot prediction; deterministic given (params, xt, t, e)."""
    from .diffusion import _as_array

    xt = _as_array(xt)
    e_arr = np.asarray(e.data if hasattr(e, "data") and not isinstance(e, np.ndarray) else e,
                       dtype=np.float64)
    model = Denoiser(layout, params=params)
    return model.predict(xt, t, e_arr)
