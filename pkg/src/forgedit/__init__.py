"""forgedit: desk-scale text-guided image editing.

Joint vision-language fine-tuning of a toy conditional diffusion model,
embedding-space editing (vector subtraction / vector projection), and
parameter-forgetting weight merges, with a CLI, an HTTP session service,
and deterministic DDIM sampling throughout.
"""

__version__ = "0.1.0"

from .diffusion import add_noise, cfg_combine, ddim_sample, ddim_step, training_loss
from .editor import EditRequest, SweepSpec, Thresholds, auto_workflow, edit, score_candidate, sweep
from .embedding import PromptEmbedding, vector_projection, vector_subtraction
from .finetune import (
    DreamBoothConfig,
    FinetuneConfig,
    FinetuneResult,
    dreambooth_finetune,
    joint_finetune,
    pretrain,
)
from .forgetting import ForgettingStrategy, builtin_strategy, merge_parameters, strategy_report
from .schedule import NoiseSchedule
from .text import ToyTextEncoder, encode_prompt
from .unet import DEFAULT_LAYOUT, Denoiser, DenoiserParams, StageLayout, predict_noise, trainable_paths

__all__ = [
    "DEFAULT_LAYOUT",
    "Denoiser",
    "DenoiserParams",
    "DreamBoothConfig",
    "EditRequest",
    "FinetuneConfig",
    "FinetuneResult",
    "ForgettingStrategy",
    "NoiseSchedule",
    "PromptEmbedding",
    "StageLayout",
    "SweepSpec",
    "Thresholds",
    "ToyTextEncoder",
    "add_noise",
    "auto_workflow",
    "builtin_strategy",
    "cfg_combine",
    "ddim_sample",
    "ddim_step",
    "dreambooth_finetune",
    "edit",
    "encode_prompt",
    "joint_finetune",
    "merge_parameters",
    "predict_noise",
    "pretrain",
    "score_candidate",
    "strategy_report",
    "sweep",
    "trainable_paths",
    "training_loss",
    "vector_projection",
    "vector_subtraction",
]
