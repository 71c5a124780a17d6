"""gridqa: evaluate multi-choice VideoQA by compositing sampled frames into
a single square grid image and asking a multimodal endpoint for the answer
letter.

The library surface mirrors the pipeline stages: ingest video frames, plan
middle-frame samples, composite the montage, build prompts, run batched
inference, and score per-question-type accuracy.
"""

from .dataset import (
    Manifest,
    QaItem,
    adapt_nextqa,
    adapt_star,
    export_finetune,
    load_manifest,
    save_manifest,
)
from .grid import GridImage, compose, grid_filename, patch_count, save
from .inference import BackendConfig, InferenceRecord, render_request, run_batch
from .ingest import Frame, VideoIngest, VideoRef
from .prompts import DIRECT_SUFFIX, EXPLAIN_SUFFIX, PromptText, build
from .sampling import FramePlan, plan
from .scoring import EvalReport, compare, parse_letter, score

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "DIRECT_SUFFIX",
    "EXPLAIN_SUFFIX",
    "EvalReport",
    "Frame",
    "FramePlan",
    "GridImage",
    "InferenceRecord",
    "Manifest",
    "PromptText",
    "QaItem",
    "VideoIngest",
    "VideoRef",
    "adapt_nextqa",
    "adapt_star",
    "build",
    "compare",
    "compose",
    "export_finetune",
    "grid_filename",
    "load_manifest",
    "parse_letter",
    "patch_count",
    "plan",
    "render_request",
    "run_batch",
    "save",
    "save_manifest",
    "score",
]
