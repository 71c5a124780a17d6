"""Deterministic synthetic corpus for tests and smoke runs.

Videos are frame directories of solid-color frames whose colors are a pure
function of (video number, frame index), so any stage of the pipeline can be
checked against the generator exactly. Questions are four-option multi-choice
with STAR-style types; answers cycle so a fixed-letter backend lands on a
known accuracy (answer A is correct for exactly one item in four).
"""

from __future__ import annotations

from pathlib import Path

from PIL import Image

from .dataset import Manifest, QaItem, STAR_TYPES, save_manifest
from .ingest import VideoRef
from .letters import OPTION_LETTERS

FRAME_COUNTS = (5, 9, 16, 33, 48, 100, 7, 12, 27, 64, 81, 50)


def frame_color(video_number: int, frame_index: int) -> tuple[int, int, int]:
    """Solid RGB color of one synthetic frame."""
    return (
        (37 * video_number + 11 * frame_index) % 256,
        (91 * frame_index + 5) % 256,
        (53 * video_number + 17) % 256,
    )


def video_frame_count(video_number: int) -> int:
    return FRAME_COUNTS[video_number % len(FRAME_COUNTS)]


def write_frame_dir(
    videos_root: Path,
    video_number: int,
    *,
    frame_count: int | None = None,
    size: tuple[int, int] = (64, 48),
) -> Path:
    """Materialize one synthetic video as a frame directory; returns its path."""
    count = frame_count if frame_count is not None else video_frame_count(video_number)
    directory = videos_root / f"vid{video_number:02d}"
    directory.mkdir(parents=True, exist_ok=True)
    for index in range(count):
        target = directory / f"frame_{index:06d}.png"
        if target.exists():
            continue
        Image.new("RGB", size, frame_color(video_number, index)).save(target)
    return directory


def synthetic_item(videos_root: Path, item_number: int) -> QaItem:
    """One deterministic QA item over its own synthetic video."""
    qtype = STAR_TYPES[item_number % len(STAR_TYPES)]
    answer_idx = (item_number // 4) % 4
    options = tuple(
        f"{qtype.lower()} outcome {OPTION_LETTERS[k].lower()}{item_number}" for k in range(4)
    )
    video_dir = videos_root / f"vid{item_number:02d}"
    return QaItem(
        qid=f"sq{item_number:03d}",
        video=VideoRef(id=video_dir.name, source=video_dir),
        question=f"what happens in scene {item_number}?",
        options=options,
        answer_idx=answer_idx,
        qtype=qtype,
        split="val",
    )


def build_corpus(root: Path, item_count: int = 48) -> tuple[Path, Manifest]:
    """Write frame dirs plus a manifest under ``root``; returns (manifest path, manifest)."""
    videos_root = root / "videos"
    items = []
    for number in range(item_count):
        write_frame_dir(videos_root, number)
        items.append(synthetic_item(videos_root, number))
    manifest = Manifest(items=items, name=f"synthetic{item_count}", default_grid_side=3)
    manifest_path = root / f"synthetic{item_count}.jsonl"
    save_manifest(manifest, manifest_path)
    return manifest_path, manifest
