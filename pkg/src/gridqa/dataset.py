"""Canonical multi-choice QA manifests and dataset adapters.

Upstream benchmark releases ship in assorted table/JSON layouts, so adapters
normalize them once into one line-delimited manifest schema; everything
downstream (preprocess, eval, scoring, export) reads only that schema.

Manifest record, one JSON object per line::

    {"qid": str, "video": str, "fps": num?, "frame_count": int?,
     "question": str, "options": [str, ...], "answer_idx": int,
     "qtype": str, "split": str}

Relative ``video`` paths are resolved against the manifest file's directory.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    BadAnswerIndex,
    DuplicateQid,
    InvalidArgument,
    MissingColumn,
    MissingField,
    MissingGridImage,
    ParseFailure,
    UnknownTypeCode,
)
from .grid import grid_filename
from .ingest import VideoRef
from .letters import MAX_OPTIONS, MIN_OPTIONS, letter_for_index

logger = logging.getLogger(__name__)

QUESTION_TYPES = (
    "Causal",
    "Temporal",
    "Descriptive",
    "Interaction",
    "Sequence",
    "Prediction",
    "Feasibility",
    "Other",
)
NEXTQA_TYPES = ("Causal", "Temporal", "Descriptive")
STAR_TYPES = ("Interaction", "Sequence", "Prediction", "Feasibility")
SPLITS = ("train", "val", "test")

NEXTQA_DEFAULT_GRID_SIDE = 4
STAR_DEFAULT_GRID_SIDE = 3
FALLBACK_GRID_SIDE = 3

NEXTQA_TYPE_CODES = {"C": "Causal", "T": "Temporal", "D": "Descriptive"}

VIDEO_FILE_EXTENSIONS = (".mp4", ".avi", ".mkv", ".webm", ".mov")

IMAGE_PLACEHOLDER = "<image>"


@dataclass(frozen=True)
class QaItem:
    """One multi-choice question bound to a video."""

    qid: str
    video: VideoRef
    question: str
    options: tuple[str, ...]
    answer_idx: int
    qtype: str
    split: str

    def __post_init__(self) -> None:
        if not self.qid:
            raise InvalidArgument("qid must be non-empty")
        if not MIN_OPTIONS <= len(self.options) <= MAX_OPTIONS:
            raise InvalidArgument(
                f"{self.qid}: need {MIN_OPTIONS}-{MAX_OPTIONS} options, got {len(self.options)}"
            )
        if any(not opt for opt in self.options):
            raise InvalidArgument(f"{self.qid}: options must be non-empty strings")
        if not 0 <= self.answer_idx < len(self.options):
            raise BadAnswerIndex(
                f"{self.qid}: answer_idx {self.answer_idx} outside [0, {len(self.options)})"
            )
        if self.qtype not in QUESTION_TYPES:
            raise UnknownTypeCode(f"{self.qid}: unknown question type {self.qtype!r}")
        if self.split not in SPLITS:
            raise InvalidArgument(f"{self.qid}: unknown split {self.split!r}")

    @property
    def gold_letter(self) -> str:
        return letter_for_index(self.answer_idx)


@dataclass
class Manifest:
    """An ordered, qid-unique collection of QaItems."""

    items: list[QaItem]
    name: str = "manifest"
    default_grid_side: int = FALLBACK_GRID_SIDE

    def __post_init__(self) -> None:
        if self.default_grid_side < 1:
            raise InvalidArgument("default_grid_side must be >= 1")
        seen: dict[str, int] = {}
        for lineno, item in enumerate(self.items, start=1):
            if item.qid in seen:
                raise DuplicateQid(item.qid, seen[item.qid], lineno)
            seen[item.qid] = lineno

    def __len__(self) -> int:
        return len(self.items)

    def by_qid(self) -> dict[str, QaItem]:
        return {item.qid: item for item in self.items}

    def qtypes(self) -> list[str]:
        """Question types present, in canonical order."""
        present = {item.qtype for item in self.items}
        return [t for t in QUESTION_TYPES if t in present]

    def family(self) -> str | None:
        """'star' or 'nextqa' when all types belong to one benchmark family."""
        present = set(self.qtypes())
        if present and present <= set(STAR_TYPES):
            return "star"
        if present and present <= set(NEXTQA_TYPES):
            return "nextqa"
        return None

    def videos(self) -> list[VideoRef]:
        """Unique video refs in first-seen order."""
        seen: dict[str, VideoRef] = {}
        for item in self.items:
            seen.setdefault(item.video.id, item.video)
        return list(seen.values())


def family_grid_side(family: str | None) -> int:
    if family == "star":
        return STAR_DEFAULT_GRID_SIDE
    if family == "nextqa":
        return NEXTQA_DEFAULT_GRID_SIDE
    return FALLBACK_GRID_SIDE


def _video_id_for(source: str) -> str:
    return Path(source).stem


def _item_from_record(record: dict, base_dir: Path, lineno: int) -> QaItem:
    for key in ("qid", "video", "question", "options", "answer_idx", "qtype", "split"):
        if key not in record:
            raise ParseFailure(lineno, f"missing field {key!r}")
    options = record["options"]
    if not isinstance(options, list) or not all(isinstance(o, str) for o in options):
        raise ParseFailure(lineno, "options must be a list of strings")
    raw_source = str(record["video"])
    source = Path(raw_source)
    if not source.is_absolute():
        source = base_dir / source
    fps = record.get("fps")
    frame_count = record.get("frame_count")
    try:
        video = VideoRef(
            id=_video_id_for(raw_source),
            source=source,
            fps=float(fps) if fps is not None else None,
            frame_count_hint=int(frame_count) if frame_count is not None else None,
        )
        return QaItem(
            qid=str(record["qid"]),
            video=video,
            question=str(record["question"]),
            options=tuple(options),
            answer_idx=int(record["answer_idx"]),
            qtype=str(record["qtype"]),
            split=str(record["split"]),
        )
    except BadAnswerIndex as exc:
        raise BadAnswerIndex(f"line {lineno}: {exc}") from exc
    except (InvalidArgument, UnknownTypeCode, TypeError, ValueError) as exc:
        raise ParseFailure(lineno, str(exc)) from exc


def load_manifest(path: str | Path, *, default_grid_side: int | None = None) -> Manifest:
    """Read a canonical JSONL manifest; validation errors name line numbers."""
    path = Path(path)
    base_dir = path.resolve().parent
    items: list[QaItem] = []
    qid_lines: dict[str, int] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseFailure(lineno, f"invalid JSON: {exc}") from exc
            item = _item_from_record(record, base_dir, lineno)
            if item.qid in qid_lines:
                raise DuplicateQid(item.qid, qid_lines[item.qid], lineno)
            qid_lines[item.qid] = lineno
            items.append(item)

    manifest = Manifest(items=items, name=path.stem)
    manifest.default_grid_side = (
        default_grid_side if default_grid_side is not None
        else family_grid_side(manifest.family())
    )
    return manifest


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write the canonical JSONL form; video paths relativized when possible."""
    path = Path(path)
    base_dir = path.resolve().parent
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for item in manifest.items:
            source = item.video.source.resolve()
            try:
                video_str = str(source.relative_to(base_dir))
            except ValueError:
                video_str = str(source)
            record: dict = {
                "qid": item.qid,
                "video": video_str,
                "question": item.question,
                "options": list(item.options),
                "answer_idx": item.answer_idx,
                "qtype": item.qtype,
                "split": item.split,
            }
            if item.video.fps is not None:
                record["fps"] = item.video.fps
            if item.video.frame_count_hint is not None:
                record["frame_count"] = item.video.frame_count_hint
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


# --- adapters -----------------------------------------------------------------


@dataclass
class AdaptReport:
    """Rows an adapter rejected, so nothing is dropped silently."""

    rejected: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, row: int, reason: str) -> None:
        self.rejected.append((row, reason))
        logger.warning("rejected source row %d: %s", row, reason)


def resolve_video_source(video_root: Path, video_id: str) -> Path:
    """Best-effort mapping of a bare video identifier onto disk.

    Prefers an existing frame directory or file named exactly after the id,
    then common container extensions; falls back to the bare path so a later
    probe can raise SourceNotFound with the real location.
    """
    bare = video_root / video_id
    if bare.exists():
        return bare
    for ext in VIDEO_FILE_EXTENSIONS:
        candidate = video_root / f"{video_id}{ext}"
        if candidate.exists():
            return candidate
    return bare


def _adapt_rows(
    rows: Iterable[tuple[int, Callable[[], QaItem]]],
    *,
    strict: bool,
    report: AdaptReport | None,
) -> list[QaItem]:
    items: list[QaItem] = []
    for row, build in rows:
        try:
            items.append(build())
        except (MissingField, UnknownTypeCode, BadAnswerIndex, InvalidArgument) as exc:
            if strict:
                raise
            (report or AdaptReport()).reject(row, str(exc))
    return items


def adapt_nextqa(
    csv_path: str | Path,
    video_root: str | Path,
    *,
    split: str = "val",
    name: str | None = None,
    strict: bool = True,
    report: AdaptReport | None = None,
) -> Manifest:
    """Normalize a NExTQA-style CSV (five options, C/T/D type codes).

    Required columns: video, question, a0..a4, answer, type. A qid column is
    used when present; otherwise qids are ``<video>_<row>``.
    """
    csv_path = Path(csv_path)
    video_root = Path(video_root)
    with csv_path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        required = ["video", "question", "a0", "a1", "a2", "a3", "a4", "answer", "type"]
        for column in required:
            if column not in header:
                raise MissingColumn(f"{csv_path.name}: missing column {column!r}")

        def build_item(row: dict, rownum: int) -> QaItem:
            video_id = row["video"].strip()
            type_code = row["type"].strip()
            qtype = NEXTQA_TYPE_CODES.get(type_code[:1].upper()) if type_code else None
            if qtype is None:
                raise UnknownTypeCode(f"row {rownum}: type code {type_code!r}")
            options = tuple(row[f"a{i}"] for i in range(5))
            try:
                answer_idx = int(row["answer"])
            except ValueError as exc:
                raise BadAnswerIndex(f"row {rownum}: answer {row['answer']!r}") from exc
            if not 0 <= answer_idx < 5:
                raise BadAnswerIndex(f"row {rownum}: answer_idx {answer_idx} outside [0, 5)")
            qid = f"{video_id}_{row.get('qid') or rownum}"
            frame_count = row.get("frame_count")
            video = VideoRef(
                id=_video_id_for(video_id),
                source=resolve_video_source(video_root, video_id),
                frame_count_hint=int(frame_count) if frame_count else None,
            )
            return QaItem(
                qid=qid,
                video=video,
                question=row["question"],
                options=options,
                answer_idx=answer_idx,
                qtype=qtype,
                split=split,
            )

        rows = [
            (rownum, (lambda r=row, n=rownum: build_item(r, n)))
            for rownum, row in enumerate(reader, start=2)
        ]
        items = _adapt_rows(rows, strict=strict, report=report)

    return Manifest(
        items=items,
        name=name or csv_path.stem,
        default_grid_side=NEXTQA_DEFAULT_GRID_SIDE,
    )


def adapt_star(
    json_path: str | Path,
    video_root: str | Path,
    *,
    split: str = "val",
    name: str | None = None,
    strict: bool = True,
    report: AdaptReport | None = None,
) -> Manifest:
    """Normalize a STAR-style JSON list (four choices, typed question ids).

    The question type is the ``question_id`` prefix (e.g. ``Interaction_T1_...``);
    the gold index is found by matching the answer text against the choices.
    """
    json_path = Path(json_path)
    video_root = Path(video_root)
    try:
        records = json.loads(json_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseFailure(0, f"{json_path.name} is not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ParseFailure(0, f"{json_path.name}: expected a JSON array of records")

    def build_item(record: dict, rownum: int) -> QaItem:
        for key in ("question_id", "question", "choices", "answer", "video_id"):
            if key not in record:
                raise MissingField(f"record {rownum}: missing field {key!r}")
        question_id = str(record["question_id"])
        prefix = question_id.split("_", 1)[0]
        if prefix not in STAR_TYPES:
            raise UnknownTypeCode(f"record {rownum}: question_id prefix {prefix!r}")
        choices = [
            c["choice"] if isinstance(c, dict) else str(c) for c in record["choices"]
        ]
        answer = str(record["answer"]).strip()
        matches = [i for i, c in enumerate(choices) if c.strip() == answer]
        if len(matches) != 1:
            raise MissingField(
                f"record {rownum} ({question_id}): answer text matches "
                f"{len(matches)} choices"
            )
        video_id = str(record["video_id"])
        video = VideoRef(
            id=_video_id_for(video_id),
            source=resolve_video_source(video_root, video_id),
            fps=float(record["fps"]) if record.get("fps") else None,
        )
        return QaItem(
            qid=question_id,
            video=video,
            question=str(record["question"]),
            options=tuple(choices),
            answer_idx=matches[0],
            qtype=prefix,
            split=split,
        )

    rows = [
        (rownum, (lambda r=record, n=rownum: build_item(r, n)))
        for rownum, record in enumerate(records, start=1)
    ]
    items = _adapt_rows(rows, strict=strict, report=report)
    return Manifest(
        items=items,
        name=name or json_path.stem,
        default_grid_side=STAR_DEFAULT_GRID_SIDE,
    )


# --- finetune export -------------------------------------------------------------


def export_finetune(
    manifest: Manifest,
    grid_dir: str | Path,
    out_path: str | Path,
    *,
    grid_side: int | None = None,
    include_suffix: bool = True,
) -> int:
    """Write instruction-tuning records pairing grid images with gold letters.

    One JSONL record per item: a human turn holding the image placeholder plus
    the question prompt, and a reply turn holding exactly the gold option
    letter. Returns the record count.
    """
    from .prompts import build, prompt_body  # local import: prompts depends on dataset

    grid_dir = Path(grid_dir)
    out_path = Path(out_path)
    n = grid_side if grid_side is not None else manifest.default_grid_side

    records = []
    for item in manifest.items:
        image_name = grid_filename(item.video.id, n)
        if not (grid_dir / image_name).exists():
            raise MissingGridImage(item.qid, grid_dir / image_name)
        text = build(item).text if include_suffix else prompt_body(item)
        records.append(
            {
                "id": item.qid,
                "image": image_name,
                "conversations": [
                    {"from": "human", "value": f"{IMAGE_PLACEHOLDER}\n{text}"},
                    {"from": "gpt", "value": item.gold_letter},
                ],
            }
        )

    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(records)
