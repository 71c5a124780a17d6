"""End-to-end orchestration: preprocess -> eval -> score, plus ablation.

A run directory is self-contained and resumable::

    out/
      config.yaml     effective config snapshot
      grids/          one montage per (video, N)
      plans.jsonl     one sampling record per item
      records.jsonl   one inference record per item (doubles as resume file)
      report.json     exact-rational accuracy report
      report.txt      rendered table

Reports are byte-deterministic for a fixed config, so an interrupted run that
is resumed ends with the same report bytes as an uninterrupted one.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .config import RunConfig
from .dataset import Manifest, load_manifest
from .errors import GridQaError, InvalidArgument, MissingGridImage
from .grid import compose, grid_filename, save
from .inference import InferenceRecord, run_batch
from .ingest import VideoIngest, VideoRef
from .prompts import build
from .sampling import FramePlan
from .scoring import EvalReport, render_ablation_table, score

logger = logging.getLogger(__name__)


@dataclass
class PreprocessResult:
    grids_dir: Path
    plans_path: Path
    grid_side: int
    written: int = 0
    skipped: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)  # (qid, reason)

    @property
    def failed_qids(self) -> set[str]:
        return {qid for qid, _ in self.failures}


def _ingest_for(cfg: RunConfig) -> VideoIngest:
    return VideoIngest(
        decoder_command=cfg.decoder_command,
        probe_command=cfg.probe_command,
        cache_dir=cfg.cache_dir,
        workers=cfg.workers,
    )


def _grid_up_to_date(path: Path, side_px: int) -> bool:
    if not path.exists():
        return False
    try:
        with Image.open(path) as img:
            return img.size == (side_px, side_px)
    except OSError:
        return False


def preprocess(
    manifest: Manifest,
    cfg: RunConfig,
    *,
    ingest: VideoIngest | None = None,
    grid_side: int | None = None,
) -> PreprocessResult:
    """Sample, composite, and save one grid per video; idempotent on reruns.

    Emits one FramePlan record per item to plans.jsonl. Failures are collected
    per video and reported against every qid of that video; the rest of the
    manifest still completes.
    """
    n = grid_side or cfg.grid_side or manifest.default_grid_side
    grids_dir = Path(cfg.out) / "grids"
    plans_path = Path(cfg.out) / "plans.jsonl"
    grids_dir.mkdir(parents=True, exist_ok=True)
    ingest = ingest or _ingest_for(cfg)

    result = PreprocessResult(grids_dir=grids_dir, plans_path=plans_path, grid_side=n)
    plans: dict[str, FramePlan] = {}
    errors: dict[str, str] = {}

    def process_video(video: VideoRef) -> None:
        grid_path = grids_dir / grid_filename(video.id, n)
        total = ingest.probe(video)
        plan = FramePlan.for_video(video.id, total, n)
        if _grid_up_to_date(grid_path, cfg.side_px):
            plans[video.id] = plan
            result.skipped += 1
            return
        frames = ingest.fetch_frames(video, list(plan.indices))
        montage = compose(
            frames,
            n,
            cfg.side_px,
            letterbox=cfg.letterbox,
            resample=cfg.resample,
            video_id=video.id,
        )
        save(montage, grid_path)
        plans[video.id] = plan
        result.written += 1

    videos = manifest.videos()
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = {pool.submit(process_video, video): video for video in videos}
        for future, video in futures.items():
            try:
                future.result()
            except GridQaError as exc:
                errors[video.id] = str(exc)
                logger.error("preprocess failed for video %s: %s", video.id, exc)

    with plans_path.open("w", encoding="utf-8") as handle:
        for item in manifest.items:
            if item.video.id in errors:
                result.failures.append((item.qid, errors[item.video.id]))
                continue
            plan = plans[item.video.id]
            record = {"qid": item.qid, **plan.to_dict(),
                      "grid": grid_filename(item.video.id, n)}
            handle.write(json.dumps(record) + "\n")
    return result


def evaluate(
    manifest: Manifest,
    grids_dir: Path,
    cfg: RunConfig,
    *,
    records_path: Path | None = None,
    grid_side: int | None = None,
) -> list[InferenceRecord]:
    """Run the backend over every item, resuming from records_path if present."""
    n = grid_side or cfg.grid_side or manifest.default_grid_side
    work = []
    for item in manifest.items:
        grid_path = Path(grids_dir) / grid_filename(item.video.id, n)
        if not grid_path.exists():
            raise MissingGridImage(item.qid, grid_path)
        work.append((item, grid_path, build(item, cfg.mode)))
    return run_batch(work, cfg.backend, resume_path=records_path)


def config_fingerprint(cfg: RunConfig, grid_side: int) -> str:
    return (
        f"n={grid_side};side_px={cfg.side_px};"
        f"backend={cfg.backend.fingerprint()};mode={cfg.mode}"
    )


@dataclass
class RunOutcome:
    report: EvalReport
    records: list[InferenceRecord]
    preprocess_result: PreprocessResult
    report_path: Path
    table_path: Path

    @property
    def exit_code(self) -> int:
        infra_failures = self.preprocess_result.failures or any(
            r.status == "transport_error" for r in self.records
        )
        return 1 if infra_failures else 0


def run_all(cfg: RunConfig, *, manifest: Manifest | None = None) -> RunOutcome:
    """preprocess; eval; score as one resumable run directory."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.yaml")

    manifest = manifest or load_manifest(cfg.manifest)
    n = cfg.grid_side or manifest.default_grid_side

    pre = preprocess(manifest, cfg)
    usable = manifest
    if pre.failures:
        remaining = [i for i in manifest.items if i.qid not in pre.failed_qids]
        usable = Manifest(items=remaining, name=manifest.name,
                          default_grid_side=manifest.default_grid_side)

    records = evaluate(usable, pre.grids_dir, cfg,
                       records_path=out / "records.jsonl", grid_side=n)
    report = score(records, usable, config_fingerprint=config_fingerprint(cfg, n))

    report_path = out / "report.json"
    table_path = out / "report.txt"
    report.save(report_path)
    table_path.write_text(report.render_table(), encoding="utf-8")
    return RunOutcome(
        report=report,
        records=records,
        preprocess_result=pre,
        report_path=report_path,
        table_path=table_path,
    )


def ablate(
    cfg: RunConfig,
    grid_sides: list[int],
    *,
    manifest: Manifest | None = None,
) -> list[tuple[int, EvalReport]]:
    """Run the full pipeline once per grid size and collect the reports.

    Decoded frames are shared across sizes through one probe cache and one
    frame-extraction cache, so each extra size only re-composites and re-asks
    the backend.
    """
    if not grid_sides:
        raise InvalidArgument("ablate needs at least one grid size")
    if any(n < 1 for n in grid_sides):
        raise InvalidArgument(f"grid sizes must be >= 1, got {grid_sides}")
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.yaml")

    manifest = manifest or load_manifest(cfg.manifest)
    if cfg.cache_dir is None:
        cfg.cache_dir = out / "frame_cache"
    ingest = _ingest_for(cfg)

    results: list[tuple[int, EvalReport]] = []
    for n in grid_sides:
        pre = preprocess(manifest, cfg, ingest=ingest, grid_side=n)
        if pre.failures:
            raise GridQaError(
                f"preprocess failed for N={n}: {pre.failures[:3]} ..."
                if len(pre.failures) > 3 else f"preprocess failed for N={n}: {pre.failures}"
            )
        records = evaluate(manifest, pre.grids_dir, cfg,
                           records_path=out / f"records_N{n}.jsonl", grid_side=n)
        report = score(records, manifest,
                       config_fingerprint=config_fingerprint(cfg, n))
        report.save(out / f"report_N{n}.json")
        results.append((n, report))

    table = render_ablation_table(results)
    (out / "ablation.txt").write_text(table, encoding="utf-8")
    (out / "ablation.json").write_text(
        json.dumps(
            [{"n": n, "frames": n * n, "report": report.to_dict()} for n, report in results],
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return results
