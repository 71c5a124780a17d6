"""Video sources: frame counting and pixel access.

Two source kinds are supported behind one interface:

* a directory of pre-extracted frames named ``frame_000000.png`` (0-based,
  contiguous, any of png/jpg/jpeg/bmp);
* a video file, decoded through configurable external commands so the core
  carries no codec dependencies. The probe command must print ffprobe-style
  JSON; the decoder command extracts a single frame per invocation.

Frame counts come from the best metadata available: an exact decoder-reported
count wins over fps x duration, which wins over the manifest's hint.
"""

from __future__ import annotations

import json
import re
import shlex
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from PIL import Image, ImageStat

from .errors import (
    DecodeFailure,
    EmptyVideo,
    IndexOutOfRange,
    InvalidArgument,
    MetadataUnavailable,
    SourceNotFound,
)

FRAME_FILE_RE = re.compile(r"^frame_(\d{6})\.(png|jpg|jpeg|bmp)$")
FRAME_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

# Documented defaults for a stock ffmpeg install; override via config for any
# other tool. {index} is the 0-based frame number, {output} a PNG path.
DEFAULT_DECODER_COMMAND = (
    "ffmpeg -loglevel error -y -i {input} "
    "-vf select=eq(n\\,{index}) -frames:v 1 -vsync 0 {output}"
)
DEFAULT_PROBE_COMMAND = (
    "ffprobe -v error -select_streams v:0 "
    "-show_entries stream=nb_frames,duration,avg_frame_rate "
    "-show_entries format=duration -of json {input}"
)


@dataclass(frozen=True)
class VideoRef:
    """A video to be sampled: frame directory or video file, plus metadata hints."""

    id: str
    source: Path
    fps: float | None = None
    frame_count_hint: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidArgument("VideoRef.id must be non-empty")
        if self.fps is not None and self.fps <= 0:
            raise InvalidArgument(f"fps must be > 0, got {self.fps}")
        if self.frame_count_hint is not None and self.frame_count_hint < 1:
            raise InvalidArgument(
                f"frame_count_hint must be >= 1, got {self.frame_count_hint}"
            )

    @property
    def is_frame_dir(self) -> bool:
        return self.source.is_dir()


@dataclass(frozen=True)
class Frame:
    """One decoded frame; pixel data is always 8-bit RGB."""

    index: int
    image: Image.Image = field(repr=False)

    @property
    def width(self) -> int:
        return self.image.width

    @property
    def height(self) -> int:
        return self.image.height

    @property
    def pixels(self) -> bytes:
        return self.image.tobytes()

    def mean_color(self) -> tuple[float, float, float]:
        """Per-channel mean, handy for comparing against synthetic sources."""
        r, g, b = ImageStat.Stat(self.image).mean
        return (r, g, b)


def _load_rgb(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except OSError as exc:
        raise DecodeFailure(f"unreadable frame file {path}: {exc}") from exc


def _render_command(template: str, **placeholders: str) -> list[str]:
    tokens = shlex.split(template)
    rendered = []
    for token in tokens:
        for key, value in placeholders.items():
            token = token.replace("{" + key + "}", value)
        rendered.append(token)
    return rendered


def _parse_rate(raw: str | None) -> float | None:
    if not raw:
        return None
    try:
        rate = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        return None
    return float(rate) if rate > 0 else None


def _parse_duration(raw: str | None) -> float | None:
    if raw in (None, "", "N/A"):
        return None
    try:
        value = float(raw)
    except ValueError:
        return None
    return value if value > 0 else None


class VideoIngest:
    """Resolves VideoRefs to frame counts and pixel data.

    Probe results are cached for the process lifetime. Decoding for one ref is
    serialized (a per-ref lock) so concurrent workers never spawn duplicate
    extractor processes; distinct refs decode freely in parallel.
    """

    def __init__(
        self,
        decoder_command: str = DEFAULT_DECODER_COMMAND,
        probe_command: str = DEFAULT_PROBE_COMMAND,
        cache_dir: Path | None = None,
        workers: int = 4,
    ):
        if workers < 1:
            raise InvalidArgument(f"workers must be >= 1, got {workers}")
        self.decoder_command = decoder_command
        self.probe_command = probe_command
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.workers = workers
        self._probe_cache: dict[tuple[str, str], int] = {}
        self._ref_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    # -- probing -------------------------------------------------------------

    def probe(self, ref: VideoRef) -> int:
        """Total frame count M for the ref's source (cached per ref)."""
        key = (ref.id, str(ref.source))
        with self._guard:
            cached = self._probe_cache.get(key)
        if cached is not None:
            return cached

        if not ref.source.exists():
            raise SourceNotFound(f"video source {ref.source} does not exist")
        if ref.source.is_dir():
            total = self._count_frame_files(ref.source)
        else:
            total = self._probe_video_file(ref)
        if total < 1:
            raise EmptyVideo(f"{ref.source} contains no frames")

        with self._guard:
            self._probe_cache[key] = total
        return total

    @staticmethod
    def _count_frame_files(directory: Path) -> int:
        return sum(1 for entry in directory.iterdir() if FRAME_FILE_RE.match(entry.name))

    def _probe_video_file(self, ref: VideoRef) -> int:
        argv = _render_command(self.probe_command, input=str(ref.source))
        try:
            result = subprocess.run(argv, capture_output=True, text=True, check=False)
        except FileNotFoundError as exc:
            raise MetadataUnavailable(
                f"probe command not found ({argv[0]}); configure decoder.probe_command"
            ) from exc
        if result.returncode != 0:
            raise MetadataUnavailable(
                f"probe failed for {ref.source}: {result.stderr.strip()[:500]}"
            )
        try:
            meta = json.loads(result.stdout)
        except json.JSONDecodeError as exc:
            raise MetadataUnavailable(f"probe output for {ref.source} is not JSON") from exc

        streams = meta.get("streams") or [{}]
        stream = streams[0]

        nb_frames = stream.get("nb_frames")
        if isinstance(nb_frames, str) and nb_frames.isdigit():
            return int(nb_frames)
        if isinstance(nb_frames, int):
            return nb_frames

        # No exact count: fall back to fps x duration.
        fps = _parse_rate(stream.get("avg_frame_rate")) or ref.fps
        duration = _parse_duration(stream.get("duration")) or _parse_duration(
            (meta.get("format") or {}).get("duration")
        )
        if fps and duration:
            return int(round(fps * duration))
        if ref.frame_count_hint is not None:
            return ref.frame_count_hint
        raise MetadataUnavailable(
            f"{ref.source}: no frame count and no fps x duration in metadata"
        )

    # -- frame access ----------------------------------------------------------

    def fetch_frames(self, ref: VideoRef, indices: list[int]) -> list[Frame]:
        """Decode the requested frames, in request order; duplicates allowed."""
        total = self.probe(ref)
        for ix in indices:
            if not 0 <= ix < total:
                raise IndexOutOfRange(f"index {ix} outside [0, {total}) for {ref.id}")
        if ref.source.is_dir():
            by_index = {ix: self._read_dir_frame(ref.source, ix) for ix in set(indices)}
            return [Frame(index=ix, image=by_index[ix]) for ix in indices]
        with self._ref_lock(ref):
            by_index = self._extract_video_frames(ref, sorted(set(indices)))
        return [Frame(index=ix, image=by_index[ix]) for ix in indices]

    def _ref_lock(self, ref: VideoRef) -> threading.Lock:
        with self._guard:
            return self._ref_locks.setdefault(ref.id, threading.Lock())

    @staticmethod
    def _read_dir_frame(directory: Path, index: int) -> Image.Image:
        for ext in FRAME_EXTENSIONS:
            candidate = directory / f"frame_{index:06d}{ext}"
            if candidate.exists():
                return _load_rgb(candidate)
        raise DecodeFailure(
            f"frame {index} missing from {directory} (non-contiguous frame files?)"
        )

    def _extract_video_frames(self, ref: VideoRef, indices: list[int]) -> dict[int, Image.Image]:
        if self.cache_dir is not None:
            out_dir = self.cache_dir / ref.id
            out_dir.mkdir(parents=True, exist_ok=True)
            cleanup = False
        else:
            out_dir = Path(tempfile.mkdtemp(prefix=f"gridqa_{ref.id}_"))
            cleanup = True
        try:
            frames: dict[int, Image.Image] = {}
            for ix in indices:
                out_path = out_dir / f"frame_{ix:06d}.png"
                if not out_path.exists():
                    self._run_decoder(ref, ix, out_path)
                frames[ix] = _load_rgb(out_path)
            return frames
        finally:
            if cleanup:
                shutil.rmtree(out_dir, ignore_errors=True)

    def _run_decoder(self, ref: VideoRef, index: int, out_path: Path) -> None:
        argv = _render_command(
            self.decoder_command,
            input=str(ref.source),
            index=str(index),
            output=str(out_path),
        )
        try:
            result = subprocess.run(argv, capture_output=True, text=True, check=False)
        except FileNotFoundError as exc:
            raise DecodeFailure(
                f"decoder command not found ({argv[0]}); configure decoder.command"
            ) from exc
        if result.returncode != 0:
            raise DecodeFailure(
                f"decoder exited {result.returncode} for {ref.id}[{index}]: "
                f"{result.stderr.strip()[:500]}"
            )
        if not out_path.exists():
            raise DecodeFailure(
                f"decoder produced no output for {ref.id}[{index}] at {out_path}"
            )
