"""Grid-image compositing.

Tiles N*N sampled frames row-major into one square montage at the resolution
the downstream visual encoder expects (336 px by default, which a 14 px patch
size carves into 576 patches). Each frame is stretched to a square cell; the
canvas is resampled a second time only when side_px is not divisible by N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .errors import DegenerateCell, InvalidArgument, IoFailure, WrongFrameCount
from .ingest import Frame

DEFAULT_SIDE_PX = 336
ENCODER_PATCH_PX = 14

RESAMPLE_FILTERS = {
    "nearest": Image.Resampling.NEAREST,
    "bilinear": Image.Resampling.BILINEAR,
    "bicubic": Image.Resampling.BICUBIC,
    "lanczos": Image.Resampling.LANCZOS,
}


def patch_count(side_px: int, patch_px: int = ENCODER_PATCH_PX) -> int:
    """Number of patches a square side_px image yields at the given patch size."""
    return (side_px // patch_px) ** 2


@dataclass(frozen=True)
class GridImage:
    """A composited montage plus the layout metadata needed to trace it back."""

    image: Image.Image = field(repr=False)
    grid_side: int
    cell_px: int
    source_indices: tuple[int, ...]
    video_id: str

    @property
    def side_px(self) -> int:
        return self.image.width

    @property
    def pixels(self) -> bytes:
        """Raw RGB raster, side_px * side_px * 3 bytes."""
        return self.image.tobytes()


def _resolve_filter(name: str) -> Image.Resampling:
    try:
        return RESAMPLE_FILTERS[name]
    except KeyError:
        raise InvalidArgument(
            f"unknown resample filter {name!r}; choose from {sorted(RESAMPLE_FILTERS)}"
        ) from None


def _to_cell(image: Image.Image, cell_px: int, resample: Image.Resampling,
             letterbox: bool) -> Image.Image:
    if not letterbox:
        return image.resize((cell_px, cell_px), resample)
    # Preserve aspect, pad with black to a square cell.
    scale = min(cell_px / image.width, cell_px / image.height)
    w = max(1, round(image.width * scale))
    h = max(1, round(image.height * scale))
    fitted = image.resize((w, h), resample)
    cell = Image.new("RGB", (cell_px, cell_px), (0, 0, 0))
    cell.paste(fitted, ((cell_px - w) // 2, (cell_px - h) // 2))
    return cell


def compose(
    frames: list[Frame],
    grid_side: int,
    side_px: int = DEFAULT_SIDE_PX,
    *,
    letterbox: bool = False,
    resample: str = "bilinear",
    video_id: str = "",
) -> GridImage:
    """Tile ``grid_side**2`` frames into one side_px x side_px montage.

    Frame k lands in cell (row k // N, col k mod N): left-to-right then
    top-to-bottom, preserving temporal order.
    """
    if grid_side < 1:
        raise InvalidArgument(f"grid_side must be >= 1, got {grid_side}")
    cells = grid_side * grid_side
    if len(frames) != cells:
        raise WrongFrameCount(f"expected {cells} frames for N={grid_side}, got {len(frames)}")
    cell_px = side_px // grid_side
    if cell_px < 1:
        raise DegenerateCell(f"side_px {side_px} leaves zero-width cells at N={grid_side}")

    filt = _resolve_filter(resample)
    canvas_px = cell_px * grid_side
    canvas = Image.new("RGB", (canvas_px, canvas_px))
    for k, frame in enumerate(frames):
        row, col = divmod(k, grid_side)
        canvas.paste(_to_cell(frame.image, cell_px, filt, letterbox),
                     (col * cell_px, row * cell_px))
    if canvas_px != side_px:
        canvas = canvas.resize((side_px, side_px), filt)

    return GridImage(
        image=canvas,
        grid_side=grid_side,
        cell_px=cell_px,
        source_indices=tuple(frame.index for frame in frames),
        video_id=video_id,
    )


def grid_filename(video_id: str, grid_side: int) -> str:
    """Canonical on-disk name for a video's montage at one grid size."""
    return f"{video_id}_N{grid_side}.png"


def save(grid: GridImage, path: str | Path) -> None:
    """Write the montage losslessly (PNG); reload yields identical pixels."""
    path = Path(path)
    try:
        grid.image.save(path, format="PNG")
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot write grid image to {path}: {exc}") from exc


def load(path: str | Path) -> Image.Image:
    """Read a saved montage back as an RGB image."""
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except OSError as exc:
        raise IoFailure(f"cannot read grid image from {path}: {exc}") from exc
