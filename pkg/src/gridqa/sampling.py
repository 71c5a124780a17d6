"""Uniform middle-frame sampling.

A video of M frames is split into N*N equal real-valued intervals
[i*M/N^2, (i+1)*M/N^2) and the frame at each interval's temporal midpoint is
selected: index_i = floor((i + 0.5) * M / N^2). Computed in exact integer
arithmetic so results are identical for any M.

Short videos (M < N^2) yield duplicate indices rather than blank cells, which
keeps the downstream grid contract at exactly N^2 tiles.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgument


def plan(total_frames: int, grid_side: int) -> list[int]:
    """Return the N^2 sampled frame indices for an M-frame video.

    Indices are 0-based, non-decreasing, all within [0, M), and strictly
    increasing whenever M >= N^2.
    """
    if total_frames < 1:
        raise InvalidArgument(f"total_frames must be >= 1, got {total_frames}")
    if grid_side < 1:
        raise InvalidArgument(f"grid_side must be >= 1, got {grid_side}")
    cells = grid_side * grid_side
    # floor((i + 0.5) * M / cells) without floats: ((2i + 1) * M) // (2 * cells)
    return [((2 * i + 1) * total_frames) // (2 * cells) for i in range(cells)]


@dataclass(frozen=True)
class FramePlan:
    """Sampling result for one video: which frames feed the N x N grid."""

    video_id: str
    total_frames: int
    grid_side: int
    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        cells = self.grid_side * self.grid_side
        if len(self.indices) != cells:
            raise InvalidArgument(
                f"expected {cells} indices, got {len(self.indices)}"
            )
        if any(not 0 <= ix < self.total_frames for ix in self.indices):
            raise InvalidArgument("indices must lie in [0, total_frames)")
        if any(a > b for a, b in zip(self.indices, self.indices[1:])):
            raise InvalidArgument("indices must be non-decreasing")

    @classmethod
    def for_video(cls, video_id: str, total_frames: int, grid_side: int) -> "FramePlan":
        """Plan the sampled indices for one video."""
        return cls(
            video_id=video_id,
            total_frames=total_frames,
            grid_side=grid_side,
            indices=tuple(plan(total_frames, grid_side)),
        )

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "total_frames": self.total_frames,
            "grid_side": self.grid_side,
            "indices": list(self.indices),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "FramePlan":
        return cls(
            video_id=record["video_id"],
            total_frames=int(record["total_frames"]),
            grid_side=int(record["grid_side"]),
            indices=tuple(int(ix) for ix in record["indices"]),
        )
