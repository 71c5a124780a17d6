"""Compositor tests: cell geometry, losslessness, ordering, patch math."""

import random

import pytest
from PIL import Image

from gridqa.errors import DegenerateCell, InvalidArgument, IoFailure, WrongFrameCount
from gridqa.grid import (
    DEFAULT_SIDE_PX,
    ENCODER_PATCH_PX,
    compose,
    grid_filename,
    load,
    patch_count,
    save,
)
from gridqa.ingest import Frame


def solid_frame(index: int, color, size=(64, 48)) -> Frame:
    return Frame(index=index, image=Image.new("RGB", size, color))


def palette(count: int, seed: int = 0) -> list[tuple[int, int, int]]:
    rng = random.Random(seed)
    return [tuple(rng.randrange(256) for _ in range(3)) for _ in range(count)]


def cell_pixels(image: Image.Image, side: int, row: int, col: int) -> list:
    cell = image.width // side
    box = (col * cell, row * cell, (col + 1) * cell, (row + 1) * cell)
    return list(image.crop(box).getdata())


@pytest.mark.parametrize("side", [1, 2, 3, 4])
def test_solid_cells_exact(side):
    colors = palette(side * side, seed=side)
    frames = [solid_frame(i, colors[i]) for i in range(side * side)]
    grid = compose(frames, side)
    assert grid.image.size == (DEFAULT_SIDE_PX, DEFAULT_SIDE_PX)
    assert grid.cell_px == DEFAULT_SIDE_PX // side
    for k, color in enumerate(colors):
        row, col = divmod(k, side)
        assert set(cell_pixels(grid.image, side, row, col)) == {color}, (side, k)


def test_cell_geometry_n3():
    # Cell (1, 2) must be frame 5 at N=3 (row-major), each cell 112 px.
    colors = palette(9, seed=42)
    grid = compose([solid_frame(i, colors[i]) for i in range(9)], 3)
    assert grid.cell_px == 112
    assert set(cell_pixels(grid.image, 3, 1, 2)) == {colors[5]}


def test_cell_geometry_n4_first_cell():
    colors = palette(16, seed=7)
    grid = compose([solid_frame(i, colors[i]) for i in range(16)], 4)
    assert grid.cell_px == 84
    corner = grid.image.crop((0, 0, 84, 84))
    assert set(corner.getdata()) == {colors[0]}


def test_single_frame_stretch():
    grid = compose([solid_frame(0, (10, 200, 30))], 1)
    assert grid.image.size == (336, 336)
    assert set(grid.image.getdata()) == {(10, 200, 30)}


def test_output_side_honored_regardless_of_input_sizes():
    frames = [
        solid_frame(i, (i * 20 % 256, 0, 0), size=(16 + 13 * i, 9 + 5 * i))
        for i in range(4)
    ]
    grid = compose(frames, 2, side_px=100)
    assert grid.image.size == (100, 100)


def test_non_divisible_side_resamples_once():
    # 336 not divisible by 5: canvas is 5*67=335 then resampled to 336.
    frames = [solid_frame(i, (255, 255, 255)) for i in range(25)]
    grid = compose(frames, 5)
    assert grid.image.size == (336, 336)
    assert grid.cell_px == 67
    assert set(grid.image.getdata()) == {(255, 255, 255)}


def test_permuting_frames_permutes_cells():
    side = 3
    colors = palette(9, seed=3)
    frames = [solid_frame(i, colors[i]) for i in range(9)]
    perm = [4, 0, 8, 2, 6, 1, 7, 5, 3]
    direct = compose([frames[p] for p in perm], side)
    for k, p in enumerate(perm):
        row, col = divmod(k, side)
        assert set(cell_pixels(direct.image, side, row, col)) == {colors[p]}
    assert direct.source_indices == tuple(perm)


def test_wrong_frame_count():
    frames = [solid_frame(i, (1, 2, 3)) for i in range(8)]
    with pytest.raises(WrongFrameCount):
        compose(frames, 3)


def test_degenerate_cell():
    frames = [solid_frame(i, (1, 2, 3)) for i in range(25)]
    with pytest.raises(DegenerateCell):
        compose(frames, 5, side_px=4)


def test_unknown_filter():
    with pytest.raises(InvalidArgument):
        compose([solid_frame(0, (0, 0, 0))], 1, resample="hexagonal")


def test_letterbox_pads_instead_of_stretching():
    # A wide white frame letterboxed into a square cell keeps black bars.
    frame = solid_frame(0, (255, 255, 255), size=(100, 25))
    grid = compose([frame], 1, letterbox=True)
    data = set(grid.image.getdata())
    assert (0, 0, 0) in data and (255, 255, 255) in data


def test_save_round_trip(tmp_path):
    colors = palette(9, seed=11)
    grid = compose([solid_frame(i, colors[i]) for i in range(9)], 3, video_id="vid00")
    path = tmp_path / grid_filename("vid00", 3)
    save(grid, path)
    assert load(path).tobytes() == grid.pixels


def test_save_deterministic(tmp_path):
    grid = compose([solid_frame(i, (i, i, i)) for i in range(4)], 2)
    save(grid, tmp_path / "a.png")
    save(grid, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_save_to_missing_dir_fails(tmp_path):
    grid = compose([solid_frame(0, (5, 5, 5))], 1)
    with pytest.raises(IoFailure):
        save(grid, tmp_path / "nope" / "x.png")


def test_patch_arithmetic():
    # Default geometry feeds the encoder 24 x 24 = 576 patches.
    assert DEFAULT_SIDE_PX % ENCODER_PATCH_PX == 0
    assert patch_count(DEFAULT_SIDE_PX) == 576


def test_grid_filename():
    assert grid_filename("vid07", 3) == "vid07_N3.png"
