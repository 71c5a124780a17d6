#!/usr/bin/env python3
"""Stand-in video tool for tests.

A "clip" is a JSON descriptor::

    {"video_number": 3, "frame_count": 48,
     "fps": "12/1", "duration": 4.0,          # optional metadata
     "expose_count": true,                     # false -> probe hides nb_frames
     "invocation_log": "/tmp/log"}             # optional decode-call log

``probe <clip>`` prints ffprobe-shaped JSON; ``decode <clip> <index> <out>``
writes the frame as a solid-color PNG using the same color formula the
synthetic corpus uses, so tests can compare pixels against the generator.
"""

import json
import sys
from pathlib import Path


def probe(descriptor: dict) -> None:
    stream = {}
    if descriptor.get("expose_count", True):
        stream["nb_frames"] = str(descriptor["frame_count"])
    if "fps" in descriptor:
        stream["avg_frame_rate"] = str(descriptor["fps"])
    meta = {"streams": [stream], "format": {}}
    if "duration" in descriptor:
        meta["format"]["duration"] = str(descriptor["duration"])
    print(json.dumps(meta))


def decode(descriptor: dict, index: int, out_path: Path) -> None:
    from PIL import Image

    from gridqa.synthetic import frame_color

    if not 0 <= index < descriptor["frame_count"]:
        print(f"index {index} out of range", file=sys.stderr)
        sys.exit(3)
    log = descriptor.get("invocation_log")
    if log:
        with open(log, "a", encoding="utf-8") as handle:
            handle.write(f"{index}\n")
    color = frame_color(descriptor["video_number"], index)
    Image.new("RGB", (64, 48), color).save(out_path)


def main() -> None:
    mode = sys.argv[1]
    descriptor = json.loads(Path(sys.argv[2]).read_text(encoding="utf-8"))
    if mode == "probe":
        probe(descriptor)
    elif mode == "decode":
        decode(descriptor, int(sys.argv[3]), Path(sys.argv[4]))
    else:
        print(f"unknown mode {mode}", file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    main()
