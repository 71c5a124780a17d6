import json
import shutil
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from gridqa.dataset import Manifest
from gridqa.synthetic import build_corpus

TESTS_DIR = Path(__file__).resolve().parent
REPO_DIR = TESTS_DIR.parent
SRC_DIR = REPO_DIR / "src"
FIXTURES_DIR = TESTS_DIR / "fixtures"

STUB_DECODER = TESTS_DIR / "stub_decoder.py"
STUB_DECODE_COMMAND = f"{sys.executable} {STUB_DECODER} decode {{input}} {{index}} {{output}}"
STUB_PROBE_COMMAND = f"{sys.executable} {STUB_DECODER} probe {{input}}"

HAVE_FFMPEG = shutil.which("ffmpeg") is not None and shutil.which("ffprobe") is not None


@pytest.fixture(scope="session")
def corpus48(tmp_path_factory) -> tuple[Path, Manifest]:
    """48-item synthetic manifest over 48 solid-color frame-dir videos."""
    root = tmp_path_factory.mktemp("corpus48")
    return build_corpus(root, 48)


@pytest.fixture(scope="session")
def corpus12(tmp_path_factory) -> tuple[Path, Manifest]:
    root = tmp_path_factory.mktemp("corpus12")
    return build_corpus(root, 12)


@pytest.fixture()
def stub_clip(tmp_path):
    """Factory for descriptor-file 'video clips' decoded by stub_decoder.py."""

    def make(video_number: int = 0, frame_count: int = 48, **extra) -> Path:
        descriptor = {"video_number": video_number, "frame_count": frame_count, **extra}
        path = tmp_path / f"clip{video_number}.json"
        path.write_text(json.dumps(descriptor), encoding="utf-8")
        return path

    return make


class _StubChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 - http.server API
        server: StubChatServer = self.server  # type: ignore[assignment]
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        with server.lock:
            server.requests.append(body)
            inject_failure = server.failures_remaining > 0
            if inject_failure:
                server.failures_remaining -= 1
        if server.delay:
            time.sleep(server.delay)
        if self.path != "/chat/completions":
            self.send_response(404)
            self.end_headers()
            return
        if inject_failure:
            self.send_response(503)
            self.end_headers()
            return
        prompt = _prompt_text(body)
        reply = server.reply(prompt) if callable(server.reply) else server.reply
        data = json.dumps({"choices": [{"message": {"content": reply}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # silence request logging
        pass


def _prompt_text(body: dict) -> str:
    try:
        content = body["messages"][0]["content"]
        return next(part["text"] for part in content if part.get("type") == "text")
    except (KeyError, IndexError, StopIteration, TypeError):
        return ""


class StubChatServer(ThreadingHTTPServer):
    """Local chat-completions endpoint with configurable failure injection."""

    daemon_threads = True

    def __init__(self):
        super().__init__(("127.0.0.1", 0), _StubChatHandler)
        self.lock = threading.Lock()
        self.requests: list[dict] = []
        self.failures_remaining = 0
        self.delay = 0.0
        self.reply = "A"

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"


@pytest.fixture()
def stub_server():
    server = StubChatServer()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()
