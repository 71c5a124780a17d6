"""Batched dispatch of (grid image, prompt) pairs to a model backend.

Backends:

* ``http_chat`` — POST to an OpenAI-style ``/chat/completions`` endpoint with
  the prompt text and the grid image as a base64 data URI;
* ``mock_fixed`` — always answers a configured string (testing/smoke);
* ``mock_oracle`` — answers each item's gold letter (pipeline verification).

The runner owns all concurrency: a bounded thread pool, per-item retries with
exponential backoff on transient failures (timeouts, 429, 5xx), and
deterministic qid-sorted result assembly. Failures never abort the batch; an
optional resume file lets a rerun skip items that already succeeded.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from .dataset import QaItem
from .errors import AllItemsFailed, ConfigInvalid, IoFailure, ParseError
from .prompts import PromptText
from .scoring import parse_letter

logger = logging.getLogger(__name__)

BACKEND_KINDS = ("http_chat", "mock_fixed", "mock_oracle")
API_KEY_ENV = "GRIDQA_API_KEY"
CHAT_COMPLETIONS_PATH = "/chat/completions"

_MIME_BY_SUFFIX = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg",
                   ".bmp": "image/bmp", ".webp": "image/webp"}

WorkItem = tuple[QaItem, Path, PromptText]


@dataclass
class BackendConfig:
    """How and where to send inference requests."""

    kind: str = "mock_oracle"
    endpoint: str | None = None
    model_name: str = "gridqa"
    max_in_flight: int = 4
    timeout: float = 60.0
    retries: int = 2
    temperature: float = 0.0
    max_tokens: int = 64
    fixed_response: str = "A"
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    backoff_jitter: float = 0.2

    def validate(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ConfigInvalid(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "http_chat" and not self.endpoint:
            raise ConfigInvalid("http_chat backend requires an endpoint URL")
        if self.max_in_flight < 1:
            raise ConfigInvalid(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.retries < 0:
            raise ConfigInvalid(f"retries must be >= 0, got {self.retries}")
        if self.temperature < 0:
            raise ConfigInvalid(f"temperature must be >= 0, got {self.temperature}")

    def fingerprint(self) -> str:
        return self.kind if self.kind != "http_chat" else f"http_chat:{self.model_name}"


@dataclass
class InferenceRecord:
    """Outcome of one item: raw response, parsed letter, status, timing."""

    qid: str
    prompt: str
    raw_response: str
    parsed: str | None
    status: str  # ok | parse_error | transport_error
    latency_ms: float
    attempt_count: int

    def to_dict(self) -> dict:
        return {
            "qid": self.qid,
            "prompt": self.prompt,
            "raw_response": self.raw_response,
            "parsed": self.parsed,
            "status": self.status,
            "latency_ms": self.latency_ms,
            "attempt_count": self.attempt_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InferenceRecord":
        return cls(
            qid=str(data["qid"]),
            prompt=str(data.get("prompt", "")),
            raw_response=str(data.get("raw_response", "")),
            parsed=data.get("parsed"),
            status=str(data["status"]),
            latency_ms=float(data.get("latency_ms", 0.0)),
            attempt_count=int(data.get("attempt_count", 1)),
        )


def render_request(image_path: str | Path, prompt: str, cfg: BackendConfig) -> dict:
    """Chat-completions payload: one user message with prompt text and image."""
    image_path = Path(image_path)
    try:
        blob = image_path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read image {image_path}: {exc}") from exc
    mime = _MIME_BY_SUFFIX.get(image_path.suffix.lower(), "image/png")
    data_uri = f"data:{mime};base64,{base64.b64encode(blob).decode('ascii')}"
    return {
        "model": cfg.model_name,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
        "messages": [
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": prompt},
                    {"type": "image_url", "image_url": {"url": data_uri}},
                ],
            }
        ],
    }


def payload_bytes(payload: dict) -> bytes:
    """Canonical wire form: sorted keys, no whitespace, ASCII-safe."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


class _TransientFailure(Exception):
    pass


class _PermanentFailure(Exception):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class _HttpChatClient:
    """Thread-local requests sessions against one chat-completions endpoint."""

    def __init__(self, cfg: BackendConfig):
        self._cfg = cfg
        self._local = threading.local()
        self._url = cfg.endpoint.rstrip("/") + CHAT_COMPLETIONS_PATH

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            api_key = os.environ.get(API_KEY_ENV)
            if api_key:
                session.headers["Authorization"] = f"Bearer {api_key}"
            self._local.session = session
        return session

    def complete(self, payload: dict) -> str:
        try:
            response = self._session().post(
                self._url, json=payload, timeout=self._cfg.timeout
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise _TransientFailure(f"transport: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise _TransientFailure(f"HTTP {response.status_code}")
        if response.status_code != 200:
            raise _PermanentFailure(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise _PermanentFailure(f"malformed response body: {exc}") from exc


def _backoff_seconds(cfg: BackendConfig, attempt: int) -> float:
    base = cfg.backoff_base * (cfg.backoff_factor ** (attempt - 1))
    return base * (1 + random.uniform(-cfg.backoff_jitter, cfg.backoff_jitter))


def _call_backend(item: QaItem, grid_path: Path, prompt: PromptText,
                  cfg: BackendConfig, client: _HttpChatClient | None) -> tuple[str, int]:
    """Raw response text plus the attempt count that produced it."""
    if cfg.kind == "mock_oracle":
        return item.gold_letter, 1
    if cfg.kind == "mock_fixed":
        return cfg.fixed_response, 1

    assert client is not None
    payload = render_request(grid_path, prompt.text, cfg)
    attempt = 0
    while True:
        attempt += 1
        try:
            return client.complete(payload), attempt
        except _PermanentFailure as exc:
            exc.attempts = attempt
            raise
        except _TransientFailure as exc:
            if attempt > cfg.retries:
                raise _PermanentFailure(
                    f"{exc} (gave up after {attempt} attempts)", attempts=attempt
                ) from exc
            time.sleep(_backoff_seconds(cfg, attempt))


def _run_one(work: WorkItem, cfg: BackendConfig,
             client: _HttpChatClient | None) -> InferenceRecord:
    item, grid_path, prompt = work
    started = time.monotonic()
    attempts = 1
    try:
        raw, attempts = _call_backend(item, grid_path, prompt, cfg, client)
        try:
            parsed = parse_letter(raw, prompt.letters_in_play, item.options)
            status = "ok"
        except ParseError:
            parsed, status = None, "parse_error"
    except _PermanentFailure as exc:
        raw, parsed, status = str(exc), None, "transport_error"
        attempts = exc.attempts
    except IoFailure as exc:
        raw, parsed, status = str(exc), None, "transport_error"
    except Exception as exc:  # noqa: BLE001 - a bad item must not sink the batch
        logger.exception("unexpected failure for %s", item.qid)
        raw, parsed, status = repr(exc), None, "transport_error"
    latency_ms = (time.monotonic() - started) * 1000.0
    return InferenceRecord(
        qid=item.qid,
        prompt=prompt.text,
        raw_response=raw,
        parsed=parsed,
        status=status,
        latency_ms=latency_ms,
        attempt_count=attempts,
    )


def load_records(path: str | Path) -> list[InferenceRecord]:
    """Read a line-delimited record file, tolerating a torn final line."""
    records: dict[str, InferenceRecord] = {}
    path = Path(path)
    if not path.exists():
        return []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                record = InferenceRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError):
                logger.warning("skipping unreadable record line in %s", path)
                continue
            records[record.qid] = record  # last record per qid wins
    return list(records.values())


def save_records(records: Sequence[InferenceRecord], path: str | Path) -> None:
    """Atomically rewrite the record file in qid order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as handle:
        for record in sorted(records, key=lambda r: r.qid):
            handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
    tmp.replace(path)


def run_batch(
    items: Sequence[WorkItem],
    cfg: BackendConfig,
    *,
    resume_path: str | Path | None = None,
) -> list[InferenceRecord]:
    """Dispatch all items and return exactly one record each, sorted by qid.

    With ``resume_path``, previously succeeded qids are skipped, fresh results
    are appended as they complete (so an interrupted run loses nothing), and
    the file is compacted to qid order once the batch finishes.
    """
    cfg.validate()
    qids = [item.qid for item, _, _ in items]
    if len(set(qids)) != len(qids):
        raise ConfigInvalid("duplicate qids in batch input")

    kept: dict[str, InferenceRecord] = {}
    if resume_path is not None:
        wanted = set(qids)
        kept = {
            r.qid: r
            for r in load_records(resume_path)
            if r.status == "ok" and r.qid in wanted
        }
    pending = [work for work in items if work[0].qid not in kept]

    client = _HttpChatClient(cfg) if cfg.kind == "http_chat" else None
    results: dict[str, InferenceRecord] = dict(kept)
    append_lock = threading.Lock()
    append_handle = None
    if resume_path is not None and pending:
        Path(resume_path).parent.mkdir(parents=True, exist_ok=True)
        append_handle = Path(resume_path).open("a", encoding="utf-8")

    try:
        with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
            futures = {pool.submit(_run_one, work, cfg, client): work for work in pending}
            for future in as_completed(futures):
                record = future.result()
                results[record.qid] = record
                if append_handle is not None:
                    with append_lock:
                        append_handle.write(
                            json.dumps(record.to_dict(), ensure_ascii=False) + "\n"
                        )
                        append_handle.flush()
    finally:
        if append_handle is not None:
            append_handle.close()

    ordered = [results[qid] for qid in sorted(results)]
    if resume_path is not None:
        save_records(ordered, resume_path)
    if ordered and all(r.status == "transport_error" for r in ordered):
        raise AllItemsFailed(f"all {len(ordered)} items failed in transport")
    return ordered
