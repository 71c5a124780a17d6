"""Run configuration: one declarative YAML document, CLI-flag overridable.

Key layout mirrors the subsystem it feeds::

    manifest: path/to/manifest.jsonl
    out: runs/exp1
    mode: direct
    grid:     {n: 3, side_px: 336, letterbox: false, filter: bilinear}
    ingest:   {workers: 4, cache_dir: null}
    decoder:  {command: "...", probe_command: "..."}
    backend:  {kind: mock-oracle, endpoint: null, model_name: ..., ...}

A run directory always receives a snapshot of the effective config so results
stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigInvalid
from .grid import DEFAULT_SIDE_PX, RESAMPLE_FILTERS
from .inference import BackendConfig
from .ingest import DEFAULT_DECODER_COMMAND, DEFAULT_PROBE_COMMAND
from .prompts import MODES

# CLI spelling -> internal backend kind.
BACKEND_ALIASES = {
    "http": "http_chat",
    "http_chat": "http_chat",
    "mock-fixed": "mock_fixed",
    "mock_fixed": "mock_fixed",
    "mock-oracle": "mock_oracle",
    "mock_oracle": "mock_oracle",
}


@dataclass
class RunConfig:
    """Everything a pipeline run needs, resolved and validated."""

    manifest: Path
    out: Path
    grid_side: int | None = None  # None -> manifest family default
    side_px: int = DEFAULT_SIDE_PX
    letterbox: bool = False
    resample: str = "bilinear"
    mode: str = "direct"
    workers: int = 4
    cache_dir: Path | None = None
    decoder_command: str = DEFAULT_DECODER_COMMAND
    probe_command: str = DEFAULT_PROBE_COMMAND
    backend: BackendConfig = field(default_factory=BackendConfig)

    def validate(self) -> None:
        if not Path(self.manifest).exists():
            raise ConfigInvalid(f"manifest not found: {self.manifest}")
        if self.grid_side is not None and self.grid_side < 1:
            raise ConfigInvalid(f"grid n must be >= 1, got {self.grid_side}")
        if self.side_px < 1:
            raise ConfigInvalid(f"side_px must be >= 1, got {self.side_px}")
        if self.resample not in RESAMPLE_FILTERS:
            raise ConfigInvalid(
                f"filter must be one of {sorted(RESAMPLE_FILTERS)}, got {self.resample!r}"
            )
        if self.mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.workers < 1:
            raise ConfigInvalid(f"workers must be >= 1, got {self.workers}")
        self.backend.validate()

    def to_dict(self) -> dict:
        return {
            "manifest": str(self.manifest),
            "out": str(self.out),
            "mode": self.mode,
            "grid": {
                "n": self.grid_side,
                "side_px": self.side_px,
                "letterbox": self.letterbox,
                "filter": self.resample,
            },
            "ingest": {
                "workers": self.workers,
                "cache_dir": str(self.cache_dir) if self.cache_dir else None,
            },
            "decoder": {
                "command": self.decoder_command,
                "probe_command": self.probe_command,
            },
            "backend": {
                "kind": self.backend.kind,
                "endpoint": self.backend.endpoint,
                "model_name": self.backend.model_name,
                "max_in_flight": self.backend.max_in_flight,
                "timeout": self.backend.timeout,
                "retries": self.backend.retries,
                "temperature": self.backend.temperature,
                "max_tokens": self.backend.max_tokens,
                "fixed_response": self.backend.fixed_response,
                "backoff_base": self.backend.backoff_base,
                "backoff_factor": self.backend.backoff_factor,
                "backoff_jitter": self.backend.backoff_jitter,
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            yaml.safe_dump(self.to_dict(), sort_keys=True), encoding="utf-8"
        )


def backend_kind(alias: str) -> str:
    try:
        return BACKEND_ALIASES[alias]
    except KeyError:
        raise ConfigInvalid(
            f"unknown backend {alias!r}; choose from {sorted(set(BACKEND_ALIASES))}"
        ) from None


def _expect_mapping(value: object, key: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigInvalid(f"config section {key!r} must be a mapping")
    return value


def load_config(path: str | Path) -> RunConfig:
    """Parse a YAML config file into a RunConfig (not yet validated)."""
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")

    base_dir = path.resolve().parent

    def resolve(value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    grid = _expect_mapping(raw.get("grid"), "grid")
    ingest = _expect_mapping(raw.get("ingest"), "ingest")
    decoder = _expect_mapping(raw.get("decoder"), "decoder")
    backend_raw = _expect_mapping(raw.get("backend"), "backend")

    backend = BackendConfig(
        kind=backend_kind(str(backend_raw.get("kind", "mock-oracle"))),
        endpoint=backend_raw.get("endpoint"),
        model_name=str(backend_raw.get("model_name", "gridqa")),
        max_in_flight=int(backend_raw.get("max_in_flight", 4)),
        timeout=float(backend_raw.get("timeout", 60.0)),
        retries=int(backend_raw.get("retries", 2)),
        temperature=float(backend_raw.get("temperature", 0.0)),
        max_tokens=int(backend_raw.get("max_tokens", 64)),
        fixed_response=str(backend_raw.get("fixed_response", "A")),
        backoff_base=float(backend_raw.get("backoff_base", 1.0)),
        backoff_factor=float(backend_raw.get("backoff_factor", 2.0)),
        backoff_jitter=float(backend_raw.get("backoff_jitter", 0.2)),
    )

    manifest = resolve(raw.get("manifest"))
    out = resolve(raw.get("out"))
    if manifest is None:
        raise ConfigInvalid(f"{path}: 'manifest' is required")
    if out is None:
        raise ConfigInvalid(f"{path}: 'out' is required")

    n = grid.get("n")
    return RunConfig(
        manifest=manifest,
        out=out,
        grid_side=int(n) if n is not None else None,
        side_px=int(grid.get("side_px", DEFAULT_SIDE_PX)),
        letterbox=bool(grid.get("letterbox", False)),
        resample=str(grid.get("filter", "bilinear")),
        mode=str(raw.get("mode", "direct")),
        workers=int(ingest.get("workers", 4)),
        cache_dir=resolve(ingest.get("cache_dir")),
        decoder_command=str(decoder.get("command", DEFAULT_DECODER_COMMAND)),
        probe_command=str(decoder.get("probe_command", DEFAULT_PROBE_COMMAND)),
        backend=backend,
    )
