"""Answer parsing and accuracy reporting.

``parse_letter`` extracts an option letter from raw model output under a
strict rule precedence; anything it cannot place is a ParseError and scores
as incorrect (never excluded, which would inflate accuracy).

``EvalReport`` keeps exact rational accuracies and renders them to one-decimal
percents in the per-question-type table layouts used for benchmark reporting:
Int./Seq./Pre./Fea./Tot. for STAR-style manifests and Cau./Tem./Des./Tot. for
NExTQA-style ones.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from .dataset import Manifest, NEXTQA_TYPES, QUESTION_TYPES, STAR_TYPES
from .errors import (
    IncompatibleColumns,
    InvalidArgument,
    ParseError,
    QidMismatch,
)
from .letters import index_for_letter

if TYPE_CHECKING:
    from .inference import InferenceRecord

_QUOTE_CHARS = "\"'“”‘’`"

COLUMN_ABBREV = {
    "Causal": "Cau.",
    "Temporal": "Tem.",
    "Descriptive": "Des.",
    "Interaction": "Int.",
    "Sequence": "Seq.",
    "Prediction": "Pre.",
    "Feasibility": "Fea.",
    "Other": "Oth.",
}
TOTAL_COLUMN = "Tot."


def parse_letter(
    raw: str,
    letters_in_play: Sequence[str],
    option_texts: Sequence[str] | None = None,
) -> str:
    """Extract the answered option letter from raw model output.

    Rules apply in strict precedence:

    1. The first character, after trimming surrounding whitespace and quotes,
       is a letter in play followed by end-of-string, '.', ')', ':' or
       whitespace.
    2. A standalone ``(X)`` or ``X.`` token with X in play anywhere in the
       first line; the leftmost such X wins.
    3. A case-insensitive match of exactly one full option text (requires
       ``option_texts``).

    Rules 1-2 match uppercase letters only, so prose like "e.g." can never be
    read as an answer. Raises ParseError when no rule fires.
    """
    if not letters_in_play:
        raise InvalidArgument("letters_in_play must be non-empty")
    letters = "".join(letters_in_play)

    trimmed = raw.strip().strip(_QUOTE_CHARS).strip()
    if trimmed:
        first = trimmed[0]
        if first in letters and (len(trimmed) == 1 or trimmed[1] in ".):" or trimmed[1].isspace()):
            return first

    first_line = raw.strip().splitlines()[0] if raw.strip() else ""
    token_re = re.compile(
        rf"\(([{letters}])\)|(?<![A-Za-z0-9.])([{letters}])\."
    )
    match = token_re.search(first_line)
    if match:
        return match.group(1) or match.group(2)

    if option_texts:
        lowered = raw.lower()
        hits = [
            letters_in_play[i]
            for i, text in enumerate(option_texts)
            if text and text.lower() in lowered
        ]
        if len(hits) == 1:
            return hits[0]

    raise ParseError(f"no option letter found in {raw!r}")


# --- report -------------------------------------------------------------------


def _percent_tenths(fraction: Fraction) -> int:
    return round(fraction * 1000)


def format_percent(fraction: Fraction) -> str:
    """Exact rational -> one-decimal percent string (100.0 for 1)."""
    tenths = _percent_tenths(fraction)
    return f"{tenths // 10}.{tenths % 10}"


def _format_delta(tenths: int) -> str:
    if tenths == 0:
        return "0.0"
    sign = "+" if tenths > 0 else "-"
    return f"{sign}{abs(tenths) // 10}.{abs(tenths) % 10}"


@dataclass(frozen=True)
class TypeScore:
    correct: int
    total: int

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.correct, self.total) if self.total else Fraction(0)

    @property
    def percent(self) -> str:
        return format_percent(self.accuracy)


@dataclass
class EvalReport:
    """Per-question-type and overall accuracy with error tallies."""

    per_type: dict[str, TypeScore]
    overall: TypeScore
    parse_error_count: int
    transport_error_count: int
    config_fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.overall.total != sum(s.total for s in self.per_type.values()):
            raise InvalidArgument("overall total must equal sum of per-type totals")
        if self.overall.correct != sum(s.correct for s in self.per_type.values()):
            raise InvalidArgument("overall correct must equal sum of per-type corrects")

    def columns(self) -> list[str]:
        """Column headers in canonical order, ending with the total column."""
        ordered = [t for t in QUESTION_TYPES if t in self.per_type]
        return [COLUMN_ABBREV[t] for t in ordered] + [TOTAL_COLUMN]

    def family(self) -> str:
        present = set(self.per_type)
        if present and present <= set(STAR_TYPES):
            return "star"
        if present and present <= set(NEXTQA_TYPES):
            return "nextqa"
        return "mixed"

    def row_values(self) -> list[str]:
        ordered = [t for t in QUESTION_TYPES if t in self.per_type]
        return [self.per_type[t].percent for t in ordered] + [self.overall.percent]

    def row_tenths(self) -> list[int]:
        ordered = [t for t in QUESTION_TYPES if t in self.per_type]
        return [_percent_tenths(self.per_type[t].accuracy) for t in ordered] + [
            _percent_tenths(self.overall.accuracy)
        ]

    def render_table(self) -> str:
        return _render_rows(self.columns(), [("", self.row_values())], label_header="")

    def to_dict(self) -> dict:
        def score_dict(score: TypeScore) -> dict:
            return {
                "correct": score.correct,
                "total": score.total,
                "accuracy": f"{score.accuracy.numerator}/{score.accuracy.denominator}",
                "percent": score.percent,
            }

        ordered = [t for t in QUESTION_TYPES if t in self.per_type]
        return {
            "config_fingerprint": self.config_fingerprint,
            "family": self.family(),
            "per_type": {t: score_dict(self.per_type[t]) for t in ordered},
            "overall": score_dict(self.overall),
            "parse_error_count": self.parse_error_count,
            "transport_error_count": self.transport_error_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        def parse_score(entry: dict) -> TypeScore:
            return TypeScore(correct=int(entry["correct"]), total=int(entry["total"]))

        return cls(
            per_type={t: parse_score(e) for t, e in data["per_type"].items()},
            overall=parse_score(data["overall"]),
            parse_error_count=int(data["parse_error_count"]),
            transport_error_count=int(data["transport_error_count"]),
            config_fingerprint=str(data.get("config_fingerprint", "")),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def score(
    records: Iterable["InferenceRecord"],
    manifest: Manifest,
    *,
    config_fingerprint: str = "",
) -> EvalReport:
    """Score parsed records against the manifest's gold answers.

    An item is correct iff its record is ok and the parsed letter's index
    equals answer_idx. Parse and transport errors count as incorrect and stay
    in the totals.
    """
    by_qid = {}
    for record in records:
        by_qid[record.qid] = record
    items = manifest.by_qid()
    if set(by_qid) != set(items):
        missing = sorted(set(items) - set(by_qid))[:5]
        extra = sorted(set(by_qid) - set(items))[:5]
        raise QidMismatch(
            f"records and manifest disagree (missing {missing}, unexpected {extra})"
        )

    correct: dict[str, int] = {}
    total: dict[str, int] = {}
    parse_errors = 0
    transport_errors = 0
    for qid, item in items.items():
        record = by_qid[qid]
        total[item.qtype] = total.get(item.qtype, 0) + 1
        if record.status == "parse_error":
            parse_errors += 1
        elif record.status == "transport_error":
            transport_errors += 1
        elif record.status == "ok" and record.parsed is not None:
            if index_for_letter(record.parsed) == item.answer_idx:
                correct[item.qtype] = correct.get(item.qtype, 0) + 1

    ordered = [t for t in QUESTION_TYPES if t in total]
    per_type = {t: TypeScore(correct.get(t, 0), total[t]) for t in ordered}
    overall = TypeScore(sum(correct.values()), sum(total.values()))
    return EvalReport(
        per_type=per_type,
        overall=overall,
        parse_error_count=parse_errors,
        transport_error_count=transport_errors,
        config_fingerprint=config_fingerprint,
    )


# --- table rendering ----------------------------------------------------------


def _render_rows(
    columns: list[str],
    rows: list[tuple[str, list[str]]],
    *,
    label_header: str,
) -> str:
    """Align a label column plus value columns; two spaces between columns."""
    label_width = max([len(label_header)] + [len(label) for label, _ in rows])
    widths = [
        max([len(col)] + [len(values[i]) for _, values in rows])
        for i, col in enumerate(columns)
    ]
    lines = []
    header_cells = [label_header.ljust(label_width)] if label_width else []
    header_cells += [col.rjust(widths[i]) for i, col in enumerate(columns)]
    lines.append("  ".join(header_cells).rstrip())
    for label, values in rows:
        cells = [label.ljust(label_width)] if label_width else []
        cells += [values[i].rjust(widths[i]) for i in range(len(columns))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _starred_rows(reports: list[EvalReport], labels: list[str]) -> list[tuple[str, list[str]]]:
    grid = [report.row_tenths() for report in reports]
    best = [max(column) for column in zip(*grid)]
    rows = []
    for label, report, tenths in zip(labels, reports, grid):
        values = [
            value + ("*" if cell == best[i] else "")
            for i, (value, cell) in enumerate(zip(report.row_values(), tenths))
        ]
        rows.append((label, values))
    return rows


def _check_compatible(reports: Sequence[EvalReport]) -> list[str]:
    columns = reports[0].columns()
    for report in reports[1:]:
        if report.columns() != columns:
            raise IncompatibleColumns(
                f"column sets differ: {columns} vs {report.columns()}"
            )
    return columns


def compare(reports: Sequence[EvalReport], labels: Sequence[str] | None = None) -> str:
    """Side-by-side table: best value per column starred, deltas vs the first."""
    if len(reports) < 2:
        raise InvalidArgument("compare needs at least two reports")
    columns = _check_compatible(list(reports))
    labels = list(labels) if labels else [f"report-{i + 1}" for i in range(len(reports))]
    if len(labels) != len(reports):
        raise InvalidArgument("one label per report required")

    rows = _starred_rows(list(reports), labels)
    base = reports[0].row_tenths()
    for report, label in zip(reports[1:], labels[1:]):
        deltas = [
            _format_delta(cell - base_cell)
            for cell, base_cell in zip(report.row_tenths(), base)
        ]
        rows.append((f"delta({label})", deltas))
    return _render_rows(columns, rows, label_header="report")


def frame_count_label(grid_side: int) -> str:
    """Ablation row label: grid size N -> '<N*N>-frame(s)'."""
    count = grid_side * grid_side
    return f"{count}-frame" if count == 1 else f"{count}-frames"


def render_ablation_table(results: Sequence[tuple[int, EvalReport]]) -> str:
    """Rows per grid size, labeled by how many frames the montage holds."""
    if not results:
        raise InvalidArgument("no ablation results to render")
    reports = [report for _, report in results]
    columns = _check_compatible(reports)
    labels = [frame_count_label(n) for n, _ in results]
    rows = _starred_rows(reports, labels)
    return _render_rows(columns, rows, label_header="frames")
