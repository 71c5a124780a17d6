"""Instruction-text construction for multi-choice questions.

The template is a fixed contract: the question line, one ``<LETTER>. <text>``
line per option, then a single instruction line. The direct-mode suffix must
stay byte-exact; the finetune exporter and every backend share it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import InvalidArgument
from .letters import OPTION_LETTERS, letters_in_play

if TYPE_CHECKING:
    from .dataset import QaItem

DIRECT_SUFFIX = "Answer with the option's letter from the given choices directly."
EXPLAIN_SUFFIX = (
    "Answer with the option's letter from the given choices, then explain your answer."
)

MODES = ("direct", "explain")


@dataclass(frozen=True)
class PromptText:
    """A built instruction string plus the option letters it puts in play."""

    text: str
    letters_in_play: tuple[str, ...]
    mode: str


def prompt_body(item: "QaItem") -> str:
    """Question plus lettered options, without the instruction suffix."""
    lines = [item.question]
    lines.extend(
        f"{OPTION_LETTERS[i]}. {option}" for i, option in enumerate(item.options)
    )
    return "\n".join(lines)


def build(item: "QaItem", mode: str = "direct") -> PromptText:
    """Build the user-instruction text for one item.

    Deterministic: the same item and mode always produce the same string.
    """
    if mode not in MODES:
        raise InvalidArgument(f"mode must be one of {MODES}, got {mode!r}")
    suffix = DIRECT_SUFFIX if mode == "direct" else EXPLAIN_SUFFIX
    return PromptText(
        text=f"{prompt_body(item)}\n{suffix}",
        letters_in_play=letters_in_play(len(item.options)),
        mode=mode,
    )
