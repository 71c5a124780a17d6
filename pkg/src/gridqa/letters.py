"""Single shared definition of the option-index <-> letter bijection.

The dataset, prompt, and scoring modules all import from here so the mapping
cannot drift: index 0 is always A, 1 is B, and so on up to H (8 options max).
"""

from __future__ import annotations

from .errors import InvalidArgument

OPTION_LETTERS = "ABCDEFGH"

MIN_OPTIONS = 2
MAX_OPTIONS = len(OPTION_LETTERS)


def letter_for_index(index: int) -> str:
    """Return the option letter for a 0-based option index."""
    if not 0 <= index < MAX_OPTIONS:
        raise InvalidArgument(f"option index {index} outside [0, {MAX_OPTIONS})")
    return OPTION_LETTERS[index]


def index_for_letter(letter: str) -> int:
    """Return the 0-based option index for a letter A..H."""
    pos = OPTION_LETTERS.find(letter)
    if pos < 0:
        raise InvalidArgument(f"{letter!r} is not an option letter")
    return pos


def letters_in_play(option_count: int) -> tuple[str, ...]:
    """First ``option_count`` letters, i.e. the letters a prompt puts in play."""
    if not MIN_OPTIONS <= option_count <= MAX_OPTIONS:
        raise InvalidArgument(
            f"option count {option_count} outside [{MIN_OPTIONS}, {MAX_OPTIONS}]"
        )
    return tuple(OPTION_LETTERS[:option_count])
