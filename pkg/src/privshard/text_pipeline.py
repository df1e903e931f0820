"""Word tokenization with source offsets, edge-punctuation cleaning and IOB labeling.

Tokens keep ``start``/``end`` offsets into the original string so that a
cleaned value can always be mapped back to the exact characters it came
from. Cleaning only touches the edges of a token: interior characters such
as the dots of an e-mail address or the dashes of an SSN are preserved.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

from privshard.errors import CatalogError, LabelSequenceError

if TYPE_CHECKING:
    from privshard.entities import EntityKind, EntityPattern

_WORD_RE = re.compile(r"\S+")

# ASCII bracket/quote/terminal marks are listed explicitly in addition to the
# Unicode P* categories. '$' (Sc) and '+' (Sm) are never stripped.
EXTRA_PUNCTUATION = frozenset("()[]{}\"';:!?.,")


def is_edge_punctuation(ch: str) -> bool:
    return ch in EXTRA_PUNCTUATION or unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class CleanToken:
    original: Token
    cleaned: str
    leading_stripped: int
    trailing_stripped: int

    @property
    def dropped(self) -> bool:
        return not self.cleaned

    @property
    def char_start(self) -> int:
        return self.original.start + self.leading_stripped

    @property
    def char_end(self) -> int:
        return self.original.end - self.trailing_stripped


@dataclass(frozen=True)
class IobLabel:
    tag: str
    kind: EntityKind | None = None

    def __post_init__(self) -> None:
        if self.tag not in ("O", "B", "I"):
            raise ValueError(f"invalid IOB tag {self.tag!r}")
        if (self.tag == "O") != (self.kind is None):
            raise ValueError("O labels carry no kind; B/I labels require one")

    def __str__(self) -> str:
        return "O" if self.kind is None else f"{self.tag}-{self.kind.value}"


OUTSIDE = IobLabel("O")


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def clean_token(token: Token | str) -> CleanToken:
    """Strip punctuation from both edges of ``token``.

    A bare string is treated as a token starting at offset 0. A token made
    only of punctuation comes back with ``cleaned == ""`` and ``dropped``
    set; it is kept so offsets stay reconstructible.
    """
    if isinstance(token, str):
        token = Token(token, 0, len(token))
    text = token.text
    lo, hi = 0, len(text)
    while lo < hi and is_edge_punctuation(text[lo]):
        lo += 1
    while hi > lo and is_edge_punctuation(text[hi - 1]):
        hi -= 1
    return CleanToken(token, text[lo:hi], lo, len(text) - hi)


def clean_tokens(text: str) -> list[CleanToken]:
    return [clean_token(t) for t in tokenize(text)]


@lru_cache(maxsize=256)
def _compile(pattern: str) -> re.Pattern[str]:
    try:
        return re.compile(pattern)
    except re.error as exc:
        raise CatalogError(f"malformed pattern {pattern!r}: {exc}") from exc


def compile_patterns(patterns: Iterable[EntityPattern]) -> list[tuple[EntityKind, re.Pattern[str]]]:
    compiled = []
    for p in patterns:
        try:
            compiled.append((p.kind, _compile(p.pattern)))
        except CatalogError as exc:
            raise CatalogError(f"{p.kind.value} pattern at position {p.order}: {exc}") from exc
    return compiled


def label_tokens(tokens: Sequence[str], patterns: Iterable[EntityPattern]) -> list[IobLabel]:
    """Assign IOB labels to cleaned token strings.

    Patterns are tried in catalog order against the whole token and the first
    match wins. A match opens a new span (``B``) unless the previous token
    matched the same kind, in which case it continues it (``I``). Any
    non-matching token closes the running span.
    """
    compiled = compile_patterns(patterns)
    labels = [OUTSIDE] * len(tokens)
    active = None
    for i, token in enumerate(tokens):
        found = False
        for kind, regex in compiled:
            if regex.fullmatch(token):
                if active != kind:
                    labels[i] = IobLabel("B", kind)
                    active = kind
                else:
                    labels[i] = IobLabel("I", kind)
                found = True
                break
        if not found:
            active = None
    return labels


def check_label_sequence(labels: Sequence[IobLabel]) -> None:
    """Raise LabelSequenceError if an ``I`` does not continue a same-kind span."""
    prev = OUTSIDE
    for i, label in enumerate(labels):
        if label.tag == "I" and (prev.tag == "O" or prev.kind != label.kind):
            raise LabelSequenceError(f"I-{label.kind.value} at position {i} follows {prev}")
        prev = label

