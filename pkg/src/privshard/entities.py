"""Sensitive-entity taxonomy, the default regex catalog, and the detector interface."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Protocol, Sequence

from privshard.errors import CatalogError, LabelSequenceError
from privshard.text_pipeline import (
    CleanToken,
    IobLabel,
    check_label_sequence,
    clean_tokens,
    compile_patterns,
    label_tokens,
)


class EntityKind(str, enum.Enum):
    EMAIL = "EMAIL"
    PHONE = "PHONE"
    SSN = "SSN"
    MONEY = "MONEY"
    CREDIT_CARD = "CREDIT_CARD"
    URL = "URL"
    PASSPORT = "PASSPORT"


@dataclass(frozen=True)
class EntityPattern:
    kind: EntityKind
    pattern: str
    order: int


@dataclass(frozen=True)
class EntitySpan:
    kind: EntityKind
    value: str
    token_index: int
    char_start: int
    char_end: int


# Evaluation order matters: CREDIT_CARD would swallow any 13-16 digit run, so
# it sits after the structurally distinctive kinds. PASSPORT has no default.
DEFAULT_PATTERNS: tuple[tuple[EntityKind, str], ...] = (
    (EntityKind.SSN, r"\d{3}-\d{2}-\d{4}"),
    (EntityKind.MONEY, r"\$\d{1,3}(?:,\d{3})*(?:\.\d{2})?"),
    (EntityKind.URL, r"https?://[^\s]+"),
    (EntityKind.EMAIL, r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"),
    (EntityKind.CREDIT_CARD, r"\d{13,16}"),
    (EntityKind.PHONE, r"\+\d{6,15}"),
)


class EntityCatalog(Sequence[EntityPattern]):
    """Immutable ordered list of entity patterns.

    Every pattern is compiled at construction so a bad regex fails early
    with the offending kind and position in the message. Use
    :meth:`with_pattern` to derive a modified catalog.
    """

    def __init__(self, entries: Iterable[tuple[EntityKind, str]]):
        self._patterns = tuple(
            EntityPattern(EntityKind(kind), pattern, i) for i, (kind, pattern) in enumerate(entries)
        )
        compile_patterns(self._patterns)

    def __getitem__(self, i):  # type: ignore[override]
        return self._patterns[i]

    def __len__(self) -> int:
        return len(self._patterns)

    def __iter__(self) -> Iterator[EntityPattern]:
        return iter(self._patterns)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EntityCatalog) and self._patterns == other._patterns

    def __hash__(self) -> int:
        return hash(self._patterns)

    def __repr__(self) -> str:
        kinds = ", ".join(p.kind.value for p in self._patterns)
        return f"EntityCatalog([{kinds}])"

    def kinds(self) -> list[EntityKind]:
        return [p.kind for p in self._patterns]

    def with_pattern(self, kind: EntityKind, pattern: str) -> EntityCatalog:
        """Replace ``kind``'s pattern in place, or append it if absent."""
        entries = [(p.kind, p.pattern) for p in self._patterns]
        for i, (k, _) in enumerate(entries):
            if k == kind:
                entries[i] = (kind, pattern)
                break
        else:
            entries.append((kind, pattern))
        return EntityCatalog(entries)

    def without(self, kind: EntityKind) -> EntityCatalog:
        return EntityCatalog((p.kind, p.pattern) for p in self._patterns if p.kind != kind)

    def digest(self) -> str:
        h = hashlib.sha256()
        for p in self._patterns:
            h.update(f"{p.order}\t{p.kind.value}\t{p.pattern}\n".encode())
        return h.hexdigest()

    def dumps(self) -> str:
        return "".join(f"{p.kind.value}\t{p.pattern}\n" for p in self._patterns)

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> EntityCatalog:
        """Parse ``KIND<TAB>regex`` lines; blank lines and ``#`` comments are skipped."""
        entries = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            kind_name, sep, pattern = line.partition("\t")
            if not sep or not pattern:
                raise CatalogError(f"{source}:{lineno}: expected KIND<TAB>regex")
            try:
                kind = EntityKind(kind_name.strip())
            except ValueError:
                raise CatalogError(f"{source}:{lineno}: unknown entity kind {kind_name!r}") from None
            entries.append((kind, pattern))
        if not entries:
            raise CatalogError(f"{source}: catalog file defines no patterns")
        seen = [k for k, _ in entries]
        if len(set(seen)) != len(seen):
            raise CatalogError(f"{source}: duplicate entity kind")
        try:
            return cls(entries)
        except CatalogError as exc:
            raise CatalogError(f"{source}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> EntityCatalog:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
        return cls.loads(text, source=str(path))


_DEFAULT = EntityCatalog(DEFAULT_PATTERNS)


def default_catalog() -> EntityCatalog:
    return _DEFAULT


def spans_from_labels(tokens: Sequence[CleanToken], labels: Sequence[IobLabel]) -> list[EntitySpan]:
    """Turn labeled tokens into one span per labeled token.

    ``tokens`` is the full cleaned-token list, dropped tokens included;
    ``labels`` covers only the kept tokens. Adjacent same-kind tokens
    (a B followed by I) still become separate spans because each one
    matched the full pattern on its own. ``token_index`` indexes ``tokens``.
    """
    kept = [(i, t) for i, t in enumerate(tokens) if not t.dropped]
    if len(kept) != len(labels):
        raise LabelSequenceError(f"{len(labels)} labels for {len(kept)} kept tokens")
    check_label_sequence(labels)
    return [
        EntitySpan(label.kind, tok.cleaned, i, tok.char_start, tok.char_end)
        for (i, tok), label in zip(kept, labels)
        if label.kind is not None
    ]


class Detector(Protocol):
    """Anything that finds sensitive spans in raw text.

    A trained sequence tagger can replace :class:`RegexDetector` as long as it
    returns spans whose offsets point at the cleaned value in ``text``.
    """

    def detect(self, text: str) -> list[EntitySpan]: ...


class RegexDetector:
    def __init__(self, catalog: EntityCatalog | None = None):
        self.catalog = catalog if catalog is not None else default_catalog()

    def detect(self, text: str) -> list[EntitySpan]:
        tokens = clean_tokens(text)
        labels = label_tokens([t.cleaned for t in tokens if not t.dropped], self.catalog)
        return spans_from_labels(tokens, labels)

    def __repr__(self) -> str:
        return f"RegexDetector({self.catalog!r})"


def detect(text: str, catalog: EntityCatalog | None = None) -> list[EntitySpan]:
    return RegexDetector(catalog).detect(text)
