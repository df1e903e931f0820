"""Query routing: blind-index lookup for sensitive terms, clustered ranking for the rest."""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from privshard.entities import Detector, EntityCatalog, EntitySpan, RegexDetector
from privshard.errors import AuthorizationError
from privshard.store import SecureStore
from privshard.text_pipeline import clean_tokens
from privshard.vault import KeyBundle


class QueryMode(str, enum.Enum):
    EXACT = "EXACT"
    RANKED = "RANKED"
    HYBRID = "HYBRID"


@dataclass(frozen=True)
class QueryPlan:
    text: str
    sensitive_terms: tuple[EntitySpan, ...]
    residual_text: str
    mode: QueryMode


@dataclass
class Hit:
    doc_id: int
    score: float
    exact: bool = False
    ranked: bool = False

    @property
    def flags(self) -> str:
        names = [n for n, on in (("exact", self.exact), ("ranked", self.ranked)) if on]
        return ",".join(names)


@dataclass
class ResultSet:
    mode: QueryMode
    hits: list[Hit] = field(default_factory=list)
    timings_ns: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    def doc_ids(self) -> list[int]:
        return [h.doc_id for h in self.hits]


def _has_alpha_token(text: str) -> bool:
    return any(any(ch.isalpha() for ch in t.cleaned) for t in clean_tokens(text))


def plan_query(
    text: str, catalog: EntityCatalog | None = None, detector: Detector | None = None
) -> QueryPlan:
    detector = detector if detector is not None else RegexDetector(catalog)
    spans = tuple(sorted(detector.detect(text), key=lambda s: s.char_start))
    pieces, cursor = [], 0
    for s in spans:
        pieces.append(text[cursor : s.char_start])
        cursor = s.char_end
    pieces.append(text[cursor:])
    residual = " ".join(" ".join(pieces).split())

    if not spans:
        mode = QueryMode.RANKED
    elif not _has_alpha_token(residual):
        mode = QueryMode.EXACT
    else:
        mode = QueryMode.HYBRID
    return QueryPlan(text, spans, residual, mode)


def _exact_path(plan: QueryPlan, store: SecureStore, keys: KeyBundle) -> tuple[list[int], int]:
    t0 = time.perf_counter_ns()
    docs: set[int] = set()
    for span in plan.sensitive_terms:
        docs.update(store.lookup_sensitive(span.kind, span.value, keys))
    return sorted(docs), time.perf_counter_ns() - t0


def _ranked_path(text: str, store: SecureStore, top_n: int, probe: int) -> tuple[list[tuple[int, float]], int]:
    t0 = time.perf_counter_ns()
    hits = store.search_nonsensitive(text, top_n=top_n, probe=probe)
    return hits, time.perf_counter_ns() - t0


def execute(
    plan: QueryPlan,
    store: SecureStore,
    keys: KeyBundle | None = None,
    top_n: int = 10,
    probe: int = 1,
    parallel: bool = False,
) -> ResultSet:
    """Run ``plan`` against ``store``.

    Multiple sensitive terms are OR-ed. In HYBRID mode exact hits come first
    with score 1.0 in ascending doc-id order, followed by ranked hits not
    already present; ``top_n`` caps the ranked part only. ``parallel``
    runs the two paths of a HYBRID plan on separate threads.
    """
    if top_n < 1:
        raise ValueError("top_n must be at least 1")
    if plan.sensitive_terms:
        if keys is None:
            raise AuthorizationError("query contains sensitive terms; a key bundle is required")
        store.check_keys(keys)

    result = ResultSet(plan.mode)
    exact: list[int] = []
    ranked: list[tuple[int, float]] = []
    if plan.mode is QueryMode.EXACT:
        exact, result.timings_ns["exact"] = _exact_path(plan, store, keys)
    elif plan.mode is QueryMode.RANKED:
        ranked, result.timings_ns["ranked"] = _ranked_path(plan.residual_text, store, top_n, probe)
    elif parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fe = pool.submit(_exact_path, plan, store, keys)
            fr = pool.submit(_ranked_path, plan.residual_text, store, top_n, probe)
            exact, result.timings_ns["exact"] = fe.result()
            ranked, result.timings_ns["ranked"] = fr.result()
    else:
        exact, result.timings_ns["exact"] = _exact_path(plan, store, keys)
        ranked, result.timings_ns["ranked"] = _ranked_path(plan.residual_text, store, top_n, probe)

    by_id: dict[int, Hit] = {}
    for doc in exact:
        by_id[doc] = Hit(doc, 1.0, exact=True)
        result.hits.append(by_id[doc])
    for doc, score in ranked:
        if doc in by_id:
            by_id[doc].ranked = True
        else:
            by_id[doc] = Hit(doc, score, ranked=True)
            result.hits.append(by_id[doc])
    return result


def run_query(
    text: str,
    store: SecureStore,
    keys: KeyBundle | None = None,
    top_n: int = 10,
    probe: int = 1,
    parallel: bool = False,
) -> ResultSet:
    return execute(plan_query(text, store.catalog, store.detector), store, keys, top_n, probe, parallel)
