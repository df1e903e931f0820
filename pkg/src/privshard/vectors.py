"""TF-IDF vectorization over redacted text and cosine similarity.

    tf(t, d)  = count(t, d) / number of terms in d
    idf(t)    = ln((1 + N) / (1 + df(t))) + 1
    weight    = tf * idf

Vectors are sparse ``{term_id: weight}`` maps with the L2 norm cached.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from privshard.text_pipeline import clean_tokens

IDF_FORMULA = "tf=count/len;idf=ln((1+N)/(1+df))+1"

PLACEHOLDER_RE = re.compile(r"\[\[[A-Z_]+#\d+\]\]")


def analyze(text: str) -> list[str]:
    """Terms of ``text``: lowercased cleaned tokens, redaction placeholders removed."""
    text = PLACEHOLDER_RE.sub(" ", text)
    return [t.cleaned.lower() for t in clean_tokens(text) if not t.dropped]


@dataclass(frozen=True)
class Vocabulary:
    term_ids: Mapping[str, int]
    df: tuple[int, ...]
    n_docs: int
    idf: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.df) != len(self.term_ids):
            raise ValueError("df length does not match vocabulary size")
        idf = tuple(math.log((1 + self.n_docs) / (1 + d)) + 1.0 for d in self.df)
        object.__setattr__(self, "idf", idf)

    def __len__(self) -> int:
        return len(self.term_ids)

    def __contains__(self, term: object) -> bool:
        return term in self.term_ids

    def doc_freq(self, term: str) -> int:
        return self.df[self.term_ids[term]]

    def terms(self) -> list[str]:
        out = [""] * len(self.term_ids)
        for term, i in self.term_ids.items():
            out[i] = term
        return out

    def to_triples(self) -> list[list]:
        return [[term, i, self.df[i]] for i, term in enumerate(self.terms())]

    @classmethod
    def from_triples(cls, triples: Iterable[Iterable], n_docs: int) -> Vocabulary:
        rows = sorted((int(i), str(term), int(df)) for term, i, df in triples)
        if [i for i, _, _ in rows] != list(range(len(rows))):
            raise ValueError("vocabulary ids must be contiguous from 0")
        return cls({term: i for i, term, _ in rows}, tuple(df for _, _, df in rows), n_docs)


def fit_vocabulary(corpus: Iterable[str]) -> Vocabulary:
    """Count document frequencies; term ids follow sorted term order."""
    df: Counter[str] = Counter()
    n = 0
    for doc in corpus:
        df.update(set(analyze(doc)))
        n += 1
    if n == 0:
        raise ValueError("cannot fit a vocabulary on an empty corpus")
    terms = sorted(df)
    return Vocabulary({t: i for i, t in enumerate(terms)}, tuple(df[t] for t in terms), n)


@dataclass(frozen=True)
class TfIdfVector:
    weights: Mapping[int, float]
    norm: float = field(init=False)

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("TF-IDF weights must be non-negative")
        object.__setattr__(self, "norm", math.sqrt(math.fsum(w * w for w in self.weights.values())))

    def __len__(self) -> int:
        return len(self.weights)

    def scaled(self, c: float) -> TfIdfVector:
        return TfIdfVector({t: c * w for t, w in self.weights.items()})


ZERO = TfIdfVector({})


def tfidf_vector(doc: str, vocab: Vocabulary) -> TfIdfVector:
    terms = analyze(doc)
    if not terms:
        return ZERO
    counts = Counter(terms)
    total = len(terms)
    weights = {}
    for term, c in counts.items():
        i = vocab.term_ids.get(term)
        if i is not None:
            weights[i] = (c / total) * vocab.idf[i]
    return TfIdfVector(dict(sorted(weights.items())))


def cosine_similarity(q: TfIdfVector, d: TfIdfVector) -> float:
    """``q.d / (|q| |d|)``; 0 when either vector is zero.

    Products are summed in term-id order so the result does not depend on
    argument order.
    """
    if q.norm == 0.0 or d.norm == 0.0:
        return 0.0
    a, b = (q.weights, d.weights) if len(q.weights) <= len(d.weights) else (d.weights, q.weights)
    common = sorted(t for t in a if t in b)
    if not common:
        return 0.0
    dot = math.fsum(q.weights[t] * d.weights[t] for t in common)
    return min(1.0, dot / (q.norm * d.norm))
