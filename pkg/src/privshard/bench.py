"""Desk-scale benchmarks: build cost, direct vs blind lookup, full vs clustered search.

Only trends and ratios are meaningful; absolute timings depend on the host.
Every measurement uses ``time.perf_counter_ns`` and excludes a warm-up pass.
"""

from __future__ import annotations

import csv
import random
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from privshard.clustering import full_scan, ranked_search
from privshard.entities import EntityKind
from privshard.errors import BenchRefused
from privshard.store import SecureStore
from privshard.synth import TOPICS, SyntheticDoc, gen_corpus, sensitive_value, topic_query
from privshard.vault import KeyBundle, canonicalize, generate_keys
from privshard.vectors import tfidf_vector

CSV_SCHEMA = "# privshard-bench schema=1"
CSV_COLUMNS = ("experiment", "n", "phase", "median_ns", "p90_ns", "agreement")

# rough resident cost of one ingested document (record, ciphertexts, vector, corpus copy)
BYTES_PER_DOC = 6_000


@dataclass
class BenchConfig:
    sizes: tuple[int, ...] = (1_000, 10_000)
    seed: int = 7
    repetitions: int = 3
    k: int = 10
    queries: int = 20
    top_n: int = 10
    noise: float = 0.05
    memory_budget_mb: int = 2_048
    concurrency: int = 1

    def __post_init__(self) -> None:
        self.sizes = tuple(int(n) for n in self.sizes)
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise ValueError("sizes must be positive")
        if list(self.sizes) != sorted(self.sizes):
            raise ValueError("sizes must be ascending")
        if self.repetitions < 3:
            raise ValueError("repetitions must be at least 3")
        if self.queries < 1 or self.k < 1 or self.top_n < 1:
            raise ValueError("queries, k and top_n must be positive")

    def check_budget(self) -> None:
        need = max(self.sizes) * BYTES_PER_DOC
        if need > self.memory_budget_mb * 1024 * 1024:
            raise BenchRefused(
                f"n={max(self.sizes)} needs about {need / 2**20:.0f} MiB, "
                f"over the {self.memory_budget_mb} MiB budget (raise --memory-budget-mb)"
            )


@dataclass(frozen=True)
class BenchRow:
    experiment: str
    n: int
    phase: str
    median_ns: int
    p90_ns: int
    agreement: float | None = None
    samples: tuple[int, ...] = field(default=(), repr=False, compare=False)

    @property
    def mean_ns(self) -> float:
        return statistics.fmean(self.samples) if self.samples else float(self.median_ns)

    def csv_fields(self) -> list:
        agree = "" if self.agreement is None else f"{self.agreement:.4f}"
        return [self.experiment, self.n, self.phase, self.median_ns, self.p90_ns, agree]


def percentile(samples: Sequence[int], q: float) -> int:
    """Nearest-rank percentile."""
    ordered = sorted(samples)
    rank = max(1, -(-int(q * 100) * len(ordered) // 100))
    return int(ordered[rank - 1])


def summarize(experiment: str, n: int, phase: str, samples: Sequence[int], agreement=None) -> BenchRow:
    return BenchRow(
        experiment, n, phase, int(statistics.median_low(samples)), percentile(samples, 0.9),
        agreement, tuple(samples),
    )


def _build_store(docs: Sequence[SyntheticDoc], keys: KeyBundle) -> SecureStore:
    store = SecureStore.create(keys)
    for d in docs:
        store.ingest(d.text, keys)
    return store


def bench_build(config: BenchConfig) -> list[BenchRow]:
    """Per size: AES time, HMAC time and total ingest time across repetitions."""
    config.check_budget()
    keys = generate_keys(seed=config.seed)
    rows = []
    _build_store(gen_corpus(min(200, config.sizes[0]), config.seed + 1), keys)  # warm-up
    for n in config.sizes:
        docs = gen_corpus(n, config.seed, config.noise)
        enc, mac, total = [], [], []
        for _ in range(config.repetitions):
            t0 = time.perf_counter_ns()
            store = _build_store(docs, keys)
            total.append(time.perf_counter_ns() - t0)
            enc.append(store.phase_ns["encrypt"])
            mac.append(store.phase_ns["mac"])
            del store
        rows += [
            summarize("build", n, "encrypt", enc),
            summarize("build", n, "mac", mac),
            summarize("build", n, "total", total),
        ]
    return rows


@dataclass(frozen=True)
class LookupQuery:
    kind: EntityKind
    value: str
    present: bool


def lookup_queries(docs: Sequence[SyntheticDoc], count: int, seed: int) -> list[LookupQuery]:
    """``count`` values present in ``docs`` and ``count`` values that are absent."""
    rng = random.Random(seed)
    pool = [s for d in docs for s in d.secrets]
    if not pool:
        raise ValueError("corpus contains no sensitive values")
    known = {(s.kind, s.value) for s in pool}
    present = [LookupQuery(s.kind, s.value, True) for s in rng.sample(pool, min(count, len(pool)))]
    absent: list[LookupQuery] = []
    while len(absent) < count:
        kind = rng.choice(sorted({s.kind for s in pool}, key=lambda k: k.value))
        value = sensitive_value(kind, rng)
        if (kind, value) not in known:
            absent.append(LookupQuery(kind, value, False))
    return present + absent


def plaintext_table(docs: Sequence[SyntheticDoc]) -> list[tuple[int, EntityKind, str]]:
    """The unencrypted baseline: one ``(doc_id, kind, canonical value)`` row per value."""
    return [(i, s.kind, canonicalize(s.value, s.kind)) for i, d in enumerate(docs) for s in d.secrets]


def direct_scan(table: Sequence[tuple[int, EntityKind, str]], kind: EntityKind, value: str) -> list[int]:
    """Linear scan over plaintext rows, same equality semantics as the blind index."""
    value = canonicalize(value, kind)
    return sorted({doc for doc, k, v in table if k is kind and v == value})


def _timed(fn: Callable, *args) -> tuple[object, int]:
    t0 = time.perf_counter_ns()
    out = fn(*args)
    return out, time.perf_counter_ns() - t0


def bench_lookup(config: BenchConfig) -> list[BenchRow]:
    """Per size: plaintext linear scan vs blind-index lookup for the same query set."""
    config.check_budget()
    keys = generate_keys(seed=config.seed)
    rows = []
    for n in config.sizes:
        docs = gen_corpus(n, config.seed, config.noise)
        store = _build_store(docs, keys)
        table = plaintext_table(docs)
        queries = lookup_queries(docs, config.queries, config.seed + n)

        for q in queries:  # warm-up
            direct_scan(table, q.kind, q.value)
            store.lookup_sensitive(q.kind, q.value, keys)

        # the two strategies run in separate passes so one does not evict the other's cache
        direct, blind = [], []
        expected, got = [], []
        for _ in range(config.repetitions):
            for q in queries:
                out, t = _timed(direct_scan, table, q.kind, q.value)
                direct.append(t)
                expected.append(out)
            for q in queries:
                out, t = _timed(store.lookup_sensitive, q.kind, q.value, keys)
                blind.append(t)
                got.append(out)
        agreement = sum(a == b for a, b in zip(expected, got)) / len(expected)
        rows += [
            summarize("lookup", n, "direct", direct, agreement),
            summarize("lookup", n, "blind", blind, agreement),
        ]
        if config.concurrency > 1:
            rows.append(_concurrent_lookup(store, keys, table, queries, n, config))
        del store
    return rows


def _concurrent_lookup(store, keys, table, queries, n, config) -> BenchRow:
    def one(q: LookupQuery):
        got, t = _timed(store.lookup_sensitive, q.kind, q.value, keys)
        return got == direct_scan(table, q.kind, q.value), t

    work = list(queries) * config.repetitions
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        results = list(pool.map(one, work))
    return summarize(
        "lookup", n, "blind_concurrent", [t for _, t in results],
        sum(ok for ok, _ in results) / len(results),
    )


def search_queries(count: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    names = list(TOPICS)
    return [topic_query(names[i % len(names)], rng, rng.choice((2, 3))) for i in range(count)]


def bench_search(config: BenchConfig) -> list[BenchRow]:
    """Per size: full-corpus cosine scan vs nearest-cluster search, plus top-1 agreement."""
    config.check_budget()
    keys = generate_keys(seed=config.seed)
    rows = []
    for n in config.sizes:
        docs = gen_corpus(n, config.seed, config.noise)
        store = _build_store(docs, keys)
        store.finalize(k=min(config.k, n), seed=config.seed)
        vectors = [tfidf_vector(q, store.vocabulary) for q in search_queries(config.queries, config.seed)]

        for q in vectors:  # warm-up
            full_scan(q, store.vectors, config.top_n)
            ranked_search(q, store.model, store.vectors, config.top_n)

        full, clustered = [], []
        top1 = []
        for rep in range(config.repetitions):
            for q in vectors:
                ref, ft = _timed(full_scan, q, store.vectors, config.top_n)
                got, ct = _timed(ranked_search, q, store.model, store.vectors, config.top_n)
                full.append(ft)
                clustered.append(ct)
                if rep == 0:
                    top1.append(bool(ref) and bool(got) and ref[0][0] == got[0][0])
        agreement = sum(top1) / len(top1)
        rows += [
            summarize("search", n, "full", full),
            summarize("search", n, "clustered", clustered, agreement),
        ]
        del store
    return rows


EXPERIMENTS: dict[str, Callable[[BenchConfig], list[BenchRow]]] = {
    "build": bench_build,
    "lookup": bench_lookup,
    "search": bench_search,
}


def write_csv(rows: Sequence[BenchRow], path: str | Path) -> None:
    ordered = sorted(rows, key=lambda r: (r.experiment, r.n, r.phase))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_SCHEMA + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in ordered:
            writer.writerow(r.csv_fields())


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_SCHEMA:
            raise ValueError(f"unexpected schema line {header!r}")
        return list(csv.DictReader(fh))
