"""Encrypted document store.

Build phase: ``ingest`` detects sensitive values, encrypts each one,
computes its blind index and replaces it in the text by ``[[KIND#n]]``.
``finalize`` then fits the vocabulary, vectorizes the redacted texts and
clusters them; after that the store is read-only.

On disk a store is a directory holding ``store.jsonl`` (one record per
line) and ``manifest.json``. Both are written canonically so that
save -> load -> save reproduces identical bytes.
"""

from __future__ import annotations

import base64
import json
import os
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from privshard.clustering import ClusterModel, kmeans_fit, ranked_search
from privshard.entities import Detector, EntityCatalog, EntityKind, RegexDetector, default_catalog
from privshard.errors import AuthorizationError, NotFoundError, StoreStateError
from privshard.vault import (
    CIPHER_NAME,
    MAC_NAME,
    Ciphertext,
    KeyBundle,
    OpCounter,
    blind_index,
    decrypt_value,
    encrypt_value,
)
from privshard.vectors import (
    IDF_FORMULA,
    PLACEHOLDER_RE,
    TfIdfVector,
    Vocabulary,
    fit_vocabulary,
    tfidf_vector,
)

FORMAT_VERSION = 1
RECORDS_FILE = "store.jsonl"
MANIFEST_FILE = "manifest.json"


def placeholder(kind: EntityKind, ordinal: int) -> str:
    return f"[[{kind.value}#{ordinal}]]"


def _b64(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


def _aad(doc_id: int, ordinal: int, kind: EntityKind) -> bytes:
    # binds each ciphertext to its slot so entries cannot be swapped between records
    return f"{doc_id}:{ordinal}:{kind.value}".encode("ascii")


@dataclass(frozen=True)
class EntityEntry:
    kind: EntityKind
    ordinal: int
    ciphertext: Ciphertext
    index: bytes

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "ord": self.ordinal,
            "n64": _b64(self.ciphertext.nonce),
            "c64": _b64(self.ciphertext.body),
            "t64": _b64(self.ciphertext.auth_tag),
            "ix": self.index.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> EntityEntry:
        ct = Ciphertext(_unb64(obj["n64"]), _unb64(obj["c64"]), _unb64(obj["t64"]))
        return cls(EntityKind(obj["kind"]), int(obj["ord"]), ct, bytes.fromhex(obj["ix"]))


@dataclass
class SecureRecord:
    doc_id: int
    redacted_text: str
    entities: list[EntityEntry]
    vector: TfIdfVector | None = None
    cluster: int | None = None

    def to_json(self) -> dict:
        vec = None if self.vector is None else {str(t): w for t, w in self.vector.weights.items()}
        return {
            "id": self.doc_id,
            "text": self.redacted_text,
            "ents": [e.to_json() for e in self.entities],
            "vec": vec,
            "cl": self.cluster,
        }

    @classmethod
    def from_json(cls, obj: dict) -> SecureRecord:
        vec = obj.get("vec")
        vector = None if vec is None else TfIdfVector({int(t): float(w) for t, w in vec.items()})
        return cls(
            int(obj["id"]),
            obj["text"],
            [EntityEntry.from_json(e) for e in obj["ents"]],
            vector,
            obj.get("cl"),
        )


class BlindIndexMap:
    """Digest -> {(doc_id, ordinal)}; a plain dict, so lookups are O(1) on average."""

    def __init__(self) -> None:
        self._map: dict[bytes, set[tuple[int, int]]] = {}

    def add(self, digest: bytes, doc_id: int, ordinal: int) -> None:
        self._map.setdefault(digest, set()).add((doc_id, ordinal))

    def lookup(self, digest: bytes) -> list[int]:
        hits = self._map.get(digest)
        return sorted({doc for doc, _ in hits}) if hits else []

    def postings(self, digest: bytes) -> set[tuple[int, int]]:
        return set(self._map.get(digest, ()))

    def digests(self) -> set[bytes]:
        return set(self._map)

    def __len__(self) -> int:
        return len(self._map)


@dataclass
class StoreManifest:
    fingerprint: str
    catalog_hash: str
    record_count: int
    finalized: bool = False
    k: int | None = None
    seed: int | None = None
    max_iter: int | None = None
    iterations: int | None = None
    sse: float | None = None
    centroids: list[list[float]] = field(default_factory=list)
    vocabulary: list[list] = field(default_factory=list)
    n_docs: int = 0
    idf_formula: str = IDF_FORMULA
    cipher: str = CIPHER_NAME
    mac: str = MAC_NAME
    version: int = FORMAT_VERSION

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "fingerprint": self.fingerprint,
            "cipher": self.cipher,
            "mac": self.mac,
            "catalog": self.catalog_hash,
            "records": self.record_count,
            "finalized": self.finalized,
            "idf": self.idf_formula,
            "k": self.k,
            "seed": self.seed,
            "max_iter": self.max_iter,
            "iterations": self.iterations,
            "sse": self.sse,
            "n_docs": self.n_docs,
            "vocabulary": self.vocabulary,
            "centroids": self.centroids,
        }

    @classmethod
    def from_json(cls, obj: dict) -> StoreManifest:
        if obj.get("version") != FORMAT_VERSION:
            raise StoreStateError(f"unsupported store format version {obj.get('version')!r}")
        return cls(
            fingerprint=obj["fingerprint"],
            catalog_hash=obj["catalog"],
            record_count=obj["records"],
            finalized=obj["finalized"],
            k=obj.get("k"),
            seed=obj.get("seed"),
            max_iter=obj.get("max_iter"),
            iterations=obj.get("iterations"),
            sse=obj.get("sse"),
            centroids=obj.get("centroids") or [],
            vocabulary=obj.get("vocabulary") or [],
            n_docs=obj.get("n_docs", 0),
            idf_formula=obj["idf"],
            cipher=obj["cipher"],
            mac=obj["mac"],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, separators=(",", ":")) + "\n"


def _dump_record(rec: SecureRecord) -> str:
    return json.dumps(rec.to_json(), ensure_ascii=False, separators=(",", ":"))


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)
    os.replace(tmp, path)


class SecureStore:
    """In-memory store; see the module docstring for the lifecycle."""

    def __init__(
        self,
        fingerprint: bytes,
        catalog: EntityCatalog | None = None,
        detector: Detector | None = None,
    ):
        self.fingerprint = fingerprint
        self.catalog = catalog if catalog is not None else default_catalog()
        self.detector = detector if detector is not None else RegexDetector(self.catalog)
        self.records: list[SecureRecord] = []
        self.index = BlindIndexMap()
        self.vocabulary: Vocabulary | None = None
        self.model: ClusterModel | None = None
        self._vectors: list[TfIdfVector] = []
        self._max_iter: int | None = None
        self.phase_ns: Counter[str] = Counter()
        self.counters = OpCounter()

    @classmethod
    def create(cls, keys: KeyBundle, catalog: EntityCatalog | None = None, detector: Detector | None = None):
        return cls(keys.fingerprint, catalog, detector)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SecureRecord]:
        return iter(self.records)

    @property
    def finalized(self) -> bool:
        return self.model is not None

    @property
    def vectors(self) -> list[TfIdfVector]:
        return self._vectors

    def check_keys(self, keys: KeyBundle | None) -> KeyBundle:
        if keys is None:
            raise AuthorizationError("this operation requires the store's key bundle")
        if keys.fingerprint != self.fingerprint:
            raise AuthorizationError(
                f"key fingerprint {keys.fingerprint.hex()} does not match store {self.fingerprint.hex()}"
            )
        return keys

    def record(self, doc_id: int) -> SecureRecord:
        if not 0 <= doc_id < len(self.records):
            raise NotFoundError(f"no document with id {doc_id}")
        return self.records[doc_id]

    # -- build phase -----------------------------------------------------

    def ingest(self, text: str, keys: KeyBundle) -> int:
        """Add one document and return its id.

        The record is assembled completely before anything is appended, so
        a failure while encrypting leaves the store untouched.
        """
        if self.finalized:
            raise StoreStateError("store is finalized; inserts are not allowed")
        self.check_keys(keys)
        if PLACEHOLDER_RE.search(text):
            raise ValueError("document text contains reserved placeholder syntax [[KIND#n]]")
        t0 = time.perf_counter_ns()
        spans = self.detector.detect(text)
        t1 = time.perf_counter_ns()
        self.phase_ns["detect"] += t1 - t0

        doc_id = len(self.records)
        entries = []
        pieces = []
        cursor = 0
        enc_ns = mac_ns = 0
        for ordinal, span in enumerate(sorted(spans, key=lambda s: s.char_start)):
            a = time.perf_counter_ns()
            ct = encrypt_value(span.value, keys, _aad(doc_id, ordinal, span.kind))
            b = time.perf_counter_ns()
            digest = blind_index(span.value, span.kind, keys)
            c = time.perf_counter_ns()
            enc_ns += b - a
            mac_ns += c - b
            entries.append(EntityEntry(span.kind, ordinal, ct, digest))
            pieces.append(text[cursor : span.char_start])
            pieces.append(placeholder(span.kind, ordinal))
            cursor = span.char_end
        pieces.append(text[cursor:])

        self.records.append(SecureRecord(doc_id, "".join(pieces), entries))
        for e in entries:
            self.index.add(e.index, doc_id, e.ordinal)
        self.phase_ns["encrypt"] += enc_ns
        self.phase_ns["mac"] += mac_ns
        self.phase_ns["ingest"] += time.perf_counter_ns() - t0
        self.phase_ns["entities"] += len(entries)
        return doc_id

    def ingest_many(self, texts: Iterable[str], keys: KeyBundle) -> list[int]:
        return [self.ingest(t, keys) for t in texts]

    def finalize(self, k: int = 10, seed: int = 0, max_iter: int = 100) -> StoreManifest:
        """Fit vocabulary, vectors and clusters. May be repeated; never re-opens inserts."""
        if not self.records:
            raise StoreStateError("cannot finalize an empty store")
        if k < 1 or k > len(self.records):
            raise ValueError(f"k must be between 1 and the record count ({len(self.records)}), got {k}")
        vocab = fit_vocabulary(r.redacted_text for r in self.records)
        vectors = [tfidf_vector(r.redacted_text, vocab) for r in self.records]
        model = kmeans_fit(vectors, k, max_iter=max_iter, seed=seed, dim=max(len(vocab), 1))
        for rec, vec, cl in zip(self.records, vectors, model.assignment):
            rec.vector = vec
            rec.cluster = int(cl)
        self.vocabulary = vocab
        self._vectors = vectors
        self.model = model
        self._max_iter = max_iter
        return self.manifest()

    # -- read phase ------------------------------------------------------

    def lookup_sensitive(self, kind: EntityKind, value: str, keys: KeyBundle | None) -> list[int]:
        """Doc ids holding ``value`` as a ``kind`` entity; no decryption involved.

        Works on a store that is still being built as well, since the blind
        index map is maintained at ingest time.
        """
        self.check_keys(keys)
        self.counters.incr("blind_lookup")
        return self.index.lookup(blind_index(value, kind, keys))

    def search_nonsensitive(
        self, query: str, top_n: int = 10, probe: int = 1, stats: dict | None = None
    ) -> list[tuple[int, float]]:
        if not self.finalized:
            raise StoreStateError("store must be finalized before ranked search")
        self.counters.incr("ranked_search")
        q = tfidf_vector(query, self.vocabulary)
        return ranked_search(q, self.model, self._vectors, top_n=top_n, probe=probe, stats=stats)

    def reveal(self, doc_id: int, ordinal: int, keys: KeyBundle | None) -> str:
        self.check_keys(keys)
        rec = self.record(doc_id)
        if not 0 <= ordinal < len(rec.entities):
            raise NotFoundError(f"document {doc_id} has no entity #{ordinal}")
        entry = rec.entities[ordinal]
        self.counters.incr("reveal")
        return decrypt_value(entry.ciphertext, keys, _aad(doc_id, ordinal, entry.kind))

    # -- persistence -----------------------------------------------------

    def manifest(self) -> StoreManifest:
        m = StoreManifest(
            fingerprint=self.fingerprint.hex(),
            catalog_hash=self.catalog.digest(),
            record_count=len(self.records),
        )
        if self.finalized:
            m.finalized = True
            m.k = self.model.k
            m.seed = self.model.seed
            m.max_iter = self._max_iter
            m.iterations = self.model.iterations_run
            m.sse = self.model.final_sse
            m.centroids = self.model.centroids.tolist()
            m.vocabulary = self.vocabulary.to_triples()
            m.n_docs = self.vocabulary.n_docs
        return m

    def dumps_records(self) -> str:
        return "".join(_dump_record(r) + "\n" for r in self.records)

    def serialized_bytes(self) -> bytes:
        """Everything :meth:`save` would write, concatenated."""
        return (self.dumps_records() + self.manifest().dumps()).encode("utf-8")

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _atomic_write(directory / RECORDS_FILE, self.dumps_records())
        _atomic_write(directory / MANIFEST_FILE, self.manifest().dumps())

    @classmethod
    def load(
        cls,
        directory: str | Path,
        keys: KeyBundle | None = None,
        catalog: EntityCatalog | None = None,
    ) -> SecureStore:
        """Read a store directory.

        If ``keys`` is given it must match the manifest fingerprint. If
        ``catalog`` is given its hash must match the one used at ingest.
        """
        directory = Path(directory)
        try:
            manifest = StoreManifest.from_json(json.loads((directory / MANIFEST_FILE).read_text("utf-8")))
            lines = (directory / RECORDS_FILE).read_text("utf-8").splitlines()
        except FileNotFoundError as exc:
            raise StoreStateError(f"{directory} is not a store directory ({exc.filename} missing)") from None
        except (json.JSONDecodeError, KeyError) as exc:
            raise StoreStateError(f"{directory}: corrupt manifest ({exc})") from None
        catalog = catalog if catalog is not None else default_catalog()
        if catalog.digest() != manifest.catalog_hash:
            raise StoreStateError("entity catalog does not match the one this store was built with")
        store = cls(bytes.fromhex(manifest.fingerprint), catalog)
        if keys is not None:
            store.check_keys(keys)
        try:
            store.records = [SecureRecord.from_json(json.loads(line)) for line in lines if line]
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise StoreStateError(f"{directory}: corrupt record ({exc})") from None
        if len(store.records) != manifest.record_count:
            raise StoreStateError(
                f"manifest lists {manifest.record_count} records, {RECORDS_FILE} has {len(store.records)}"
            )
        for i, rec in enumerate(store.records):
            if rec.doc_id != i:
                raise StoreStateError(f"record ids are not sequential at line {i + 1}")
            for e in rec.entities:
                store.index.add(e.index, rec.doc_id, e.ordinal)
        if manifest.finalized:
            store.vocabulary = Vocabulary.from_triples(manifest.vocabulary, manifest.n_docs)
            store._vectors = [r.vector if r.vector is not None else TfIdfVector({}) for r in store.records]
            store._max_iter = manifest.max_iter
            store.model = ClusterModel(
                k=manifest.k,
                centroids=np.array(manifest.centroids, dtype=np.float64).reshape(manifest.k, -1),
                assignment=[r.cluster for r in store.records],
                iterations_run=manifest.iterations,
                final_sse=manifest.sse,
                seed=manifest.seed,
                sse_history=[manifest.sse],
            )
        return store
