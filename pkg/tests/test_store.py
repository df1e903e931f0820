import json

import pytest

from privshard.entities import EntityCatalog, EntityKind, default_catalog
from privshard.errors import AuthenticationError, AuthorizationError, NotFoundError, StoreStateError
from privshard.store import MANIFEST_FILE, RECORDS_FILE, SecureStore
from privshard.vault import COUNTERS, Ciphertext, canonicalize
from privshard.vectors import PLACEHOLDER_RE


def test_ingest_redacts(keys):
    store = SecureStore.create(keys)
    doc = store.ingest("mail a@b.com now", keys)
    rec = store.record(doc)
    assert rec.redacted_text == "mail [[EMAIL#0]] now"
    assert len(rec.entities) == 1
    assert rec.entities[0].kind is EntityKind.EMAIL


def test_ingest_without_secrets(keys):
    store = SecureStore.create(keys)
    rec = store.record(store.ingest("no secrets", keys))
    assert rec.redacted_text == "no secrets"
    assert rec.entities == []


def test_duplicate_values_share_digest_not_ciphertext(keys):
    store = SecureStore.create(keys)
    rec = store.record(store.ingest("a@b.com a@b.com", keys))
    a, b = rec.entities
    assert a.index == b.index
    assert a.ciphertext != b.ciphertext
    assert rec.redacted_text == "[[EMAIL#0]] [[EMAIL#1]]"


def test_placeholders_keep_surrounding_punctuation(keys):
    store = SecureStore.create(keys)
    rec = store.record(store.ingest("call (+15551234567), or 123-45-6789.", keys))
    assert rec.redacted_text == "call ([[PHONE#0]]), or [[SSN#1]]."


def test_reserved_placeholder_syntax_rejected(keys):
    store = SecureStore.create(keys)
    with pytest.raises(ValueError, match="placeholder"):
        store.ingest("literal [[EMAIL#0]] text", keys)
    assert len(store) == 0


def test_ingest_is_atomic(keys, monkeypatch):
    store = SecureStore.create(keys)
    store.ingest("first a@b.com", keys)
    calls = {"n": 0}
    import privshard.store as mod

    real = mod.encrypt_value

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("HSM unavailable")
        return real(*args, **kwargs)

    monkeypatch.setattr(mod, "encrypt_value", flaky)
    with pytest.raises(RuntimeError):
        store.ingest("x@y.com and z@w.com", keys)
    assert len(store) == 1
    assert len(store.index) == 1


def test_ingest_wrong_keys(keys, other_keys):
    store = SecureStore.create(keys)
    with pytest.raises(AuthorizationError):
        store.ingest("a@b.com", other_keys)


def test_finalize_assigns_clusters(keys, small_store):
    small_store.finalize(k=2, seed=0)
    assert {r.cluster for r in small_store} <= {0, 1}
    with pytest.raises(StoreStateError):
        small_store.ingest("late insert", keys)


def test_finalize_deterministic(small_store):
    a = small_store.finalize(k=2, seed=5).dumps()
    first = [r.cluster for r in small_store]
    b = small_store.finalize(k=2, seed=5).dumps()
    assert a == b
    assert first == [r.cluster for r in small_store]


def test_finalize_errors(keys, small_store):
    with pytest.raises(StoreStateError):
        SecureStore.create(keys).finalize(k=1)
    with pytest.raises(ValueError):
        small_store.finalize(k=5)


def test_vectors_built_from_redacted_text_only(small_store):
    small_store.finalize(k=2, seed=0)
    assert "a@b.com" not in small_store.vocabulary
    assert not any(PLACEHOLDER_RE.fullmatch(t) for t in small_store.vocabulary.terms())


def test_lookup_sensitive(keys, small_store):
    small_store.finalize(k=2, seed=0)
    assert small_store.lookup_sensitive(EntityKind.EMAIL, "A@B.COM", keys) == [0]
    assert small_store.lookup_sensitive(EntityKind.SSN, "123456789", keys) == [2]
    assert small_store.lookup_sensitive(EntityKind.EMAIL, "nobody@nowhere.org", keys) == []
    assert small_store.lookup_sensitive(EntityKind.URL, "a@b.com", keys) == []


def test_lookup_dedups_and_sorts(keys):
    store = SecureStore.create(keys)
    for text in ["x a@b.com", "nothing", "a@b.com and A@b.com", "a@b.com"]:
        store.ingest(text, keys)
    assert store.lookup_sensitive(EntityKind.EMAIL, "a@b.com", keys) == [0, 2, 3]


def test_lookup_wrong_keys(small_store, other_keys):
    with pytest.raises(AuthorizationError):
        small_store.lookup_sensitive(EntityKind.EMAIL, "a@b.com", other_keys)
    with pytest.raises(AuthorizationError):
        small_store.lookup_sensitive(EntityKind.EMAIL, "a@b.com", None)


def test_lookup_performs_no_decryption(keys, finalized_corpus_store, corpus):
    before = COUNTERS.get("decrypt")
    for doc in corpus[:50]:
        for s in doc.secrets:
            finalized_corpus_store.lookup_sensitive(s.kind, s.value, keys)
    assert COUNTERS.get("decrypt") == before


def test_reveal(keys, other_keys, small_store):
    assert small_store.reveal(2, 0, keys) == "123-45-6789"
    with pytest.raises(AuthorizationError):
        small_store.reveal(2, 0, other_keys)
    with pytest.raises(NotFoundError):
        small_store.reveal(2, 1, keys)
    with pytest.raises(NotFoundError):
        small_store.reveal(99, 0, keys)


def test_reveal_detects_tampering(keys, small_store):
    entry = small_store.records[0].entities[0]
    body = bytearray(entry.ciphertext.body)
    body[0] ^= 1
    tampered = Ciphertext(entry.ciphertext.nonce, bytes(body), entry.ciphertext.auth_tag)
    small_store.records[0].entities[0] = type(entry)(entry.kind, entry.ordinal, tampered, entry.index)
    with pytest.raises(AuthenticationError):
        small_store.reveal(0, 0, keys)


def test_swapped_ciphertext_rejected(keys):
    store = SecureStore.create(keys)
    store.ingest("a@b.com", keys)
    store.ingest("c@d.com", keys)
    e0, e1 = store.records[0].entities[0], store.records[1].entities[0]
    store.records[0].entities[0] = type(e0)(e0.kind, 0, e1.ciphertext, e0.index)
    with pytest.raises(AuthenticationError):
        store.reveal(0, 0, keys)


def test_end_to_end_roundtrip(keys, finalized_corpus_store, corpus):
    for doc_id, doc in enumerate(corpus):
        rec = finalized_corpus_store.record(doc_id)
        assert len(PLACEHOLDER_RE.findall(rec.redacted_text)) == len(rec.entities)
        revealed = [finalized_corpus_store.reveal(doc_id, e.ordinal, keys) for e in rec.entities]
        assert revealed == [s.value for s in doc.secrets]


def test_leakage_scan(finalized_corpus_store, corpus):
    blob = finalized_corpus_store.serialized_bytes()
    for doc in corpus:
        for s in doc.secrets:
            assert canonicalize(s.value, s.kind).encode() not in blob
            assert s.value.encode() not in blob


def test_save_load_save_identical(tmp_path, keys, finalized_corpus_store):
    finalized_corpus_store.save(tmp_path / "a")
    loaded = SecureStore.load(tmp_path / "a", keys=keys)
    loaded.save(tmp_path / "b")
    for name in (RECORDS_FILE, MANIFEST_FILE):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert loaded.search_nonsensitive("invoice payment", 5) == finalized_corpus_store.search_nonsensitive(
        "invoice payment", 5
    )
    for v in loaded.vectors:
        assert abs(v.norm - sum(w * w for w in v.weights.values()) ** 0.5) <= 1e-9


def test_building_store_roundtrip(tmp_path, keys, small_store):
    small_store.save(tmp_path)
    loaded = SecureStore.load(tmp_path)
    assert not loaded.finalized
    loaded.ingest("more text b@c.org", keys)
    assert loaded.lookup_sensitive(EntityKind.EMAIL, "b@c.org", keys) == [4]


def test_load_rejects_mismatched_keys(tmp_path, small_store, other_keys):
    small_store.save(tmp_path)
    with pytest.raises(AuthorizationError):
        SecureStore.load(tmp_path, keys=other_keys)


def test_load_rejects_other_catalog(tmp_path, small_store):
    small_store.save(tmp_path)
    other = default_catalog().with_pattern(EntityKind.PASSPORT, r"[A-Z]\d{8}")
    with pytest.raises(StoreStateError, match="catalog"):
        SecureStore.load(tmp_path, catalog=other)


def test_load_detects_corruption(tmp_path, small_store):
    small_store.save(tmp_path)
    records = tmp_path / RECORDS_FILE
    records.write_text(records.read_text().splitlines()[0] + "\n")
    with pytest.raises(StoreStateError, match="records"):
        SecureStore.load(tmp_path)
    with pytest.raises(StoreStateError):
        SecureStore.load(tmp_path / "missing")


def test_record_wire_format(keys, small_store):
    small_store.finalize(k=2, seed=0)
    line = small_store.dumps_records().splitlines()[0]
    obj = json.loads(line)
    assert list(obj) == ["id", "text", "ents", "vec", "cl"]
    ent = obj["ents"][0]
    assert list(ent) == ["kind", "ord", "n64", "c64", "t64", "ix"]
    assert len(ent["ix"]) == 64 and ent["ix"] == ent["ix"].lower()
    assert all(k.isdigit() for k in obj["vec"])


def test_manifest_fields(small_store, keys):
    small_store.finalize(k=2, seed=9)
    m = json.loads(small_store.manifest().dumps())
    for field in ("version", "fingerprint", "idf", "k", "seed", "centroids", "vocabulary", "catalog"):
        assert field in m
    assert m["fingerprint"] == keys.fingerprint.hex()
    assert m["k"] == 2 and m["seed"] == 9
    assert len(m["centroids"]) == 2


def test_custom_catalog_store(keys):
    cat = EntityCatalog([(EntityKind.PASSPORT, r"[A-Z]\d{8}")])
    store = SecureStore.create(keys, cat)
    store.ingest("passport X12345678 and a@b.com", keys)
    assert store.records[0].redacted_text == "passport [[PASSPORT#0]] and a@b.com"
