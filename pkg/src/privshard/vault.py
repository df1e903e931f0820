"""Field-level encryption and blind indexing.

Values are encrypted with AES-128-GCM under a fresh 12-byte nonce, so equal
plaintexts never produce equal ciphertexts. Exact-match search goes through a
separate deterministic HMAC-SHA256 digest (the blind index) computed from a
second, independent key over a kind-tagged canonical form of the value.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import random
import re
import stat
import threading
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from privshard.entities import EntityKind
from privshard.errors import AuthenticationError, KeyFileError

ENC_KEY_BYTES = 16
INDEX_KEY_BYTES = 32
NONCE_BYTES = 12
TAG_BYTES = 16
KEY_FILE_BYTES = ENC_KEY_BYTES + INDEX_KEY_BYTES

CIPHER_NAME = "AES-128-GCM"
MAC_NAME = "HMAC-SHA256"

_NON_DIGIT = re.compile(r"\D")


class OpCounter:
    """Thread-safe call counter used to prove which crypto paths ran."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {}

    def incr(self, name: str) -> None:
        with self._lock:
            self._counts[name] = self._counts.get(name, 0) + 1

    def get(self, name: str) -> int:
        with self._lock:
            return self._counts.get(name, 0)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)


COUNTERS = OpCounter()


@dataclass(frozen=True)
class KeyBundle:
    enc_key: bytes = field(repr=False)
    index_key: bytes = field(repr=False)
    fingerprint: bytes = field(init=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.enc_key) != ENC_KEY_BYTES:
            raise KeyFileError(f"encryption key must be {ENC_KEY_BYTES} bytes, got {len(self.enc_key)}")
        if len(self.index_key) != INDEX_KEY_BYTES:
            raise KeyFileError(f"index key must be {INDEX_KEY_BYTES} bytes, got {len(self.index_key)}")
        # AESGCM objects are cheap to reuse and relatively costly to build.
        object.__setattr__(self, "_aead", AESGCM(self.enc_key))
        fp = hashlib.sha256(b"privshard-key-fingerprint\x00" + self.enc_key + self.index_key).digest()[:8]
        object.__setattr__(self, "fingerprint", fp)

    def __repr__(self) -> str:
        return f"KeyBundle(fingerprint={self.fingerprint.hex()})"

    def to_bytes(self) -> bytes:
        return self.enc_key + self.index_key

    @classmethod
    def from_bytes(cls, raw: bytes) -> KeyBundle:
        if len(raw) != KEY_FILE_BYTES:
            raise KeyFileError(f"key material must be {KEY_FILE_BYTES} bytes, got {len(raw)}")
        return cls(raw[:ENC_KEY_BYTES], raw[ENC_KEY_BYTES:])


@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes
    auth_tag: bytes


def generate_keys(seed: int | None = None) -> KeyBundle:
    """Draw a fresh key bundle from the OS CSPRNG.

    ``seed`` exists for reproducible tests only: it switches to a
    non-cryptographic PRNG and must never be used for real data.
    """
    if seed is None:
        raw = os.urandom(KEY_FILE_BYTES)
    else:
        raw = random.Random(seed).randbytes(KEY_FILE_BYTES)
    return KeyBundle.from_bytes(raw)


def write_key_file(keys: KeyBundle, path: str | Path, force: bool = False) -> None:
    path = Path(path)
    flags = os.O_WRONLY | os.O_CREAT | (os.O_TRUNC if force else os.O_EXCL)
    try:
        fd = os.open(path, flags, stat.S_IRUSR | stat.S_IWUSR)
    except FileExistsError:
        raise KeyFileError(f"{path} already exists (use --force to overwrite)") from None
    except OSError as exc:
        raise KeyFileError(f"cannot write key file {path}: {exc.strerror}") from exc
    with os.fdopen(fd, "wb") as fh:
        fh.write(keys.to_bytes())
    os.chmod(path, stat.S_IRUSR | stat.S_IWUSR)


def read_key_file(path: str | Path) -> KeyBundle:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise KeyFileError(f"cannot read key file {path}: {exc.strerror}") from exc
    try:
        return KeyBundle.from_bytes(raw)
    except KeyFileError as exc:
        raise KeyFileError(f"{path}: {exc}") from None


def encrypt_value(plaintext: str, keys: KeyBundle, associated_data: bytes = b"") -> Ciphertext:
    if not plaintext:
        raise ValueError("cannot encrypt an empty value")
    COUNTERS.incr("encrypt")
    nonce = os.urandom(NONCE_BYTES)
    sealed = keys._aead.encrypt(nonce, plaintext.encode("utf-8"), associated_data or None)
    return Ciphertext(nonce, sealed[:-TAG_BYTES], sealed[-TAG_BYTES:])


def decrypt_value(ct: Ciphertext, keys: KeyBundle, associated_data: bytes = b"") -> str:
    COUNTERS.incr("decrypt")
    if len(ct.nonce) != NONCE_BYTES or len(ct.auth_tag) != TAG_BYTES:
        raise AuthenticationError("ciphertext failed authentication")
    try:
        raw = keys._aead.decrypt(ct.nonce, ct.body + ct.auth_tag, associated_data or None)
    except InvalidTag:
        raise AuthenticationError("ciphertext failed authentication") from None
    return raw.decode("utf-8")


def canonicalize(value: str, kind: EntityKind) -> str:
    """Normal form hashed by the blind index, so equal values share one digest."""
    if kind in (EntityKind.EMAIL, EntityKind.URL):
        return value.lower()
    if kind in (EntityKind.PHONE, EntityKind.CREDIT_CARD, EntityKind.SSN):
        return _NON_DIGIT.sub("", value)
    if kind is EntityKind.MONEY:
        return value.replace("$", "").replace(",", "")
    return value


def blind_index(value: str, kind: EntityKind, keys: KeyBundle) -> bytes:
    """32-byte HMAC-SHA256 over ``kind || 0x00 || canonical(value)``."""
    COUNTERS.incr("blind_index")
    msg = kind.value.encode("ascii") + b"\x00" + canonicalize(value, kind).encode("utf-8")
    return hmac.digest(keys.index_key, msg, "sha256")
