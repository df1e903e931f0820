"""privshard: encrypted, blind-indexed document store with clustered TF-IDF search."""

from privshard.entities import (
    DEFAULT_PATTERNS,
    Detector,
    EntityCatalog,
    EntityKind,
    EntityPattern,
    EntitySpan,
    RegexDetector,
    default_catalog,
    detect,
    spans_from_labels,
)
from privshard.query import QueryMode, QueryPlan, ResultSet, execute, plan_query, run_query
from privshard.store import SecureRecord, SecureStore, StoreManifest
from privshard.vault import (
    Ciphertext,
    KeyBundle,
    blind_index,
    canonicalize,
    decrypt_value,
    encrypt_value,
    generate_keys,
)

__version__ = "0.1.0"
