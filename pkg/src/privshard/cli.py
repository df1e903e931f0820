"""Command-line entry point.

Exit codes: 0 success, 1 the query matched nothing, 2 usage, configuration
or authorization error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from privshard.bench import EXPERIMENTS, BenchConfig, write_csv
from privshard.entities import EntityCatalog, default_catalog
from privshard.errors import PrivshardError
from privshard.query import plan_query, execute
from privshard.store import MANIFEST_FILE, RECORDS_FILE, SecureStore
from privshard.vault import KeyBundle, generate_keys, read_key_file, write_key_file

KEYS_ENV = "PRIVSHARD_KEYS"

EXIT_OK, EXIT_EMPTY, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    pass


@dataclass
class CliConfig:
    key_path: Path | None = None
    store_path: Path | None = None
    manifest_path: Path | None = None
    k: int = 10
    seed: int = 0
    top_n: int = 10
    probe: int = 1
    catalog_path: Path | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise CliError("--k must be at least 1")
        if self.top_n < 1:
            raise CliError("--top must be at least 1")
        if self.probe < 1:
            raise CliError("--probe must be at least 1")
        if self.store_path is not None and self.manifest_path is None:
            self.manifest_path = self.store_path / MANIFEST_FILE

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> CliConfig:
        keys = getattr(args, "keys", None) or os.environ.get(KEYS_ENV) or None
        store = getattr(args, "store", None)
        catalog = getattr(args, "catalog", None)
        return cls(
            key_path=Path(keys) if keys else None,
            store_path=Path(store) if store else None,
            k=getattr(args, "k", 10),
            seed=getattr(args, "seed", 0),
            top_n=getattr(args, "top", 10),
            probe=getattr(args, "probe", 1),
            catalog_path=Path(catalog) if catalog else None,
        )

    def load_keys(self, required: bool = True) -> KeyBundle | None:
        if self.key_path is None:
            if required:
                raise CliError(f"key bundle required: pass --keys or set {KEYS_ENV}")
            return None
        return read_key_file(self.key_path)

    def load_catalog(self) -> EntityCatalog:
        return EntityCatalog.load(self.catalog_path) if self.catalog_path else default_catalog()

    def open_store(self, keys: KeyBundle | None = None) -> SecureStore:
        if not (self.store_path / MANIFEST_FILE).is_file():
            raise CliError(f"{self.store_path} is not a store (no {MANIFEST_FILE})")
        return SecureStore.load(self.store_path, keys=keys, catalog=self.load_catalog())


def _read_documents(path: Path, fmt: str) -> list[str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    if fmt == "lines":
        return [line for line in lines if line.strip()]
    docs = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            docs.append(json.loads(line)["text"])
        except (json.JSONDecodeError, KeyError, TypeError):
            raise CliError(f"{path}:{lineno}: expected a JSON object with a \"text\" field") from None
    return docs


def cmd_keygen(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if not out.parent.is_dir():
        raise CliError(f"directory {out.parent} does not exist")
    keys = generate_keys()
    write_key_file(keys, out, force=args.force)
    print(f"wrote {out} (fingerprint {keys.fingerprint.hex()})")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = CliConfig.from_args(args)
    keys = cfg.load_keys()
    docs = _read_documents(Path(args.input), args.format)
    if not docs:
        raise CliError("no documents in input")
    if (cfg.store_path / MANIFEST_FILE).exists():
        store = cfg.open_store(keys)
    else:
        if (cfg.store_path / RECORDS_FILE).exists():
            raise CliError(f"{cfg.store_path} has records but no manifest; refusing to overwrite")
        store = SecureStore.create(keys, cfg.load_catalog())
    for text in docs:
        doc_id = store.ingest(text, keys)
        print(f"{doc_id}\t{len(store.record(doc_id).entities)}")
    store.save(cfg.store_path)
    print(f"ingested {len(docs)} documents ({len(store)} total)", file=sys.stderr)
    return EXIT_OK


def cmd_finalize(args: argparse.Namespace) -> int:
    cfg = CliConfig.from_args(args)
    store = cfg.open_store()
    if cfg.k > len(store):
        raise CliError(f"--k {cfg.k} exceeds the record count ({len(store)})")
    store.finalize(k=cfg.k, seed=cfg.seed, max_iter=args.max_iter)
    store.save(cfg.store_path)
    m = store.model
    print(f"k={m.k} iterations={m.iterations_run} sse={m.final_sse:.6f}")
    return EXIT_OK


def cmd_query(args: argparse.Namespace) -> int:
    cfg = CliConfig.from_args(args)
    keys = cfg.load_keys(required=False)
    store = cfg.open_store(keys)
    plan = plan_query(args.text, store.catalog)
    if plan.sensitive_terms and keys is None:
        raise CliError(f"query contains sensitive terms; pass --keys or set {KEYS_ENV}")
    result = execute(plan, store, keys, top_n=cfg.top_n, probe=cfg.probe, parallel=args.parallel)
    print(plan.mode.value)
    for hit in result:
        print(f"{hit.doc_id}\t{hit.score:.6f}\t{hit.flags}")
    return EXIT_OK if result.hits else EXIT_EMPTY


def cmd_inspect(args: argparse.Namespace) -> int:
    cfg = CliConfig.from_args(args)
    keys = cfg.load_keys(required=False)
    store = cfg.open_store(keys)
    rec = store.record(args.id)
    print(rec.redacted_text)
    for e in rec.entities:
        line = f"{e.ordinal}\t{e.kind.value}"
        if keys is not None:
            line += "\t" + store.reveal(rec.doc_id, e.ordinal, keys)
        print(line)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        sizes = tuple(int(s) for s in args.sizes.split(",") if s.strip())
        config = BenchConfig(
            sizes=sizes,
            seed=args.seed,
            repetitions=args.reps,
            k=args.k,
            queries=args.queries,
            noise=args.noise,
            memory_budget_mb=args.memory_budget_mb,
            concurrency=args.concurrency,
        )
    except ValueError as exc:
        raise CliError(f"invalid benchmark configuration: {exc}") from None
    rows = EXPERIMENTS[args.experiment](config)
    write_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privshard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="write a fresh 48-byte key file")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true", help="overwrite an existing key file")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("ingest", help="detect, encrypt and store documents")
    p.add_argument("--keys")
    p.add_argument("--store", required=True)
    p.add_argument("--input", required=True, help="one document per line, or JSONL with --format jsonl")
    p.add_argument("--catalog", help="KIND<TAB>regex pattern file replacing the default catalog")
    p.add_argument("--format", choices=("lines", "jsonl"), default="lines")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("finalize", help="vectorize and cluster the store; makes it read-only")
    p.add_argument("--store", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--catalog")
    p.set_defaults(func=cmd_finalize)

    p = sub.add_parser("query", help="exact, ranked or hybrid search")
    p.add_argument("--keys")
    p.add_argument("--store", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--probe", type=int, default=1, help="number of nearest clusters to search")
    p.add_argument("--catalog")
    p.add_argument("--parallel", action="store_true", help="run hybrid paths concurrently")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("inspect", help="show a stored record")
    p.add_argument("--store", required=True)
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--keys")
    p.add_argument("--catalog")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="run a benchmark and write CSV")
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--sizes", required=True, help="comma-separated corpus sizes, ascending")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.05, help="share of off-topic words in the corpus")
    p.add_argument("--memory-budget-mb", type=int, default=2048)
    p.add_argument("--concurrency", type=int, default=1, help="threads for a concurrent lookup pass")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, PrivshardError, ValueError) as exc:
        print(f"privshard {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
