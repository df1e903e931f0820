#!/usr/bin/env python3
"""Walk through ingest, finalize and the three query modes on a small synthetic corpus."""

import argparse

from privshard import SecureStore, generate_keys, run_query
from privshard.synth import TOPICS, gen_corpus


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--docs", type=int, default=500)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    keys = generate_keys()
    corpus = gen_corpus(args.docs, seed=args.seed)
    store = SecureStore.create(keys)
    store.ingest_many([d.text for d in corpus], keys)
    manifest = store.finalize(k=args.k, seed=args.seed)
    print(f"{len(store)} documents, {len(store.index)} indexed values, "
          f"k={manifest.k} after {manifest.iterations} iterations")

    sample = next(d for d in corpus if d.secrets)
    doc_id = corpus.index(sample)
    print(f"\noriginal : {sample.text}")
    print(f"stored   : {store.record(doc_id).redacted_text}")

    secret = sample.secrets[0].value
    topic_words = " ".join(TOPICS[sample.topic][:3])
    for text in (secret, topic_words, f"{topic_words} {secret}"):
        result = run_query(text, store, keys, top_n=5)
        print(f"\n{result.mode.value:<7} {text!r}")
        for hit in result:
            print(f"  doc {hit.doc_id:<5} score {hit.score:.4f}  {hit.flags}")


if __name__ == "__main__":
    main()
