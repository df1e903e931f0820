"""Seeded synthetic e-mail-like corpus with injected sensitive values.

Each document is drawn from one of ten topic vocabularies plus shared filler
words, and carries zero to three sensitive values at known offsets. Topic
words are disjoint across topics, so clusters are recoverable; ``noise``
controls the share of content words borrowed from other topics.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from privshard.entities import EntityKind
from privshard.vectors import analyze

TOPICS: dict[str, tuple[str, ...]] = {
    "gdpr": (
        "gdpr", "compliance", "regulation", "consent", "controller", "processor", "lawful",
        "erasure", "portability", "subject", "supervisory", "authority", "breach", "notification",
        "retention", "minimisation", "purpose", "legitimate", "interest", "assessment",
    ),
    "security": (
        "password", "policy", "rotation", "credential", "phishing", "firewall", "malware",
        "encryption", "vulnerability", "patch", "authentication", "factor", "token", "lockout",
        "audit", "intrusion", "endpoint", "hardening", "privilege", "incident",
    ),
    "billing": (
        "invoice", "payment", "billing", "overdue", "receipt", "refund", "statement", "balance",
        "remittance", "ledger", "charge", "subscription", "renewal", "discount", "tax",
        "creditor", "debit", "installment", "settlement", "dunning",
    ),
    "hr": (
        "employee", "onboarding", "benefits", "payroll", "vacation", "leave", "review",
        "promotion", "recruiting", "candidate", "interview", "offer", "resignation", "handbook",
        "training", "mentor", "headcount", "appraisal", "relocation", "orientation",
    ),
    "legal": (
        "contract", "agreement", "clause", "liability", "indemnity", "litigation", "counsel",
        "arbitration", "jurisdiction", "amendment", "signature", "termination", "warranty",
        "negotiation", "settlement_terms", "plaintiff", "defendant", "deposition", "subpoena",
        "statute",
    ),
    "shipping": (
        "shipment", "delivery", "freight", "warehouse", "carrier", "tracking", "pallet",
        "customs", "container", "dispatch", "courier", "logistics", "inventory", "manifest",
        "consignment", "port", "vessel", "loading", "route", "depot",
    ),
    "marketing": (
        "campaign", "newsletter", "audience", "brand", "launch", "promotion_plan", "engagement",
        "conversion", "webinar", "sponsorship", "advertising", "banner", "segment", "survey",
        "influencer", "slogan", "outreach", "impression", "funnel", "lead",
    ),
    "engineering": (
        "deployment", "pipeline", "repository", "build", "regression", "latency", "database",
        "schema", "migration", "release", "rollback", "kubernetes", "cluster", "outage",
        "monitoring", "dashboard", "refactor", "throughput", "cache", "benchmark",
    ),
    "finance": (
        "forecast", "budget", "quarterly", "earnings", "revenue", "margin", "audit_report",
        "capital", "equity", "dividend", "valuation", "portfolio", "hedge", "liquidity",
        "trading", "derivatives", "variance", "expenditure", "accrual", "treasury",
    ),
    "travel": (
        "flight", "hotel", "itinerary", "booking", "airport", "reservation", "visa", "luggage",
        "conference", "venue", "transfer", "boarding", "departure", "arrival", "layover",
        "taxi", "shuttle", "lodging", "expense", "reimbursement",
    ),
}

FILLER: tuple[str, ...] = (
    "please", "the", "regarding", "team", "thanks", "update", "about", "our", "this", "week",
    "attached", "see", "for", "and", "with", "meeting", "note", "kindly", "review_soon", "today",
)

_FIRST = ("john", "maria", "wei", "amara", "lucas", "priya", "olga", "kenji", "fatima", "diego",
          "sara", "tom", "nina", "omar", "li", "eva")
_LAST = ("smith", "garcia", "chen", "okafor", "silva", "patel", "ivanova", "tanaka", "haddad",
         "lopez", "berg", "kim", "novak", "ali", "wong", "meyer")
_DOMAINS = ("example.com", "corp.example.org", "mail.test", "enron-like.net", "acme.io")
_HOSTS = ("portal.example.com", "docs.acme.io", "intranet.corp.example.org", "files.test")
_PATHS = ("reports", "invoice", "policy", "ticket", "download", "share")

_WRAPS = ("{}", "{}", "{}", "{},", "({})", "{}.", "{};")

INJECTED_KINDS: tuple[EntityKind, ...] = (
    EntityKind.EMAIL,
    EntityKind.PHONE,
    EntityKind.SSN,
    EntityKind.CREDIT_CARD,
    EntityKind.MONEY,
    EntityKind.URL,
)


@dataclass(frozen=True)
class InjectedValue:
    kind: EntityKind
    value: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class SyntheticDoc:
    text: str
    topic: str
    secrets: tuple[InjectedValue, ...]


def sensitive_value(kind: EntityKind, rng: random.Random) -> str:
    if kind is EntityKind.EMAIL:
        user = f"{rng.choice(_FIRST)}.{rng.choice(_LAST)}{rng.randrange(100)}"
        if rng.random() < 0.2:
            user = user.capitalize()
        return f"{user}@{rng.choice(_DOMAINS)}"
    if kind is EntityKind.PHONE:
        return "+1" + "".join(str(rng.randrange(10)) for _ in range(10))
    if kind is EntityKind.SSN:
        return f"{rng.randrange(100, 900):03d}-{rng.randrange(1, 100):02d}-{rng.randrange(1, 10000):04d}"
    if kind is EntityKind.CREDIT_CARD:
        return rng.choice("45") + "".join(str(rng.randrange(10)) for _ in range(15))
    if kind is EntityKind.MONEY:
        # always three or more integer digits and cents
        return f"${rng.randrange(100, 1_000_000):,}.{rng.randrange(100):02d}"
    if kind is EntityKind.URL:
        return f"https://{rng.choice(_HOSTS)}/{rng.choice(_PATHS)}/{rng.randrange(10_000)}"
    raise ValueError(f"no generator for {kind}")


def topic_query(topic: str, rng: random.Random, words: int = 3) -> str:
    return " ".join(rng.sample(TOPICS[topic], words))


def _content_word(topic: str, rng: random.Random, noise: float, topic_names: list[str]) -> str:
    if noise > 0 and rng.random() < noise:
        topic = rng.choice(topic_names)
    return rng.choice(TOPICS[topic])


def gen_doc(rng: random.Random, topic: str | None = None, noise: float = 0.05) -> SyntheticDoc:
    names = list(TOPICS)
    topic = topic if topic is not None else rng.choice(names)
    n_secrets = rng.choice((0, 1, 1, 2, 2, 3))
    words: list[str] = []
    for _ in range(rng.randint(2, 3)):
        sentence = []
        for _ in range(rng.randint(6, 10)):
            if rng.random() < 0.3:
                sentence.append(rng.choice(FILLER))
            else:
                sentence.append(_content_word(topic, rng, noise, names))
        sentence[0] = sentence[0].capitalize()
        sentence[-1] += "."
        words.extend(sentence)

    # positions strictly inside the word list, kept in ascending order
    slots = sorted(rng.sample(range(1, len(words)), n_secrets))
    kinds = [rng.choice(INJECTED_KINDS) for _ in slots]
    tokens: list[tuple[str, EntityKind | None, str | None, int]] = [(w, None, None, 0) for w in words]
    for slot, kind in sorted(zip(slots, kinds), reverse=True):
        value = sensitive_value(kind, rng)
        wrap = rng.choice(_WRAPS)
        tokens.insert(slot, (wrap.format(value), kind, value, wrap.index("{}")))

    parts, secrets, offset = [], [], 0
    for text, kind, value, lead in tokens:
        if kind is not None:
            start = offset + lead
            secrets.append(InjectedValue(kind, value, start, start + len(value)))
        parts.append(text)
        offset += len(text) + 1
    return SyntheticDoc(" ".join(parts), topic, tuple(secrets))


def gen_corpus(n: int, seed: int, noise: float = 0.05) -> list[SyntheticDoc]:
    """``n`` deterministic documents; identical ``(n, seed, noise)`` gives identical output."""
    if n < 1:
        raise ValueError("corpus size must be at least 1")
    rng = random.Random(seed)
    return [gen_doc(rng, noise=noise) for _ in range(n)]


def template_overlap(doc: SyntheticDoc) -> float:
    """Share of the doc's distinct lowercase words that belong to its topic template."""
    template = set(TOPICS[doc.topic]) | set(FILLER)
    terms = set(analyze(doc.text))
    secret_values = {s.value.lower() for s in doc.secrets}
    terms -= secret_values
    return len(terms & template) / len(terms) if terms else 1.0
