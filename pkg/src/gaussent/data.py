"""Dataset handling: JSONL ingest, triplet construction, and synthetic corpora.

The interchange format is line-delimited JSON with string fields ``premise``,
``hypothesis``, ``label`` (entailment / neutral / contradiction, matched
case-insensitively) and an optional boolean ``bilateral`` marking two-way
entailment pairs. Converting original dataset distributions into this format
is documented in the README rather than implemented here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABELS = ("entailment", "neutral", "contradiction")


@dataclass(frozen=True)
class NLIExample:
    premise: str
    hypothesis: str
    label: str
    bilateral: bool = False

    def __post_init__(self):
        if not self.premise:
            raise ValueError("premise must be non-empty")
        if not self.hypothesis:
            raise ValueError("hypothesis must be non-empty")
        if self.label not in LABELS:
            raise ValueError(f"invalid label: {self.label!r}")


@dataclass(frozen=True)
class Triplet:
    """One training unit: a premise with one entailed and one contradicted hypothesis."""

    premise: str
    entailed: str
    contradicted: str

    def __post_init__(self):
        if not (self.premise and self.entailed and self.contradicted):
            raise ValueError("triplet sentences must be non-empty")


@dataclass
class LoadResult:
    examples: list[NLIExample]
    skipped_unlabeled: int = 0


def load_jsonl(path, *, return_stats: bool = False):
    """Load NLI examples from a JSONL file.

    Lines whose label is "-" (unlabeled) are skipped and counted. A malformed
    line or an unknown label raises ValueError naming the 1-based line number.
    With ``return_stats=True`` the skip count comes back alongside the list.
    """
    path = Path(path)
    examples: list[NLIExample] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc}") from None
            if not isinstance(record, dict):
                raise ValueError(f"{path}: line {lineno} is not a JSON object")
            try:
                premise = record["premise"]
                hypothesis = record["hypothesis"]
                label = record["label"]
            except KeyError as exc:
                raise ValueError(f"{path}: line {lineno} missing field {exc}") from None
            if not isinstance(premise, str) or not isinstance(hypothesis, str) or not isinstance(label, str):
                raise ValueError(f"{path}: line {lineno}: premise/hypothesis/label must be strings")
            label = label.lower()
            if label == "-":
                skipped += 1
                continue
            if label not in LABELS:
                raise ValueError(f"{path}: line {lineno}: unknown label {record['label']!r}")
            bilateral = record.get("bilateral", False)
            if not isinstance(bilateral, bool):
                raise ValueError(f"{path}: line {lineno}: bilateral must be a boolean")
            try:
                examples.append(
                    NLIExample(premise=premise, hypothesis=hypothesis, label=label, bilateral=bilateral)
                )
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if return_stats:
        return LoadResult(examples=examples, skipped_unlabeled=skipped)
    return examples


def write_jsonl(examples, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            record = {"premise": ex.premise, "hypothesis": ex.hypothesis, "label": ex.label}
            if ex.bilateral:
                record["bilateral"] = True
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


@dataclass
class TripletResult:
    triplets: list[Triplet]
    dropped_premises: int = 0


def build_triplets(examples, *, return_stats: bool = False):
    """Pair entailment and contradiction hypotheses under each identical premise.

    Grouping is by exact premise string. Within a group, the k-th entailment
    hypothesis is paired with the k-th contradiction hypothesis in order of
    appearance; leftovers beyond the shorter side are unused. Premises lacking
    one of the two labels yield no triplet and are counted as dropped.
    """
    by_premise: dict[str, tuple[list[str], list[str]]] = {}
    for ex in examples:
        ent, con = by_premise.setdefault(ex.premise, ([], []))
        if ex.label == "entailment":
            ent.append(ex.hypothesis)
        elif ex.label == "contradiction":
            con.append(ex.hypothesis)
    triplets: list[Triplet] = []
    dropped = 0
    for premise, (ent, con) in by_premise.items():
        if not ent or not con:
            dropped += 1
            continue
        for pos, neg in zip(ent, con):
            triplets.append(Triplet(premise=premise, entailed=pos, contradicted=neg))
    if return_stats:
        return TripletResult(triplets=triplets, dropped_premises=dropped)
    return triplets


def combine(*datasets) -> list[NLIExample]:
    """Concatenate datasets in order; duplicates are kept."""
    out: list[NLIExample] = []
    for ds in datasets:
        out.extend(ds)
    return out


@dataclass(frozen=True)
class SyntheticConfig:
    vocab_size: int = 200
    count: int = 1000
    min_length: int = 12
    max_length: int = 24
    max_hypothesis_length: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 20:
            raise ValueError("vocab_size must be >= 20")
        if self.min_length < 3:
            raise ValueError("min_length must be >= 3")
        if self.max_length < self.min_length:
            raise ValueError("max_length must be >= min_length")
        if self.max_hypothesis_length < 2:
            raise ValueError("max_hypothesis_length must be >= 2")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def generate_synthetic(config: SyntheticConfig) -> list[NLIExample]:
    """Desk-scale stand-in corpus with a known entailment structure.

    Each unit contributes two examples sharing one premise. The vocabulary is
    split into two halves and each unit draws its premise from one half,
    chosen at random, so that every token sees training signal under every
    loss variant. The entailed hypothesis is a random strict subsequence of
    the premise (shorter, content-preserving); the contradicted hypothesis is
    a fresh random sequence over the opposite vocabulary half, so it shares no
    tokens with its premise. Both hypotheses follow the same length
    distribution, well below the premise length, which gives every pair a
    clear entailment direction while keeping the two labels indistinguishable
    by length alone. Deterministic for a fixed config.
    """
    rng = np.random.default_rng(config.seed)
    half = config.vocab_size // 2
    width = len(str(config.vocab_size - 1))
    vocab = [f"tok{idx:0{width}d}" for idx in range(config.vocab_size)]
    halves = (vocab[:half], vocab[half:])

    examples: list[NLIExample] = []
    for _ in range(config.count):
        side = int(rng.integers(0, 2))
        own, other = halves[side], halves[1 - side]
        plen = int(rng.integers(config.min_length, config.max_length + 1))
        premise_tokens = [own[i] for i in rng.integers(0, len(own), size=plen)]
        # Strict subsequence: keep a proper subset of positions, in order.
        hyp_cap = min(config.max_hypothesis_length, plen - 1)
        hlen = int(rng.integers(2, hyp_cap + 1)) if hyp_cap > 2 else 2
        keep = np.sort(rng.choice(plen, size=hlen, replace=False))
        entailed_tokens = [premise_tokens[i] for i in keep]
        clen = int(rng.integers(2, hyp_cap + 1)) if hyp_cap > 2 else 2
        contra_tokens = [other[i] for i in rng.integers(0, len(other), size=clen)]
        premise = " ".join(premise_tokens)
        examples.append(NLIExample(premise, " ".join(entailed_tokens), "entailment"))
        examples.append(NLIExample(premise, " ".join(contra_tokens), "contradiction"))
    return examples
