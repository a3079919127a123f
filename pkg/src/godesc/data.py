"""Ontology corpora: parsing, validation, vocabularies, splits and retrieval.

Corpus files are line-oriented UTF-8 with whole-line ``#`` comments and five
tagged record kinds::

    TERM <id> NAME <tokens...>
    ISA <child-id> <parent-id>
    GENE <id> TEXT <tokens...>
    ANNOT <term-id> <gene-id>
    DESC <term-id> <tokens...>

Records may reference ids defined later in the file. Tokens are normalized
to lowercase on parse; ids keep their case. ``serialize_ontology`` emits the
same grammar deterministically so parse/serialize round-trips are stable.
"""

from __future__ import annotations

import heapq
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class CorpusError(ValueError):
    """Malformed corpus content (syntax, dangling reference, duplicate id)."""


_TOKEN_SPLIT = re.compile(r"[^a-z0-9']+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace/punctuation, drop punctuation tokens."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class Term:
    id: str
    name: tuple[str, ...]
    gene_ids: tuple[str, ...] = ()
    description: tuple[str, ...] | None = None


@dataclass(frozen=True)
class GeneRecord:
    id: str
    text: tuple[str, ...]


@dataclass
class Ontology:
    terms: dict[str, Term]
    isa_edges: list[tuple[str, str]]
    genes: dict[str, GeneRecord]

    def gene_set(self, term_id: str) -> frozenset[str]:
        return frozenset(self.terms[term_id].gene_ids)

    def described_terms(self) -> list[str]:
        """Trainable terms: described, non-empty description, with genes."""
        return sorted(t.id for t in self.terms.values() if t.description and t.gene_ids)


def equal_up_to_order(a: Ontology, b: Ontology) -> bool:
    return (
        a.terms == b.terms
        and sorted(a.isa_edges) == sorted(b.isa_edges)
        and a.genes == b.genes
    )


# ---------------------------------------------------------------------------
# parsing and serialization
# ---------------------------------------------------------------------------


def _lower_tokens(parts: Sequence[str]) -> tuple[str, ...]:
    return tuple(p.lower() for p in parts)


def parse_ontology(source: str | Iterable[str]) -> Ontology:
    """Parse a corpus stream into an Ontology.

    ``source`` is either the full text or an iterable of lines. Raises
    CorpusError with a line number for syntax problems, and for dangling or
    duplicate TERM/GENE ids after the full stream is read (so definitions
    may appear in any order). Exact duplicate ISA/ANNOT records are
    deduplicated keep-first. Acyclicity is not checked here; run
    ``validate_dag`` on the result.
    """
    lines = source.splitlines() if isinstance(source, str) else list(source)

    names: dict[str, tuple[str, ...]] = {}
    gene_texts: dict[str, tuple[str, ...]] = {}
    descriptions: dict[str, tuple[str, ...]] = {}
    annotations: list[tuple[str, str, int]] = []
    edges: list[tuple[str, str, int]] = []

    def syntax(lineno: int, msg: str):
        return CorpusError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "TERM":
            if len(parts) < 4 or parts[2] != "NAME":
                raise syntax(lineno, "expected 'TERM <id> NAME <tokens...>'")
            tid = parts[1]
            if tid in names:
                raise syntax(lineno, f"duplicate term id '{tid}'")
            names[tid] = _lower_tokens(parts[3:])
        elif tag == "GENE":
            if len(parts) < 4 or parts[2] != "TEXT":
                raise syntax(lineno, "expected 'GENE <id> TEXT <tokens...>'")
            gid = parts[1]
            if gid in gene_texts:
                raise syntax(lineno, f"duplicate gene id '{gid}'")
            gene_texts[gid] = _lower_tokens(parts[3:])
        elif tag == "ISA":
            if len(parts) != 3:
                raise syntax(lineno, "expected 'ISA <child> <parent>'")
            edges.append((parts[1], parts[2], lineno))
        elif tag == "ANNOT":
            if len(parts) != 3:
                raise syntax(lineno, "expected 'ANNOT <term-id> <gene-id>'")
            annotations.append((parts[1], parts[2], lineno))
        elif tag == "DESC":
            if len(parts) < 3:
                raise syntax(lineno, "expected 'DESC <term-id> <tokens...>'")
            tid = parts[1]
            if tid in descriptions:
                raise syntax(lineno, f"duplicate description for term '{tid}'")
            descriptions[tid] = _lower_tokens(parts[2:])
        else:
            raise syntax(lineno, f"unknown record tag '{tag}'")

    for child, parent, lineno in edges:
        for tid in (child, parent):
            if tid not in names:
                raise CorpusError(f"line {lineno}: ISA references undefined term '{tid}'")
    term_genes: dict[str, list[str]] = {tid: [] for tid in names}
    seen_annot: set[tuple[str, str]] = set()
    for tid, gid, lineno in annotations:
        if tid not in names:
            raise CorpusError(f"line {lineno}: ANNOT references undefined term '{tid}'")
        if gid not in gene_texts:
            raise CorpusError(f"line {lineno}: ANNOT references undefined gene '{gid}'")
        if (tid, gid) in seen_annot:
            continue
        seen_annot.add((tid, gid))
        term_genes[tid].append(gid)
    for tid in descriptions:
        if tid not in names:
            raise CorpusError(f"DESC references undefined term '{tid}'")

    seen_edges: set[tuple[str, str]] = set()
    isa_edges: list[tuple[str, str]] = []
    for child, parent, _ in edges:
        if (child, parent) in seen_edges:
            continue
        seen_edges.add((child, parent))
        isa_edges.append((child, parent))

    terms = {
        tid: Term(
            id=tid,
            name=names[tid],
            gene_ids=tuple(term_genes[tid]),
            description=descriptions.get(tid),
        )
        for tid in names
    }
    genes = {gid: GeneRecord(id=gid, text=text) for gid, text in gene_texts.items()}
    return Ontology(terms=terms, isa_edges=isa_edges, genes=genes)


def parse_ontology_file(path: str | Path) -> Ontology:
    return parse_ontology(Path(path).read_text(encoding="utf-8"))


def serialize_ontology(o: Ontology) -> str:
    """Emit the corpus grammar deterministically (sorted ids, stable annotation order)."""
    out: list[str] = []
    for tid in sorted(o.terms):
        out.append(f"TERM {tid} NAME {' '.join(o.terms[tid].name)}")
    for child, parent in sorted(o.isa_edges):
        out.append(f"ISA {child} {parent}")
    for gid in sorted(o.genes):
        out.append(f"GENE {gid} TEXT {' '.join(o.genes[gid].text)}")
    for tid in sorted(o.terms):
        for gid in o.terms[tid].gene_ids:
            out.append(f"ANNOT {tid} {gid}")
    for tid in sorted(o.terms):
        desc = o.terms[tid].description
        if desc:
            out.append(f"DESC {tid} {' '.join(desc)}")
    return "\n".join(out) + "\n"


def write_ontology(o: Ontology, path: str | Path) -> None:
    Path(path).write_text(serialize_ontology(o), encoding="utf-8")


# ---------------------------------------------------------------------------
# DAG validation
# ---------------------------------------------------------------------------


def validate_dag(o: Ontology) -> list[str] | None:
    """Return None when isa_edges are acyclic, else a witness cycle of term ids."""
    succ: dict[str, list[str]] = {tid: [] for tid in o.terms}
    pred: dict[str, list[str]] = {tid: [] for tid in o.terms}
    indeg: dict[str, int] = {tid: 0 for tid in o.terms}
    for child, parent in o.isa_edges:
        succ[child].append(parent)
        pred[parent].append(child)
        indeg[parent] += 1
    queue = sorted(tid for tid, d in indeg.items() if d == 0)
    heapq.heapify(queue)
    processed = 0
    while queue:
        tid = heapq.heappop(queue)
        processed += 1
        for nxt in succ[tid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(queue, nxt)
    if processed == len(o.terms):
        return None

    # every unprocessed node still has an unprocessed predecessor, so walking
    # predecessors must revisit a node; reversing gives the forward-edge cycle
    remaining = {tid for tid, d in indeg.items() if d > 0}
    path: list[str] = []
    pos: dict[str, int] = {}
    node = min(remaining)
    while node not in pos:
        pos[node] = len(path)
        path.append(node)
        node = min(p for p in pred[node] if p in remaining)
    cycle = path[pos[node] :]
    cycle.reverse()
    return cycle


# ---------------------------------------------------------------------------
# gene-cover retrieval
# ---------------------------------------------------------------------------


def retrieve_parents_children(
    o: Ontology, term_id: str, universe: Iterable[str] | None = None
) -> tuple[set[str], set[str]]:
    """Gene-cover retrieval: parents are terms whose gene sets contain this
    term's genes; children are terms whose gene sets are contained by it.

    Terms with an equal gene set appear in both sets. ``universe`` optionally
    restricts candidates (e.g. to a split), the default is every other term;
    only neighbor gene/name information ever reaches the model, so the full
    universe leaks no description text.
    """
    if term_id not in o.terms:
        raise KeyError(f"unknown term id '{term_id}'")
    target = o.gene_set(term_id)
    candidates = o.terms.keys() if universe is None else universe
    parents: set[str] = set()
    children: set[str] = set()
    for uid in candidates:
        if uid == term_id or uid not in o.terms:
            continue
        other = o.gene_set(uid)
        if other >= target:
            parents.add(uid)
        if other <= target:
            children.add(uid)
    return parents, children


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"
RESERVED_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3


@dataclass
class Vocabulary:
    itos: list[str]
    stoi: dict[str, int] = field(repr=False)

    @classmethod
    def build(cls, corpus: Iterable[Sequence[str]], min_count: int = 3) -> "Vocabulary":
        """Keep tokens occurring at least ``min_count`` times, ordered by
        descending frequency then token; rarer tokens encode to UNK."""
        if min_count < 1:
            raise ValueError("min_count must be >= 1")
        counts: Counter[str] = Counter()
        n_seqs = 0
        for seq in corpus:
            n_seqs += 1
            counts.update(seq)
        if n_seqs == 0:
            raise ValueError("cannot build a vocabulary from an empty corpus")
        kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
        itos = list(RESERVED_TOKENS) + kept
        return cls(itos=itos, stoi={t: i for i, t in enumerate(itos)})

    @property
    def size(self) -> int:
        return len(self.itos)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.stoi.get(t, UNK_ID) for t in tokens], dtype=np.int64)

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> list[str]:
        toks = [self.itos[int(i)] for i in ids]
        if strip_special:
            toks = [t for t in toks if t not in (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN)]
        return toks

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        itos = Path(path).read_text(encoding="utf-8").splitlines()
        if itos[: len(RESERVED_TOKENS)] != list(RESERVED_TOKENS):
            raise ValueError(f"vocabulary file missing reserved header: {path}")
        return cls(itos=itos, stoi={t: i for i, t in enumerate(itos)})


def build_vocabulary(corpus: Iterable[Sequence[str]], min_count: int = 3) -> Vocabulary:
    return Vocabulary.build(corpus, min_count=min_count)


# ---------------------------------------------------------------------------
# dataset splits
# ---------------------------------------------------------------------------


@dataclass
class DatasetSplit:
    train: list[str]
    validation: list[str]
    test: list[str]
    seed: int

    def save(self, path: str | Path) -> None:
        payload = {
            "seed": self.seed,
            "train": self.train,
            "validation": self.validation,
            "test": self.test,
        }
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetSplit":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            train=list(payload["train"]),
            validation=list(payload["validation"]),
            test=list(payload["test"]),
            seed=int(payload["seed"]),
        )


def split_dataset(
    described_terms: Sequence[str],
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> DatasetSplit:
    """Deterministic disjoint split: floor sizes for train and validation,
    remainder to test. Input order does not matter (ids are sorted before
    the seeded shuffle)."""
    if len(described_terms) < 3:
        raise ValueError(f"need at least 3 described terms to split, got {len(described_terms)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    ids = sorted(described_terms)
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    n_train = math.floor(n * ratios[0])
    n_val = math.floor(n * ratios[1])
    return DatasetSplit(
        train=shuffled[:n_train],
        validation=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
        seed=seed,
    )


# ---------------------------------------------------------------------------
# corpus statistics (reported by the build-data command)
# ---------------------------------------------------------------------------


def corpus_statistics(o: Ontology) -> dict:
    described = [t for t in o.terms.values() if t.description]
    lengths = [len(t.description) for t in described]
    return {
        "n_terms": len(o.terms),
        "n_genes": len(o.genes),
        "n_isa_edges": len(o.isa_edges),
        "n_described_terms": len(described),
        "mean_description_length": float(np.mean(lengths)) if lengths else 0.0,
    }
