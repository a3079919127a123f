"""Synthetic ontology corpora for desk-scale experiments.

The generator builds a rooted DAG of terms, gives every term at least one
private gene, and propagates gene sets upward so gene-cover retrieval
recovers exactly the DAG ancestors/descendants. Descriptions are spliced
from (i) the term's own name, (ii) keywords taken verbatim from its private
genes' texts, (iii) the name heads of its nearest children, and (iv) the
name head of its nearest parent, so the information needed to describe a
term is strictly nested across encoder ablation settings.

Token pools are disjoint slices of one generated word list; two corpora
built with different ``syllable_bank`` values share no tokens at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterable

import numpy as np

from .data import GeneRecord, Ontology, Term
from .graphs import select_neighbors

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SynthesisConfig:
    n_terms: int = 200
    n_genes: int = 300
    root_count: int = 8
    extra_parent_prob: float = 0.15
    gene_text_min: int = 4
    gene_text_max: int = 7
    keyword_repeat_prob: float = 0.3
    filler_pool: int = 24
    category_pool: int = 8
    head_pool: int = 30     # name heads shared across terms so every head is trainable
    keyword_pool: int = 40  # gene keywords likewise pooled
    desc_gene_keywords: int = 2
    desc_child_heads: int = 2
    min_overlap: float = 0.45
    syllable_bank: int | None = None

    def validate(self) -> None:
        if self.n_terms < 3:
            raise ValueError("n_terms must be >= 3")
        if self.n_genes < self.n_terms:
            raise ValueError("n_genes must be >= n_terms (every term needs a private gene)")
        if not 1 <= self.gene_text_min <= self.gene_text_max:
            raise ValueError("bad gene text length range")
        if self.root_count < 1 or self.root_count >= self.n_terms:
            raise ValueError("root_count must be in [1, n_terms)")
        if self.head_pool < 2 or self.keyword_pool < 2:
            raise ValueError("head_pool and keyword_pool must be >= 2")
        if self.syllable_bank not in (None, 0, 1):
            raise ValueError("syllable_bank must be None, 0 or 1")

    @classmethod
    def from_dict(cls, payload: dict) -> "SynthesisConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown synthesis config keys: {sorted(unknown)}")
        cfg = cls(**payload)
        cfg.validate()
        return cfg


def _syllables(bank: int | None) -> list[str]:
    all_syl = [c + v for c in _CONSONANTS for v in _VOWELS]
    if bank is None:
        return all_syl
    return [s for i, s in enumerate(all_syl) if i % 2 == bank]


def _word_list(rng: np.random.Generator, count: int, bank: int | None) -> list[str]:
    syl = _syllables(bank)
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        k = int(rng.integers(2, 4))
        w = "".join(syl[int(rng.integers(0, len(syl)))] for _ in range(k))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def synthesize_corpus(cfg: SynthesisConfig, seed: int) -> Ontology:
    """Generate a described ontology; deterministic for a fixed (cfg, seed)."""
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(seed))

    n_conn, n_marker = 3, 2
    pool = _word_list(
        rng,
        n_conn + n_marker + cfg.category_pool + cfg.head_pool + cfg.keyword_pool + cfg.filler_pool,
        cfg.syllable_bank,
    )
    pos = 0

    def take(k: int) -> list[str]:
        nonlocal pos
        out = pool[pos : pos + k]
        pos += k
        return out

    connectives = take(n_conn)
    markers = take(n_marker)  # [no-child marker, no-parent marker]
    categories = take(cfg.category_pool)
    heads = take(cfg.head_pool)
    keywords = take(cfg.keyword_pool)
    fillers = take(cfg.filler_pool)

    term_ids = [f"t{i:04d}" for i in range(cfg.n_terms)]
    gene_ids = [f"g{i:04d}" for i in range(cfg.n_genes)]

    # DAG: the first root_count terms are roots; every later term points to
    # one or two earlier terms, so indices are already topologically ordered.
    dag_parents: dict[str, list[str]] = {tid: [] for tid in term_ids}
    for i in range(cfg.root_count, cfg.n_terms):
        first = int(rng.integers(0, i))
        chosen = [first]
        if rng.random() < cfg.extra_parent_prob and i > 1:
            second = int(rng.integers(0, i))
            if second != first:
                chosen.append(second)
        dag_parents[term_ids[i]] = [term_ids[j] for j in sorted(chosen)]
    isa_edges = [(tid, p) for tid in term_ids for p in dag_parents[tid]]

    # private genes: one per term, extras spread at random
    private: dict[str, list[str]] = {tid: [gene_ids[i]] for i, tid in enumerate(term_ids)}
    for gi in range(cfg.n_terms, cfg.n_genes):
        owner = term_ids[int(rng.integers(0, cfg.n_terms))]
        private[owner].append(gene_ids[gi])

    # gene texts: a unique keyword plus filler
    genes: dict[str, GeneRecord] = {}
    for gi, gid in enumerate(gene_ids):
        length = int(rng.integers(cfg.gene_text_min, cfg.gene_text_max + 1))
        body = [keywords[gi]]
        if rng.random() < cfg.keyword_repeat_prob:
            body.append(keywords[gi])
        while len(body) < length:
            body.append(fillers[int(rng.integers(0, len(fillers)))])
        genes[gid] = GeneRecord(id=gid, text=tuple(body))

    # gene sets propagate upward from DAG children
    dag_children: dict[str, list[str]] = {tid: [] for tid in term_ids}
    for tid, ps in dag_parents.items():
        for p in ps:
            dag_children[p].append(tid)
    gene_sets: dict[str, set[str]] = {}
    for tid in reversed(term_ids):
        s = set(private[tid])
        for c in dag_children[tid]:
            s |= gene_sets[c]
        gene_sets[tid] = s

    names = {
        tid: (categories[int(rng.integers(0, len(categories)))], heads[i])
        for i, tid in enumerate(term_ids)
    }
    head_of = {tid: names[tid][1] for tid in term_ids}

    bare = Ontology(
        terms={
            tid: Term(id=tid, name=names[tid], gene_ids=tuple(sorted(gene_sets[tid])))
            for tid in term_ids
        },
        isa_edges=isa_edges,
        genes=genes,
    )

    c_of, c_with, c_under = connectives
    terms: dict[str, Term] = {}
    for tid in term_ids:
        own_keywords = [keywords[gene_ids.index(g)] for g in sorted(private[tid])[: cfg.desc_gene_keywords]]
        sel_parents, sel_children = select_neighbors(bare, tid, 1, cfg.desc_child_heads)
        child_part = [head_of[c] for c in sel_children] or [markers[0]]
        parent_part = [head_of[sel_parents[0]]] if sel_parents else [markers[1]]
        desc = list(names[tid]) + [c_of] + own_keywords + [c_with] + child_part + [c_under] + parent_part
        terms[tid] = Term(
            id=tid,
            name=names[tid],
            gene_ids=bare.terms[tid].gene_ids,
            description=tuple(desc),
        )

    return Ontology(terms=terms, isa_edges=isa_edges, genes=genes)


def measure_overlap(o: Ontology) -> float:
    """Mean token recall of each description against the term's own gene
    texts plus the names and descriptions of its gene-cover neighbors."""
    recalls = []
    for tid in o.described_terms():
        term = o.terms[tid]
        pool: set[str] = set()
        for gid in term.gene_ids:
            pool.update(o.genes[gid].text)
        from .data import retrieve_parents_children

        parents, children = retrieve_parents_children(o, tid)
        for nid in parents | children:
            pool.update(o.terms[nid].name)
            if o.terms[nid].description:
                pool.update(o.terms[nid].description)
        desc = term.description or ()
        if desc:
            recalls.append(sum(1 for t in desc if t in pool) / len(desc))
    return float(np.mean(recalls)) if recalls else 0.0
