"""Construction of the per-term gene graph and the outer term graph.

The gene graph has one TERM node (index 0), one GENE node per annotated
gene in annotation order, and one WORD node per distinct gene-text token in
first-occurrence order. Term-gene edges weigh 1; gene-word edges carry the
degree-normalized co-occurrence weight c(g,w)/sqrt(d(g)*d(w)). The term
graph links the current term to its gene-cover parents and children with
unit weights. Both adjacencies are symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import GeneRecord, Ontology, Term, retrieve_parents_children

TERM_NODE = "TERM"
GENE_NODE = "GENE"
WORD_NODE = "WORD"

ROLE_CURRENT = "CURRENT"
ROLE_PARENT = "PARENT"
ROLE_CHILD = "CHILD"


@dataclass
class GeneGraph:
    """Inner graph for one term; node 0 is always the TERM node."""

    node_kinds: list[str]
    node_labels: list[str]
    adjacency: np.ndarray

    term_node_index = 0

    @property
    def n_nodes(self) -> int:
        return len(self.node_kinds)

    @property
    def n_genes(self) -> int:
        return self.node_kinds.count(GENE_NODE)

    @property
    def n_words(self) -> int:
        return self.node_kinds.count(WORD_NODE)


@dataclass
class TermGraph:
    """Outer graph over the current term and its selected neighbors."""

    term_ids: list[str]
    roles: list[str]
    adjacency: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.term_ids)


def cooccurrence_weights(gene_texts: Mapping[str, Sequence[str]]) -> dict[tuple[str, str], float]:
    """Degree-normalized co-occurrence weight for every (gene, token) pair.

    With c(g,w) the count of token w in gene g's text, d(g) = sum_w c(g,w)
    and d(w) = sum_g c(g,w), the weight is c(g,w)/sqrt(d(g)*d(w)). Pairs
    with zero count get no entry.
    """
    counts: dict[tuple[str, str], int] = {}
    d_gene: dict[str, int] = {}
    d_word: dict[str, int] = {}
    for gid, text in gene_texts.items():
        d_gene[gid] = len(text)
        for tok in text:
            counts[(gid, tok)] = counts.get((gid, tok), 0) + 1
            d_word[tok] = d_word.get(tok, 0) + 1
    return {
        (gid, tok): c / np.sqrt(d_gene[gid] * d_word[tok])
        for (gid, tok), c in counts.items()
    }


def build_gene_graph(term: Term, genes: Mapping[str, GeneRecord]) -> GeneGraph:
    """Assemble the inner graph for ``term``.

    Node order is [term, genes in annotation order, distinct words in
    first-occurrence order]. Raises ValueError for a term without genes or
    a gene whose text is empty.
    """
    if not term.gene_ids:
        raise ValueError(f"term '{term.id}' has no genes")
    texts: dict[str, Sequence[str]] = {}
    for gid in term.gene_ids:
        text = genes[gid].text
        if not text:
            raise ValueError(f"gene '{gid}' has an empty text")
        texts[gid] = text

    words: list[str] = []
    word_index: dict[str, int] = {}
    for gid in term.gene_ids:
        for tok in texts[gid]:
            if tok not in word_index:
                word_index[tok] = len(words)
                words.append(tok)

    n_genes = len(term.gene_ids)
    n = 1 + n_genes + len(words)
    adj = np.zeros((n, n))
    for i in range(n_genes):
        adj[0, 1 + i] = 1.0
        adj[1 + i, 0] = 1.0
    weights = cooccurrence_weights(texts)
    for gi, gid in enumerate(term.gene_ids):
        for tok in set(texts[gid]):
            w = weights[(gid, tok)]
            wi = 1 + n_genes + word_index[tok]
            adj[1 + gi, wi] = w
            adj[wi, 1 + gi] = w

    return GeneGraph(
        node_kinds=[TERM_NODE] + [GENE_NODE] * n_genes + [WORD_NODE] * len(words),
        node_labels=[term.id] + list(term.gene_ids) + words,
        adjacency=adj,
    )


def select_neighbors(
    o: Ontology,
    term_id: str,
    max_parents: int,
    max_children: int,
    universe=None,
) -> tuple[list[str], list[str]]:
    """Cap the retrieved parent/child sets deterministically: smallest
    gene-set-size difference first, ties by term id."""
    parents, children = retrieve_parents_children(o, term_id, universe=universe)
    base = len(o.gene_set(term_id))

    def capped(ids: set[str], cap: int) -> list[str]:
        ranked = sorted(ids, key=lambda u: (abs(len(o.gene_set(u)) - base), u))
        return ranked[: max(cap, 0)]

    return capped(parents, max_parents), capped(children, max_children)


def build_term_graph(
    o: Ontology,
    term_id: str,
    max_parents: int = 8,
    max_children: int = 8,
    universe=None,
) -> TermGraph:
    """Outer graph: current term first, then capped parents, then capped
    children. Any two included terms related by the gene-cover rule get a
    unit edge (which always links every neighbor to the current term)."""
    if term_id not in o.terms:
        raise KeyError(f"unknown term id '{term_id}'")
    parents, children = select_neighbors(o, term_id, max_parents, max_children, universe=universe)
    ids = [term_id] + parents + [c for c in children if c not in parents]
    roles = (
        [ROLE_CURRENT]
        + [ROLE_PARENT] * len(parents)
        + [ROLE_CHILD] * len([c for c in children if c not in parents])
    )
    sets = [o.gene_set(t) for t in ids]
    n = len(ids)
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if sets[i] <= sets[j] or sets[j] <= sets[i]:
                adj[i, j] = 1.0
                adj[j, i] = 1.0
    return TermGraph(term_ids=ids, roles=roles, adjacency=adj)


# ---------------------------------------------------------------------------
# debug export (edge list + node manifest) for inspection and golden tests
# ---------------------------------------------------------------------------


def export_gene_graph(g: GeneGraph) -> str:
    lines = [f"node {i} {kind} {label}" for i, (kind, label) in enumerate(zip(g.node_kinds, g.node_labels))]
    n = g.n_nodes
    for i in range(n):
        for j in range(i + 1, n):
            if g.adjacency[i, j] != 0.0:
                lines.append(f"edge {i} {j} {g.adjacency[i, j]:.12g}")
    return "\n".join(lines) + "\n"


def export_term_graph(tg: TermGraph) -> str:
    lines = [f"node {i} {role} {tid}" for i, (role, tid) in enumerate(zip(tg.roles, tg.term_ids))]
    n = tg.n_nodes
    for i in range(n):
        for j in range(i + 1, n):
            if tg.adjacency[i, j] != 0.0:
                lines.append(f"edge {i} {j} {tg.adjacency[i, j]:.12g}")
    return "\n".join(lines) + "\n"
