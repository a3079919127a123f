"""The description-generation model: nested graph encoders plus a decoder.

A term is encoded in two stages. The inner gene graph (term node, gene
nodes from a BiLSTM over each gene text, word nodes from the shared
embedding table) goes through one residual graph-convolution round
``v_i + ReLU(sum_j e_ij W v_j)``. The outer term graph over the current
term and its gene-cover neighbors is encoded the same way, each node
initialized with the encoded term-node row of that member's own gene
graph. The two encoded node sets are concatenated row-wise into the
decoder memory. The decoder is a causal multi-head-attention stack with
memory attention and a feed-forward block (or an LSTM cell variant without
the feed-forward block), each sublayer wrapped in dropout, residual and
layer normalization.

Ablation flags thin the memory: with everything off the memory degenerates
to the raw gene embedding sequence, which is the no-graph baseline.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, RunContext, Tensor
from .data import BOS_ID, EOS_ID, Ontology, Term, Vocabulary
from .graphs import ROLE_CURRENT, build_gene_graph, build_term_graph

TRANSFORMER = "transformer"
LSTM = "lstm"


@dataclass
class ModelConfig:
    d: int = 64
    n_heads: int = 4
    decoder_layers: int = 2
    decoder_kind: str = TRANSFORMER
    dropout: float = 0.1
    max_decode_len: int = 32
    use_gene_graph: bool = True
    use_parent_nodes: bool = True
    use_child_nodes: bool = True
    max_parents: int = 8
    max_children: int = 8
    max_genes_per_term: int = 32
    max_gene_text_len: int = 64
    max_name_len: int = 8
    encoder_rounds: int = 1

    def validate(self) -> None:
        if self.d % self.n_heads != 0:
            raise ValueError(f"embedding width {self.d} not divisible by {self.n_heads} heads")
        if self.d % 2 != 0:
            raise ValueError("embedding width must be even (BiLSTM halves)")
        if self.max_decode_len < 1:
            raise ValueError("max_decode_len must be >= 1")
        if self.decoder_kind not in (TRANSFORMER, LSTM):
            raise ValueError(f"unknown decoder kind '{self.decoder_kind}'")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.decoder_layers < 1 or self.encoder_rounds < 1:
            raise ValueError("layer/round counts must be >= 1")
        if min(self.max_genes_per_term, self.max_gene_text_len, self.max_name_len) < 1:
            raise ValueError("gene/text/name caps must be >= 1")
        if min(self.max_parents, self.max_children) < 0:
            raise ValueError("neighbor caps must be >= 0")

    @property
    def uses_term_graph(self) -> bool:
        return self.use_parent_nodes or self.use_child_nodes

    @classmethod
    def paper_scale(cls) -> "ModelConfig":
        # embedding size from the reference setting; depth/heads are ours
        return cls(d=512, n_heads=8, decoder_layers=2)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        cfg = cls(**payload)
        cfg.validate()
        return cfg

    def with_flags(self, use_gene_graph: bool, use_parent_nodes: bool, use_child_nodes: bool) -> "ModelConfig":
        return replace(
            self,
            use_gene_graph=use_gene_graph,
            use_parent_nodes=use_parent_nodes,
            use_child_nodes=use_child_nodes,
        )


def sinusoidal_positions(length: int, d: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    dim = np.arange(d // 2)[None, :]
    angle = pos / np.power(10000.0, 2.0 * dim / d)
    table = np.zeros((length, d))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table


# ---------------------------------------------------------------------------
# example preparation (static per term: graphs, token ids, padding)
# ---------------------------------------------------------------------------


@dataclass
class PreparedGraph:
    term_id: str
    name_ids: np.ndarray
    gene_labels: list[str]
    word_labels: list[str]
    word_ids: np.ndarray
    adjacency: np.ndarray

    @property
    def n_genes(self) -> int:
        return len(self.gene_labels)


@dataclass
class PreparedExample:
    term_id: str
    current: PreparedGraph
    neighbor_graphs: list[PreparedGraph]
    neighbor_roles: list[str]
    term_adjacency: np.ndarray | None
    text_ids: np.ndarray      # (G_total, L) padded gene-text ids, fwd order
    text_ids_rev: np.ndarray  # per-row reversed within true length
    text_mask: np.ndarray     # (G_total, L) 1.0 inside true length
    graph_slices: list[tuple[int, int]]  # gene-row ranges per graph (current first)
    target_ids: np.ndarray | None
    target_tokens: tuple[str, ...] | None


def _stable_rng(seed: int, tag: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))


def _capped_term(term: Term, onto: Ontology, cfg: ModelConfig, data_seed: int) -> tuple[Term, dict]:
    """Apply the gene-count cap (seeded uniform subsample preserving
    annotation order) and the gene-text truncation."""
    gene_ids = term.gene_ids
    if len(gene_ids) > cfg.max_genes_per_term:
        rng = _stable_rng(data_seed, term.id)
        keep = sorted(rng.choice(len(gene_ids), size=cfg.max_genes_per_term, replace=False))
        gene_ids = tuple(gene_ids[i] for i in keep)
    texts = {gid: onto.genes[gid].text[: cfg.max_gene_text_len] for gid in gene_ids}
    capped = Term(id=term.id, name=term.name[: cfg.max_name_len], gene_ids=gene_ids, description=term.description)
    return capped, texts


def _prepare_graph(term: Term, texts: dict, vocab: Vocabulary) -> tuple[PreparedGraph, list[np.ndarray]]:
    from .data import GeneRecord

    records = {gid: GeneRecord(id=gid, text=tuple(t)) for gid, t in texts.items()}
    g = build_gene_graph(term, records)
    n_genes = g.n_genes
    word_labels = g.node_labels[1 + n_genes :]
    prepared = PreparedGraph(
        term_id=term.id,
        name_ids=vocab.encode(term.name),
        gene_labels=g.node_labels[1 : 1 + n_genes],
        word_labels=word_labels,
        word_ids=vocab.encode(word_labels),
        adjacency=g.adjacency,
    )
    text_ids = [vocab.encode(texts[gid]) for gid in term.gene_ids]
    return prepared, text_ids


def prepare_example(
    onto: Ontology,
    term_id: str,
    vocab: Vocabulary,
    cfg: ModelConfig,
    data_seed: int = 0,
    universe=None,
    require_target: bool = True,
) -> PreparedExample:
    term = onto.terms[term_id]
    if not term.gene_ids:
        raise ValueError(f"term '{term_id}' has no genes")
    capped, texts = _capped_term(term, onto, cfg, data_seed)
    current, current_texts = _prepare_graph(capped, texts, vocab)

    neighbor_graphs: list[PreparedGraph] = []
    neighbor_roles: list[str] = []
    term_adjacency = None
    all_texts = list(current_texts)
    slices = []
    start = 0
    slices.append((start, start + len(current_texts)))
    start += len(current_texts)

    if cfg.uses_term_graph:
        tg = build_term_graph(
            onto,
            term_id,
            max_parents=cfg.max_parents if cfg.use_parent_nodes else 0,
            max_children=cfg.max_children if cfg.use_child_nodes else 0,
            universe=universe,
        )
        keep = [0] + [i for i in range(1, tg.n_nodes) if onto.terms[tg.term_ids[i]].gene_ids]
        term_adjacency = tg.adjacency[np.ix_(keep, keep)]
        for i in keep[1:]:
            nid = tg.term_ids[i]
            ncapped, ntexts = _capped_term(onto.terms[nid], onto, cfg, data_seed)
            ngraph, ntext_ids = _prepare_graph(ncapped, ntexts, vocab)
            neighbor_graphs.append(ngraph)
            neighbor_roles.append(tg.roles[i])
            all_texts.extend(ntext_ids)
            slices.append((start, start + len(ntext_ids)))
            start += len(ntext_ids)

    longest = max(len(t) for t in all_texts)
    g_total = len(all_texts)
    text_ids = np.zeros((g_total, longest), dtype=np.int64)
    text_rev = np.zeros((g_total, longest), dtype=np.int64)
    mask = np.zeros((g_total, longest))
    for r, ids in enumerate(all_texts):
        text_ids[r, : len(ids)] = ids
        text_rev[r, : len(ids)] = ids[::-1]
        mask[r, : len(ids)] = 1.0

    target_ids = None
    target_tokens = None
    if term.description:
        target_tokens = term.description
        body = vocab.encode(term.description)[: cfg.max_decode_len - 1]
        target_ids = np.concatenate([body, [EOS_ID]])
    elif require_target:
        raise ValueError(f"term '{term_id}' has no description")

    return PreparedExample(
        term_id=term_id,
        current=current,
        neighbor_graphs=neighbor_graphs,
        neighbor_roles=neighbor_roles,
        term_adjacency=term_adjacency,
        text_ids=text_ids,
        text_ids_rev=text_rev,
        text_mask=mask,
        graph_slices=slices,
        target_ids=target_ids,
        target_tokens=target_tokens,
    )


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------


@dataclass
class GenerationResult:
    token_ids: list[int]             # emitted ids, EOS included when produced
    tokens: list[str]                # surface tokens, specials stripped
    attention: np.ndarray            # (n_emitted, n_memory_rows)
    row_names: list[str]
    score: float                     # length-normalized log-probability


class GenerationModel:
    """All trainable parameters plus the forward ops."""

    def __init__(self, cfg: ModelConfig, vocab: Vocabulary, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.vocab = vocab
        self.params: dict[str, Parameter] = {}
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._build_params()
        self._pos = sinusoidal_positions(cfg.max_decode_len + 1, cfg.d)
        self._masks: dict[int, np.ndarray] = {}

    # -- parameter construction ------------------------------------------

    def _xavier(self, name: str, fan_in: int, fan_out: int) -> None:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        self.params[name] = Parameter(name, self._rng.uniform(-limit, limit, (fan_in, fan_out)), "xavier-uniform")

    def _zeros(self, name: str, shape) -> None:
        self.params[name] = Parameter(name, np.zeros(shape), "zeros")

    def _ones(self, name: str, shape) -> None:
        self.params[name] = Parameter(name, np.ones(shape), "ones")

    def _build_params(self) -> None:
        cfg = self.cfg
        d, v = cfg.d, self.vocab.size
        half = d // 2
        self.params["embed.word"] = Parameter(
            "embed.word", self._rng.normal(0.0, 0.02, (v, d)), "normal(0,0.02)"
        )
        for direction in ("fwd", "bwd"):
            self._xavier(f"bilstm.{direction}.w_x", d, 4 * half)
            self._xavier(f"bilstm.{direction}.w_h", half, 4 * half)
            self._zeros(f"bilstm.{direction}.b", (4 * half,))
        self._xavier("enc.gene.w", d, d)
        self._xavier("enc.term.w", d, d)
        for i in range(cfg.decoder_layers):
            if cfg.decoder_kind == TRANSFORMER:
                for block in ("self", "mem"):
                    for m in ("wq", "wk", "wv", "wo"):
                        self._xavier(f"dec{i}.{block}.{m}", d, d)
                self._xavier(f"dec{i}.ffn.w1", d, 4 * d)
                self._zeros(f"dec{i}.ffn.b1", (4 * d,))
                self._xavier(f"dec{i}.ffn.w2", 4 * d, d)
                self._zeros(f"dec{i}.ffn.b2", (d,))
                norms = ("ln1", "ln2", "ln3")
            else:
                self._xavier(f"dec{i}.cell.w_x", d, 4 * d)
                self._xavier(f"dec{i}.cell.w_h", d, 4 * d)
                self._zeros(f"dec{i}.cell.b", (4 * d,))
                for m in ("wq", "wk", "wv", "wo"):
                    self._xavier(f"dec{i}.mem.{m}", d, d)
                norms = ("ln1", "ln2")
            for ln in norms:
                self._ones(f"dec{i}.{ln}.g", (d,))
                self._zeros(f"dec{i}.{ln}.b", (d,))
        self._xavier("out.w", d, v)
        self._zeros("out.b", (v,))

    def _p(self, name: str) -> Tensor:
        return self.params[name].tensor

    # -- gene text embedding (BiLSTM) --------------------------------------

    def _lstm_pass(self, ids: np.ndarray, mask: np.ndarray, prefix: str) -> Tensor:
        g_total, length = ids.shape
        half = self.cfg.d // 2
        w_x, w_h, b = self._p(f"{prefix}.w_x"), self._p(f"{prefix}.w_h"), self._p(f"{prefix}.b")
        h = Tensor(np.zeros((g_total, half)))
        c = Tensor(np.zeros((g_total, half)))
        word = self._p("embed.word")
        for t in range(length):
            x_t = ad.embedding(word, ids[:, t])
            z = ad.add(ad.add(ad.matmul(x_t, w_x), ad.matmul(h, w_h)), b)
            i = ad.sigmoid(ad.slice_cols(z, 0, half))
            f = ad.sigmoid(ad.slice_cols(z, half, 2 * half))
            g = ad.tanh(ad.slice_cols(z, 2 * half, 3 * half))
            o = ad.sigmoid(ad.slice_cols(z, 3 * half, 4 * half))
            c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
            h_new = ad.mul(o, ad.tanh(c_new))
            m = Tensor(mask[:, t : t + 1])
            m_inv = Tensor(1.0 - mask[:, t : t + 1])
            c = ad.add(ad.mul(c_new, m), ad.mul(c, m_inv))
            h = ad.add(ad.mul(h_new, m), ad.mul(h, m_inv))
        return h

    def embed_gene_texts(self, ex: PreparedExample) -> Tensor:
        """(G_total, d): final forward state ++ final backward state per gene."""
        fwd = self._lstm_pass(ex.text_ids, ex.text_mask, "bilstm.fwd")
        bwd = self._lstm_pass(ex.text_ids_rev, ex.text_mask, "bilstm.bwd")
        return ad.concat([fwd, bwd], axis=1)

    def embed_gene_text(self, token_ids: np.ndarray) -> Tensor:
        """Single gene text -> (1, d); errors on an empty sequence."""
        token_ids = np.asarray(token_ids, dtype=np.int64)
        if token_ids.size == 0:
            raise ValueError("cannot embed an empty gene text")
        ids = token_ids[None, :]
        mask = np.ones_like(ids, dtype=np.float64)
        fwd = self._lstm_pass(ids, mask, "bilstm.fwd")
        bwd = self._lstm_pass(ids[:, ::-1], mask, "bilstm.bwd")
        return ad.concat([fwd, bwd], axis=1)

    # -- graph encoders -----------------------------------------------------

    def _graph_rounds(self, nodes: Tensor, adjacency: np.ndarray, weight: Tensor) -> Tensor:
        a = Tensor(adjacency)
        for _ in range(self.cfg.encoder_rounds):
            nodes = ad.add(nodes, ad.relu(ad.matmul(ad.matmul(a, nodes), weight)))
        return nodes

    def gene_graph_nodes(self, pg: PreparedGraph, gene_rows: Tensor) -> Tensor:
        """Assemble [term; genes; words] initial node embeddings."""
        word = self._p("embed.word")
        parts = [ad.mean_rows(ad.embedding(word, pg.name_ids)), gene_rows]
        if len(pg.word_ids):
            parts.append(ad.embedding(word, pg.word_ids))
        return ad.concat(parts, axis=0)

    def encode_gene_graph(self, pg: PreparedGraph, gene_rows: Tensor) -> Tensor:
        nodes = self.gene_graph_nodes(pg, gene_rows)
        return self._graph_rounds(nodes, pg.adjacency, self._p("enc.gene.w"))

    def encode_term_graph(self, member_rows: Tensor, adjacency: np.ndarray) -> Tensor:
        return self._graph_rounds(member_rows, adjacency, self._p("enc.term.w"))

    # -- memory assembly -----------------------------------------------------

    def build_memory(self, ex: PreparedExample) -> tuple[Tensor, list[str]]:
        cfg = self.cfg
        all_gene_rows = self.embed_gene_texts(ex)
        start, stop = ex.graph_slices[0]
        cur_rows = ad.rows(all_gene_rows, np.arange(start, stop))

        names: list[str] = []
        if cfg.use_gene_graph:
            encoded_current = self.encode_gene_graph(ex.current, cur_rows)
            gene_part = encoded_current
            names.extend([f"term:{ex.current.term_id}"])
            names.extend(f"gene:{g}" for g in ex.current.gene_labels)
            names.extend(f"word:{w}" for w in ex.current.word_labels)
        else:
            encoded_current = None
            gene_part = cur_rows
            names.extend(f"gene:{g}" for g in ex.current.gene_labels)

        if ex.term_adjacency is None:
            return gene_part, names

        member_rows = []
        if cfg.use_gene_graph:
            member_rows.append(ad.rows(encoded_current, np.array([0])))
        else:
            word = self._p("embed.word")
            member_rows.append(ad.mean_rows(ad.embedding(word, ex.current.name_ids)))
        for pg, (s, e) in zip(ex.neighbor_graphs, ex.graph_slices[1:]):
            nrows = ad.rows(all_gene_rows, np.arange(s, e))
            if cfg.use_gene_graph:
                encoded = self.encode_gene_graph(pg, nrows)
                member_rows.append(ad.rows(encoded, np.array([0])))
            else:
                word = self._p("embed.word")
                member_rows.append(ad.mean_rows(ad.embedding(word, pg.name_ids)))
        members = ad.concat(member_rows, axis=0)
        encoded_members = self.encode_term_graph(members, ex.term_adjacency)
        names.append(f"node:{ex.term_id}:{ROLE_CURRENT.lower()}")
        names.extend(
            f"node:{pg.term_id}:{role.lower()}"
            for pg, role in zip(ex.neighbor_graphs, ex.neighbor_roles)
        )
        return ad.concat([gene_part, encoded_members], axis=0), names

    # -- attention and decoding ----------------------------------------------

    def _mha(self, q: Tensor, kv: Tensor, prefix: str, mask: np.ndarray | None = None):
        cfg = self.cfg
        dn = cfg.d // cfg.n_heads
        qp = ad.matmul(q, self._p(f"{prefix}.wq"))
        kp = ad.matmul(kv, self._p(f"{prefix}.wk"))
        vp = ad.matmul(kv, self._p(f"{prefix}.wv"))
        heads = []
        attn_values = []
        for i in range(cfg.n_heads):
            qh = ad.slice_cols(qp, i * dn, (i + 1) * dn)
            kh = ad.slice_cols(kp, i * dn, (i + 1) * dn)
            vh = ad.slice_cols(vp, i * dn, (i + 1) * dn)
            scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), 1.0 / np.sqrt(dn))
            if mask is not None:
                scores = ad.add(scores, Tensor(mask))
            attn = ad.softmax(scores, axis=-1)
            attn_values.append(attn.data)
            heads.append(ad.matmul(attn, vh))
        out = ad.matmul(ad.concat(heads, axis=1), self._p(f"{prefix}.wo"))
        return out, attn_values

    def _causal_mask(self, t: int) -> np.ndarray:
        if t not in self._masks:
            mask = np.triu(np.full((t, t), -1e30), k=1)
            self._masks[t] = mask
        return self._masks[t]

    def _sublayer(self, x: Tensor, sub_out: Tensor, layer: int, ln: str, ctx: RunContext) -> Tensor:
        dropped = ad.dropout(sub_out, self.cfg.dropout, ctx)
        return ad.layer_norm(ad.add(x, dropped), self._p(f"dec{layer}.{ln}.g"), self._p(f"dec{layer}.{ln}.b"))

    def _ffn(self, x: Tensor, layer: int) -> Tensor:
        h = ad.relu(ad.add(ad.matmul(x, self._p(f"dec{layer}.ffn.w1")), self._p(f"dec{layer}.ffn.b1")))
        return ad.add(ad.matmul(h, self._p(f"dec{layer}.ffn.w2")), self._p(f"dec{layer}.ffn.b2"))

    def _embed_inputs(self, input_ids: np.ndarray) -> Tensor:
        t = len(input_ids)
        x = ad.embedding(self._p("embed.word"), input_ids)
        return ad.add(x, Tensor(self._pos[:t]))

    def decode_logits(self, memory: Tensor, input_ids: np.ndarray, ctx: RunContext):
        """Teacher-forced decoder pass over the whole prefix.

        Returns (logits (T, |D|), final-layer memory-attention (T, rows)
        averaged over heads).
        """
        if len(input_ids) > self.cfg.max_decode_len + 1:
            raise ValueError(f"prefix longer than max_decode_len: {len(input_ids)}")
        if self.cfg.decoder_kind == LSTM:
            return self._decode_logits_lstm(memory, input_ids, ctx)
        x = self._embed_inputs(input_ids)
        mask = self._causal_mask(len(input_ids))
        mem_attn = None
        for layer in range(self.cfg.decoder_layers):
            sa, _ = self._mha(x, x, f"dec{layer}.self", mask=mask)
            x = self._sublayer(x, sa, layer, "ln1", ctx)
            ma, attn_values = self._mha(x, memory, f"dec{layer}.mem")
            x = self._sublayer(x, ma, layer, "ln2", ctx)
            ff = self._ffn(x, layer)
            x = self._sublayer(x, ff, layer, "ln3", ctx)
            mem_attn = attn_values
        logits = ad.add(ad.matmul(x, self._p("out.w")), self._p("out.b"))
        return logits, np.mean(mem_attn, axis=0)

    def _lstm_cell(self, layer: int, x: Tensor, state):
        d = self.cfg.d
        h, c = state
        z = ad.add(
            ad.add(ad.matmul(x, self._p(f"dec{layer}.cell.w_x")), ad.matmul(h, self._p(f"dec{layer}.cell.w_h"))),
            self._p(f"dec{layer}.cell.b"),
        )
        i = ad.sigmoid(ad.slice_cols(z, 0, d))
        f = ad.sigmoid(ad.slice_cols(z, d, 2 * d))
        g = ad.tanh(ad.slice_cols(z, 2 * d, 3 * d))
        o = ad.sigmoid(ad.slice_cols(z, 3 * d, 4 * d))
        c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
        h_new = ad.mul(o, ad.tanh(c_new))
        return h_new, c_new

    def _decode_logits_lstm(self, memory: Tensor, input_ids: np.ndarray, ctx: RunContext):
        cfg = self.cfg
        states = [
            (Tensor(np.zeros((1, cfg.d))), Tensor(np.zeros((1, cfg.d))))
            for _ in range(cfg.decoder_layers)
        ]
        outs = []
        attn_rows = []
        word = self._p("embed.word")
        for t in range(len(input_ids)):
            x = ad.add(ad.embedding(word, input_ids[t : t + 1]), Tensor(self._pos[t : t + 1]))
            last_attn = None
            for layer in range(cfg.decoder_layers):
                h, c = self._lstm_cell(layer, x, states[layer])
                states[layer] = (h, c)
                a = self._sublayer(x, h, layer, "ln1", ctx)
                ma, attn_values = self._mha(a, memory, f"dec{layer}.mem")
                x = self._sublayer(a, ma, layer, "ln2", ctx)
                last_attn = attn_values
            outs.append(x)
            attn_rows.append(np.mean([a[0] for a in last_attn], axis=0))
        logits = ad.add(ad.matmul(ad.concat(outs, axis=0), self._p("out.w")), self._p("out.b"))
        return logits, np.array(attn_rows)

    def decode_step(self, memory: Tensor, prefix_ids: np.ndarray, ctx: RunContext | None = None) -> Tensor:
        """Distribution over the vocabulary for the next token after the prefix."""
        ctx = ctx or RunContext(training=False)
        logits, _ = self.decode_logits(memory, prefix_ids, ctx)
        return ad.softmax(ad.rows(logits, np.array([len(prefix_ids) - 1])), axis=-1)

    # -- generation ------------------------------------------------------------

    def generate(self, ex: PreparedExample, strategy: str = "greedy", beam_size: int = 4) -> GenerationResult:
        if strategy not in ("greedy", "beam"):
            raise ValueError(f"unknown generation strategy '{strategy}'")
        k = 1 if strategy == "greedy" else beam_size
        if k < 1:
            raise ValueError("beam size must be >= 1")
        ctx = RunContext(training=False)
        with ad.no_grad():
            memory, row_names = self.build_memory(ex)
            hyps = [([BOS_ID], 0.0, [], False)]
            for _ in range(self.cfg.max_decode_len):
                candidates = []
                for ids, logp, attn, finished in hyps:
                    if finished:
                        candidates.append((ids, logp, attn, finished))
                        continue
                    logits, mem_attn = self.decode_logits(memory, np.array(ids), ctx)
                    row = logits.data[-1]
                    logrow = row - (np.log(np.exp(row - row.max()).sum()) + row.max())
                    order = np.argsort(-logrow, kind="stable")[:k]
                    for tok in order:
                        tok = int(tok)
                        candidates.append(
                            (ids + [tok], logp + float(logrow[tok]), attn + [mem_attn[-1]], tok == EOS_ID)
                        )
                candidates.sort(key=lambda h: (-(h[1] / max(len(h[0]) - 1, 1)), tuple(h[0])))
                hyps = candidates[:k]
                if all(h[3] for h in hyps):
                    break
            best = hyps[0]
        ids, logp, attn, _ = best
        emitted = ids[1:]
        tokens = self.vocab.decode(emitted)
        return GenerationResult(
            token_ids=emitted,
            tokens=tokens,
            attention=np.array(attn) if attn else np.zeros((0, memory.data.shape[0])),
            row_names=row_names,
            score=logp / max(len(emitted), 1),
        )

    # -- persistence -------------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(arrays)
        extra = set(arrays) - set(self.params)
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, p in self.params.items():
            if arrays[name].shape != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for '{name}'")
            p.data = arrays[name].copy()

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        ad.save_arrays(directory / "model.ckpt", self.state_arrays())
        (directory / "model_config.json").write_text(
            json.dumps(self.cfg.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
        self.vocab.save(directory / "vocab.txt")

    @classmethod
    def load(cls, directory: str | Path) -> "GenerationModel":
        directory = Path(directory)
        cfg = ModelConfig.from_dict(json.loads((directory / "model_config.json").read_text(encoding="utf-8")))
        vocab = Vocabulary.load(directory / "vocab.txt")
        model = cls(cfg, vocab, seed=0)
        model.load_state_arrays(ad.load_arrays(directory / "model.ckpt"))
        return model
