"""Corpus scoring reports, attention export and the cross-domain matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import METEOR_VARIANT, bleu, meteor_sentence, rouge_l_sentence, meteor_em, rouge_l
from .model import GenerationModel, PreparedExample


@dataclass
class ScoreReport:
    bleu: float
    rouge_l: float
    meteor: float
    per_example: list[dict]
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name in ("bleu", "rouge_l", "meteor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} out of range: {v}")

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "rouge_l": self.rouge_l,
            "meteor": self.meteor,
            "meteor_variant": METEOR_VARIANT,
            "per_example": self.per_example,
            "metadata": self.metadata,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def score_corpus(
    hypotheses: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    ids: Sequence[str] | None = None,
    metadata: dict | None = None,
) -> ScoreReport:
    """Corpus-level BLEU plus mean sentence ROUGE-L/METEOR, with per-example
    records (sentence-level scores for every pair, aggregation documented in
    the module metrics)."""
    ids = list(ids) if ids is not None else [str(i) for i in range(len(hypotheses))]
    per_example = [
        {
            "id": ids[i],
            "hypothesis": " ".join(hypotheses[i]),
            "reference": " ".join(references[i]),
            "bleu": round(bleu([hypotheses[i]], [references[i]]), 6),
            "rouge_l": round(100.0 * rouge_l_sentence(hypotheses[i], references[i]), 6),
            "meteor": round(100.0 * meteor_sentence(hypotheses[i], references[i]), 6),
        }
        for i in range(len(hypotheses))
    ]
    report = ScoreReport(
        bleu=bleu(hypotheses, references),
        rouge_l=rouge_l(hypotheses, references),
        meteor=meteor_em(hypotheses, references),
        per_example=per_example,
        metadata=dict(metadata or {}),
    )
    report.validate()
    return report


def evaluate_model(
    model: GenerationModel,
    examples: Sequence[PreparedExample],
    strategy: str = "greedy",
    beam_size: int = 4,
    metadata: dict | None = None,
) -> ScoreReport:
    hyps = []
    refs = []
    ids = []
    for ex in examples:
        result = model.generate(ex, strategy, beam_size=beam_size)
        hyps.append(result.tokens)
        refs.append(list(ex.target_tokens))
        ids.append(ex.term_id)
    return score_corpus(hyps, refs, ids=ids, metadata=metadata)


# ---------------------------------------------------------------------------
# attention export
# ---------------------------------------------------------------------------


def export_attention(model: GenerationModel, ex: PreparedExample, k: int = 2, strategy: str = "greedy") -> list[dict]:
    """Per generated token, the k memory rows with the largest final-layer
    memory-attention weight (head-averaged); ties break toward the lower
    row index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    result = model.generate(ex, strategy)
    records = []
    for step, token_id in enumerate(result.token_ids):
        weights = result.attention[step]
        order = np.argsort(-weights, kind="stable")[:k]
        records.append(
            {
                "step": step,
                "token": model.vocab.itos[token_id],
                "top": [
                    {"row": int(i), "name": result.row_names[int(i)], "weight": float(weights[int(i)])}
                    for i in order
                ],
            }
        )
    return records


def attention_records_to_jsonl(records: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


# ---------------------------------------------------------------------------
# cross-domain matrix
# ---------------------------------------------------------------------------


def cross_domain_matrix(
    models: dict[str, GenerationModel],
    eval_sets: dict[str, dict[str, list[PreparedExample]]],
) -> dict:
    """Evaluate every model on every corpus.

    ``eval_sets[model_name][corpus_name]`` holds the corpus examples
    prepared with that model's vocabulary (unseen tokens map to UNK).
    Returns a nested dict with a ScoreReport per cell plus in-domain deltas
    for the off-diagonal cells.
    """
    names = sorted(models)
    if set(eval_sets) != set(names):
        raise ValueError("eval_sets must cover exactly the model corpora")
    cells: dict[str, dict[str, ScoreReport]] = {}
    for train_on in names:
        cells[train_on] = {}
        for eval_on in sorted(eval_sets[train_on]):
            report = evaluate_model(
                models[train_on],
                eval_sets[train_on][eval_on],
                metadata={"train_on": train_on, "eval_on": eval_on,
                          "in_domain": train_on == eval_on},
            )
            cells[train_on][eval_on] = report
    matrix = {}
    for train_on in names:
        row = {}
        diag = cells[train_on][train_on]
        for eval_on, report in cells[train_on].items():
            entry = report.to_dict()
            entry.pop("per_example")
            if eval_on != train_on:
                entry["out_of_domain"] = True
                entry["delta_vs_in_domain"] = {
                    "bleu": diag.bleu - report.bleu,
                    "rouge_l": diag.rouge_l - report.rouge_l,
                    "meteor": diag.meteor - report.meteor,
                }
            else:
                entry["out_of_domain"] = False
            row[eval_on] = entry
        matrix[train_on] = row
    return matrix


def format_matrix_table(matrix: dict) -> str:
    names = sorted(matrix)
    width = max(12, max(len(n) for n in names) + 2)
    header = "train\\eval".ljust(width) + "".join(n.ljust(width) for n in names)
    lines = [header]
    for train_on in names:
        cells = []
        for eval_on in names:
            entry = matrix[train_on].get(eval_on)
            cells.append(f"{entry['bleu']:.2f}".ljust(width) if entry else "-".ljust(width))
        lines.append(train_on.ljust(width) + "".join(cells))
    return "\n".join(lines) + "\n"
