"""Experiment orchestration: artifact I/O, manifests, and the run harnesses.

Every command writes its outputs plus a ``manifest.json`` carrying the
config hash, seeds and sha256 checksums of inputs and outputs; no
timestamps, so re-running with an identical manifest reproduces identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DatasetSplit,
    Ontology,
    Vocabulary,
    corpus_statistics,
    parse_ontology_file,
    split_dataset,
    validate_dag,
    write_ontology,
)
from .evaluate import (
    ScoreReport,
    attention_records_to_jsonl,
    cross_domain_matrix,
    evaluate_model,
    export_attention,
    format_matrix_table,
    score_corpus,
)
from .metrics import paired_t_test
from .model import GenerationModel, ModelConfig, PreparedExample, prepare_example
from .synth import SynthesisConfig, measure_overlap, synthesize_corpus
from .train import TrainConfig, train, write_history


class ConfigError(ValueError):
    """Bad experiment configuration (unknown keys, invalid combinations)."""


# The five run settings mirroring the encoder ablation table.
ABLATION_SETTINGS: dict[str, tuple[bool, bool, bool]] = {
    "baseline": (False, False, False),
    "gene": (True, False, False),
    "gene+parent": (True, True, False),
    "gene+child": (True, False, True),
    "full": (True, True, True),
}


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_json(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, seeds: list[int], inputs: list[Path]) -> None:
    outputs = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            outputs[str(p.relative_to(out_dir))] = _sha256_file(p)
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "config_sha256": _sha256_json(config),
        "seeds": seeds,
        "inputs": {str(p): _sha256_file(Path(p)) for p in inputs},
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _strict_keys(payload: dict, allowed: set[str], what: str) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# build-data
# ---------------------------------------------------------------------------


@dataclass
class DataBuildConfig:
    source: str | None = None
    synthesis: dict | None = None
    seed: int = 0
    split_seed: int = 0
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    min_count: int = 3

    @classmethod
    def from_dict(cls, payload: dict) -> "DataBuildConfig":
        _strict_keys(payload, {f.name for f in fields(cls)}, "build-data config")
        cfg = cls(**payload)
        cfg.ratios = tuple(cfg.ratios)
        if (cfg.source is None) == (cfg.synthesis is None):
            raise ConfigError("exactly one of 'source' or 'synthesis' is required")
        if cfg.min_count < 1:
            raise ConfigError("min_count must be >= 1")
        return cfg


def run_build_data(cfg: DataBuildConfig, out_dir: str | Path, log=print) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs: list[Path] = []
    if cfg.source is not None:
        src = Path(cfg.source)
        if not src.exists():
            raise ConfigError(f"corpus file not found: {src}")
        onto = parse_ontology_file(src)
        inputs.append(src)
    else:
        synth_cfg = SynthesisConfig.from_dict(cfg.synthesis or {})
        onto = synthesize_corpus(synth_cfg, seed=cfg.seed)
    cycle = validate_dag(onto)
    if cycle is not None:
        from .data import CorpusError

        raise CorpusError(f"isa edges contain a cycle: {' -> '.join(cycle)}")

    described = onto.described_terms()
    splits = split_dataset(described, ratios=cfg.ratios, seed=cfg.split_seed)
    train_desc = [onto.terms[t].description for t in splits.train]
    vocab_corpus = (
        [g.text for g in onto.genes.values()]
        + [t.name for t in onto.terms.values()]
        + [d for d in train_desc if d]
    )
    vocab = Vocabulary.build(vocab_corpus, min_count=cfg.min_count)

    write_ontology(onto, out_dir / "corpus.txt")
    splits.save(out_dir / "splits.json")
    vocab.save(out_dir / "vocab.txt")
    stats = corpus_statistics(onto)
    stats["vocabulary_size"] = vocab.size
    stats["split_sizes"] = {
        "train": len(splits.train),
        "validation": len(splits.validation),
        "test": len(splits.test),
    }
    if cfg.synthesis is not None:
        stats["description_overlap"] = measure_overlap(onto)
    (out_dir / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    config_payload = {
        "source": cfg.source,
        "synthesis": cfg.synthesis,
        "seed": cfg.seed,
        "split_seed": cfg.split_seed,
        "ratios": list(cfg.ratios),
        "min_count": cfg.min_count,
    }
    write_manifest(out_dir, "build-data", config_payload, [cfg.seed, cfg.split_seed], inputs)
    log(
        f"corpus: {stats['n_terms']} terms, {stats['n_genes']} genes, "
        f"{stats['n_described_terms']} described, mean description length "
        f"{stats['mean_description_length']:.2f}, vocabulary {vocab.size}"
    )
    return stats


# ---------------------------------------------------------------------------
# artifact loading and example preparation
# ---------------------------------------------------------------------------


@dataclass
class DataArtifacts:
    ontology: Ontology
    vocab: Vocabulary
    splits: DatasetSplit
    directory: Path


def load_artifacts(data_dir: str | Path) -> DataArtifacts:
    data_dir = Path(data_dir)
    for name in ("corpus.txt", "vocab.txt", "splits.json"):
        if not (data_dir / name).exists():
            raise ConfigError(f"missing data artifact: {data_dir / name}")
    return DataArtifacts(
        ontology=parse_ontology_file(data_dir / "corpus.txt"),
        vocab=Vocabulary.load(data_dir / "vocab.txt"),
        splits=DatasetSplit.load(data_dir / "splits.json"),
        directory=data_dir,
    )


def prepare_split(
    arts: DataArtifacts,
    term_ids: list[str],
    model_cfg: ModelConfig,
    vocab: Vocabulary | None = None,
    require_target: bool = True,
) -> list[PreparedExample]:
    vocab = vocab or arts.vocab
    return [
        prepare_example(
            arts.ontology,
            tid,
            vocab,
            model_cfg,
            data_seed=arts.splits.seed,
            require_target=require_target,
        )
        for tid in term_ids
    ]


# ---------------------------------------------------------------------------
# train / generate / eval
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    data_dir: str
    seed: int = 0
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        _strict_keys(payload, {f.name for f in fields(cls)}, "run config")
        if "data_dir" not in payload:
            raise ConfigError("run config needs 'data_dir'")
        return cls(**payload)

    def model_config(self) -> ModelConfig:
        try:
            return ModelConfig.from_dict(self.model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        try:
            cfg = TrainConfig.from_dict(self.train)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.seed = self.seed
        return cfg


def run_training(
    run_cfg: RunConfig,
    out_dir: str | Path,
    prepared: tuple[list[PreparedExample], list[PreparedExample]] | None = None,
    log=print,
) -> tuple[GenerationModel, dict]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    arts = load_artifacts(run_cfg.data_dir)
    model_cfg = run_cfg.model_config()
    train_cfg = run_cfg.train_config()
    if prepared is None:
        train_set = prepare_split(arts, arts.splits.train, model_cfg)
        val_set = prepare_split(arts, arts.splits.validation, model_cfg)
    else:
        train_set, val_set = prepared
    model = GenerationModel(model_cfg, arts.vocab, seed=run_cfg.seed)
    result = train(model, train_set, train_cfg, val_data=val_set, log=log if log else None)
    model.save(out_dir)
    write_history(out_dir / "history.jsonl", result.history)
    (out_dir / "train_config.json").write_text(
        json.dumps(train_cfg.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    config_payload = {
        "data_dir": str(run_cfg.data_dir),
        "seed": run_cfg.seed,
        "model": model_cfg.to_dict(),
        "train": train_cfg.to_dict(),
    }
    inputs = [arts.directory / n for n in ("corpus.txt", "vocab.txt", "splits.json")]
    write_manifest(out_dir, "train", config_payload, [run_cfg.seed], inputs)
    summary = {
        "final_step": result.final_step,
        "best_step": result.best_step,
        "best_val_bleu": result.best_val_bleu,
        "steps_to_target": result.steps_to_target,
    }
    return model, summary


def run_generate(
    model_dir: str | Path,
    data_dir: str | Path,
    out_dir: str | Path,
    split: str = "test",
    term_ids: list[str] | None = None,
    strategy: str = "greedy",
    beam_size: int = 4,
    attention_k: int | None = None,
    log=print,
) -> list[dict]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = GenerationModel.load(model_dir)
    arts = load_artifacts(data_dir)
    if term_ids is None:
        if split not in ("train", "validation", "test"):
            raise ConfigError(f"unknown split '{split}'")
        term_ids = getattr(arts.splits, split)
    missing = [t for t in term_ids if t not in arts.ontology.terms]
    if missing:
        raise ConfigError(f"terms not in corpus: {missing[:5]}")
    examples = prepare_split(arts, term_ids, model.cfg, vocab=model.vocab, require_target=False)
    records = []
    attn_lines = []
    for ex in examples:
        result = model.generate(ex, strategy, beam_size=beam_size)
        records.append(
            {"term_id": ex.term_id, "tokens": result.tokens, "score": round(result.score, 8)}
        )
        if attention_k:
            for rec in export_attention(model, ex, k=attention_k, strategy=strategy):
                rec["term_id"] = ex.term_id
                attn_lines.append(rec)
    with open(out_dir / "generated.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if attention_k:
        (out_dir / "attention.jsonl").write_text(attention_records_to_jsonl(attn_lines), encoding="utf-8")
    config_payload = {
        "model_dir": str(model_dir),
        "data_dir": str(data_dir),
        "split": split,
        "term_ids": term_ids,
        "strategy": strategy,
        "beam_size": beam_size,
        "attention_k": attention_k,
    }
    inputs = [Path(model_dir) / "model.ckpt"] + [Path(data_dir) / n for n in ("corpus.txt", "vocab.txt", "splits.json")]
    write_manifest(out_dir, "generate", config_payload, [], inputs)
    log(f"generated {len(records)} descriptions -> {out_dir / 'generated.jsonl'}")
    return records


def _read_token_lines(path: str | Path) -> list[list[str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.split() for line in lines]


def run_eval(
    out_dir: str | Path,
    hyp_file: str | Path | None = None,
    ref_file: str | Path | None = None,
    model_dir: str | Path | None = None,
    data_dir: str | Path | None = None,
    split: str = "test",
    strategy: str = "greedy",
    beam_size: int = 4,
    log=print,
) -> ScoreReport:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs: list[Path] = []
    if hyp_file is not None and ref_file is not None:
        hyps = _read_token_lines(hyp_file)
        refs = _read_token_lines(ref_file)
        if len(hyps) != len(refs):
            raise ConfigError("hypothesis and reference files differ in length")
        report = score_corpus(hyps, refs, metadata={"mode": "files", "split": None})
        inputs = [Path(hyp_file), Path(ref_file)]
        config_payload = {"hyp_file": str(hyp_file), "ref_file": str(ref_file)}
    elif model_dir is not None and data_dir is not None:
        model = GenerationModel.load(model_dir)
        arts = load_artifacts(data_dir)
        if split not in ("train", "validation", "test"):
            raise ConfigError(f"unknown split '{split}'")
        examples = prepare_split(arts, getattr(arts.splits, split), model.cfg, vocab=model.vocab)
        report = evaluate_model(model, examples, strategy, beam_size,
                                metadata={"mode": "model", "split": split})
        inputs = [Path(model_dir) / "model.ckpt", Path(data_dir) / "corpus.txt"]
        config_payload = {"model_dir": str(model_dir), "data_dir": str(data_dir),
                          "split": split, "strategy": strategy, "beam_size": beam_size}
    else:
        raise ConfigError("eval needs either --hyp/--ref files or --model-dir/--data-dir")
    report.save(out_dir / "report.json")
    (out_dir / "report.txt").write_text(
        f"BLEU    {report.bleu:8.3f}\n"
        f"ROUGE-L {report.rouge_l:8.3f}\n"
        f"METEOR  {report.meteor:8.3f}  (variant: exact+stem, no synonym lexicon)\n",
        encoding="utf-8",
    )
    write_manifest(out_dir, "eval", config_payload, [], inputs)
    log(f"BLEU {report.bleu:.3f}  ROUGE-L {report.rouge_l:.3f}  METEOR {report.meteor:.3f}")
    return report


# ---------------------------------------------------------------------------
# ablation harness
# ---------------------------------------------------------------------------


@dataclass
class AblationConfig:
    data_dir: str
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    settings: list[str] = field(default_factory=lambda: list(ABLATION_SETTINGS))
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, payload: dict) -> "AblationConfig":
        _strict_keys(payload, {f.name for f in fields(cls)}, "ablation config")
        if "data_dir" not in payload:
            raise ConfigError("ablation config needs 'data_dir'")
        cfg = cls(**payload)
        if not cfg.seeds:
            raise ConfigError("ablation needs at least one seed")
        bad = [s for s in cfg.settings if s not in ABLATION_SETTINGS]
        if bad:
            raise ConfigError(f"unknown ablation settings {bad}; allowed: {list(ABLATION_SETTINGS)}")
        return cfg


def run_ablation(cfg: AblationConfig, out_dir: str | Path, log=print) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    arts = load_artifacts(cfg.data_dir)
    base_model_cfg = ModelConfig.from_dict(cfg.model)

    results: dict[str, dict] = {}
    for setting in cfg.settings:
        flags = ABLATION_SETTINGS[setting]
        model_cfg = base_model_cfg.with_flags(*flags)
        train_set = prepare_split(arts, arts.splits.train, model_cfg)
        val_set = prepare_split(arts, arts.splits.validation, model_cfg)
        test_set = prepare_split(arts, arts.splits.test, model_cfg)
        per_seed = {"bleu": [], "rouge_l": [], "meteor": []}
        for seed in cfg.seeds:
            run_cfg = RunConfig(
                data_dir=cfg.data_dir, seed=seed, model=model_cfg.to_dict(), train=dict(cfg.train)
            )
            run_dir = out_dir / "runs" / f"{setting.replace('+', '_')}_seed{seed}"
            model, _ = run_training(run_cfg, run_dir, prepared=(train_set, val_set), log=None)
            report = evaluate_model(model, test_set, metadata={"setting": setting, "seed": seed})
            report.save(run_dir / "test_report.json")
            per_seed["bleu"].append(report.bleu)
            per_seed["rouge_l"].append(report.rouge_l)
            per_seed["meteor"].append(report.meteor)
            log(f"{setting} seed {seed}: BLEU {report.bleu:.2f}")
        results[setting] = {
            "flags": {
                "use_gene_graph": flags[0],
                "use_parent_nodes": flags[1],
                "use_child_nodes": flags[2],
            },
            "seeds": list(cfg.seeds),
            **{
                metric: {
                    "values": [round(v, 6) for v in vals],
                    "mean": round(float(np.mean(vals)), 6),
                    "sd": round(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0, 6),
                }
                for metric, vals in per_seed.items()
            },
        }

    t_tests = {}
    pairs = [
        ("full", "baseline"),
        ("full", "gene"),
        ("gene+child", "gene+parent"),
        ("gene", "baseline"),
    ]
    for a, b in pairs:
        if a in results and b in results and len(cfg.seeds) >= 2:
            t, p = paired_t_test(results[a]["bleu"]["values"], results[b]["bleu"]["values"])
            t_tests[f"{a}_vs_{b}"] = {"t": round(t, 6) if np.isfinite(t) else str(t), "p": round(p, 8)}

    payload = {"settings": results, "t_tests": t_tests, "seeds": cfg.seeds}
    (out_dir / "ablation.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "ablation.txt").write_text(format_ablation_table(payload), encoding="utf-8")
    config_payload = {
        "data_dir": str(cfg.data_dir),
        "seeds": cfg.seeds,
        "settings": cfg.settings,
        "model": cfg.model,
        "train": cfg.train,
    }
    inputs = [arts.directory / n for n in ("corpus.txt", "vocab.txt", "splits.json")]
    write_manifest(out_dir, "ablate", config_payload, cfg.seeds, inputs)
    return payload


def format_ablation_table(payload: dict) -> str:
    lines = [f"{'setting':<14}{'BLEU':>16}{'ROUGE-L':>16}{'METEOR':>16}"]
    for setting in ABLATION_SETTINGS:
        if setting not in payload["settings"]:
            continue
        row = payload["settings"][setting]
        cells = "".join(
            f"{row[m]['mean']:>9.2f}±{row[m]['sd']:<6.2f}" for m in ("bleu", "rouge_l", "meteor")
        )
        lines.append(f"{setting:<14}{cells}")
    if payload["t_tests"]:
        lines.append("")
        for name, tt in sorted(payload["t_tests"].items()):
            lines.append(f"t-test {name}: t={tt['t']} p={tt['p']}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# cross-domain harness
# ---------------------------------------------------------------------------


@dataclass
class CrossDomainConfig:
    corpora: dict[str, str] = field(default_factory=dict)
    seed: int = 0
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, payload: dict) -> "CrossDomainConfig":
        _strict_keys(payload, {f.name for f in fields(cls)}, "cross-domain config")
        cfg = cls(**payload)
        if len(cfg.corpora) < 2:
            raise ConfigError("cross-domain needs at least two corpora")
        return cfg


def run_cross_domain(cfg: CrossDomainConfig, out_dir: str | Path, log=print) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_cfg = ModelConfig.from_dict(cfg.model)
    arts = {name: load_artifacts(path) for name, path in cfg.corpora.items()}

    models: dict[str, GenerationModel] = {}
    for name in sorted(arts):
        run_cfg = RunConfig(data_dir=cfg.corpora[name], seed=cfg.seed, model=model_cfg.to_dict(), train=dict(cfg.train))
        run_dir = out_dir / "runs" / name
        model, _ = run_training(run_cfg, run_dir, log=None)
        models[name] = model
        log(f"trained on {name}")

    eval_sets = {}
    for train_on in sorted(arts):
        eval_sets[train_on] = {}
        for eval_on in sorted(arts):
            # out-of-domain tokens are encoded with the training vocabulary (UNK for unseen)
            eval_sets[train_on][eval_on] = prepare_split(
                arts[eval_on], arts[eval_on].splits.test, models[train_on].cfg, vocab=models[train_on].vocab
            )
    matrix = cross_domain_matrix(models, eval_sets)
    (out_dir / "crossdomain.json").write_text(json.dumps(matrix, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "crossdomain.txt").write_text(format_matrix_table(matrix), encoding="utf-8")
    config_payload = {
        "corpora": {k: str(v) for k, v in cfg.corpora.items()},
        "seed": cfg.seed,
        "model": cfg.model,
        "train": cfg.train,
    }
    inputs = [Path(p) / "corpus.txt" for p in cfg.corpora.values()]
    write_manifest(out_dir, "cross-domain", config_payload, [cfg.seed], inputs)
    return matrix


# ---------------------------------------------------------------------------
# selftest (gradient oracles + metric smoke)
# ---------------------------------------------------------------------------


def toy_fixture(d: int = 8, decoder_kind: str = "transformer", flags=(True, True, True), seed: int = 0):
    """A small in-memory corpus plus model/example pair used by the gradient
    oracle; kept here so the CLI selftest and the test suite share it."""
    from .data import parse_ontology

    text = """
TERM t1 NAME alpha kinase
TERM t2 NAME beta kinase
TERM t3 NAME gamma binding
ISA t3 t1
GENE g1 TEXT phosphorylates atp rapidly
GENE g2 TEXT binds atp tightly
GENE g3 TEXT transfers groups
ANNOT t1 g1
ANNOT t1 g2
ANNOT t1 g3
ANNOT t2 g1
ANNOT t2 g2
ANNOT t2 g3
ANNOT t3 g1
DESC t1 catalysis of atp transfer
DESC t2 broad kinase activity
DESC t3 binds atp
"""
    onto = parse_ontology(text)
    corpus = [g.text for g in onto.genes.values()] + [t.name for t in onto.terms.values()]
    corpus += [t.description for t in onto.terms.values() if t.description]
    vocab = Vocabulary.build(corpus, min_count=1)
    cfg = ModelConfig(
        d=d,
        n_heads=2,
        decoder_layers=1,
        decoder_kind=decoder_kind,
        dropout=0.0,
        max_decode_len=8,
        max_parents=2,
        max_children=2,
        max_genes_per_term=4,
        max_gene_text_len=6,
    ).with_flags(*flags)
    model = GenerationModel(cfg, vocab, seed=seed)
    # move off the tiny default embedding scale: near-zero ReLU pre-activations
    # make central differences straddle the kink, which invalidates the oracle
    # at a non-generic point even when the analytic gradient is exact
    model.params["embed.word"].data = model.params["embed.word"].data * 10.0
    ex = prepare_example(onto, "t1", vocab, cfg, data_seed=0)
    return model, ex


def run_selftest(log=print) -> bool:
    """Gradient oracle over both decoder kinds and all ablation settings,
    plus metric sanity; returns True when everything passes."""
    from .autodiff import grad_check
    from .metrics import bleu as bleu_fn
    from .train import sequence_loss
    from .autodiff import RunContext

    ok = True
    for kind in ("transformer", "lstm"):
        for setting, flags in ABLATION_SETTINGS.items():
            model, ex = toy_fixture(decoder_kind=kind, flags=flags)
            ctx = RunContext(training=False)

            def loss_fn():
                return sequence_loss(model, ex, ctx)

            report = grad_check(loss_fn, model.params, step=1e-5, max_entries_per_param=3, seed=7)
            status = "pass" if report.passed else "FAIL"
            log(f"grad_check {kind:<12} {setting:<12} {status} (worst {report.worst_error:.2e} on {report.worst_param})")
            ok = ok and report.passed

    ident = bleu_fn([["a", "b", "c"]], [["a", "b", "c"]])
    ok = ok and abs(ident - 100.0) < 1e-9
    log(f"metric smoke: identical-corpus BLEU = {ident:.1f}")
    return ok
