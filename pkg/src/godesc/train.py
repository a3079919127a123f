"""Teacher-forced training with Adam, validation selection and resumable state.

One optimizer step processes a batch of prepared examples sequentially,
averages their summed cross-entropy losses, clips the global gradient norm
and applies the Adam update. Shuffling is keyed by (seed, epoch) and dropout
masks by (seed, step), so a trajectory is bit-reproducible and a run resumed
from a state checkpoint continues exactly where the uninterrupted run would
have been.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, RunContext, Tensor
from .data import BOS_ID, PAD_ID
from .model import GenerationModel, PreparedExample


class NumericalError(RuntimeError):
    """Training produced a non-finite quantity."""


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    seed: int = 0
    clip_norm: float = 1.0
    validate_every: int = 1  # epochs between validations; 0 disables
    patience: int = 0        # non-improving validations before stop; 0 disables
    target_loss: float | None = None  # stop once mean train loss dips below
    max_steps: int | None = None

    def validate(self) -> None:
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ValueError("learning_rate and clip_norm must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ValueError("bad Adam moment configuration")
        if self.validate_every < 0 or self.patience < 0:
            raise ValueError("validate_every and patience must be >= 0")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        cfg = cls(**payload)
        cfg.validate()
        return cfg


@dataclass
class TrainState:
    step: int = 0
    epoch: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    best_metric: tuple[float, float] | None = None  # (bleu, -loss)
    best_step: int = -1
    bad_validations: int = 0
    best_params: dict[str, np.ndarray] | None = None


def sequence_loss(model: GenerationModel, ex: PreparedExample, ctx: RunContext) -> Tensor:
    """Summed teacher-forced cross-entropy over the target incl. its EOS."""
    if ex.target_ids is None or len(ex.target_ids) == 0:
        raise ValueError(f"example '{ex.term_id}' has no target description")
    memory, _ = model.build_memory(ex)
    inputs = np.concatenate([[BOS_ID], ex.target_ids[:-1]])
    logits, _ = model.decode_logits(memory, inputs, ctx)
    return ad.cross_entropy(logits, ex.target_ids, ignore_index=PAD_ID)


def adam_step(
    params: dict[str, Parameter],
    grads: dict[str, np.ndarray],
    state: TrainState,
    cfg: TrainConfig,
) -> None:
    """Standard Adam with bias correction; mutates params and state."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for '{name}' at step {t}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1**t)
        v_hat = v / (1.0 - cfg.beta2**t)
        p.data -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
        if not np.all(np.isfinite(p.data)):
            raise NumericalError(f"non-finite parameter '{name}' after step {t}")


def _batch_step(
    model: GenerationModel,
    batch: list[PreparedExample],
    state: TrainState,
    cfg: TrainConfig,
    ctx: RunContext,
) -> float:
    ctx.begin_step(state.step)
    ad.zero_grads(model.params)
    losses = [sequence_loss(model, ex, ctx) for ex in batch]
    total = losses[0]
    for extra in losses[1:]:
        total = ad.add(total, extra)
    mean_loss = ad.scale(total, 1.0 / len(batch))
    value = float(mean_loss.data)
    if not math.isfinite(value):
        raise NumericalError(f"non-finite loss at step {state.step}")
    mean_loss.backward()
    grads = {name: p.grad for name, p in model.params.items() if p.grad is not None}
    grads, _ = ad.clip_gradients(grads, cfg.clip_norm)
    adam_step(model.params, grads, state, cfg)
    return value


@dataclass
class TrainResult:
    history: list[dict]
    final_step: int
    best_step: int
    best_val_bleu: float | None
    steps_to_target: int | None


def _validate(model, val_data, ctx):
    from .metrics import bleu, meteor_em, rouge_l

    losses = []
    hyps = []
    refs = []
    for ex in val_data:
        with ad.no_grad():
            losses.append(float(sequence_loss(model, ex, ctx).data))
        result = model.generate(ex, "greedy")
        hyps.append(result.tokens)
        refs.append(list(ex.target_tokens))
    return (
        float(np.mean(losses)),
        bleu(hyps, refs),
        rouge_l(hyps, refs),
        meteor_em(hyps, refs),
    )


def train(
    model: GenerationModel,
    train_data: list[PreparedExample],
    cfg: TrainConfig,
    val_data: list[PreparedExample] | None = None,
    state: TrainState | None = None,
    history: list[dict] | None = None,
    log=None,
) -> TrainResult:
    """Run the epoch loop; returns history and restores the best parameters
    (by validation BLEU, ties by loss) when validation data is provided."""
    cfg.validate()
    if not train_data:
        raise ValueError("empty training split")
    state = state or TrainState()
    history = history if history is not None else []
    train_ctx = RunContext(training=True, seed=cfg.seed)
    eval_ctx = RunContext(training=False)
    steps_to_target = None

    stop = False
    while state.epoch < cfg.epochs and not stop:
        epoch = state.epoch
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, epoch])))
        order = rng.permutation(len(train_data))
        epoch_losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = [train_data[i] for i in order[lo : lo + cfg.batch_size]]
            value = _batch_step(model, batch, state, cfg, train_ctx)
            epoch_losses.append(value)
            if cfg.target_loss is not None and value < cfg.target_loss and steps_to_target is None:
                steps_to_target = state.step
                stop = True
            if cfg.max_steps is not None and state.step >= cfg.max_steps:
                stop = True
            if stop:
                break
        state.epoch += 1
        mean_epoch = float(np.mean(epoch_losses))
        history.append({"step": state.step, "split": "train", "loss": round(mean_epoch, 10),
                        "bleu": None, "rouge_l": None, "meteor": None})
        if log:
            log(f"epoch {state.epoch} step {state.step} train loss {mean_epoch:.4f}")

        if val_data and cfg.validate_every and (state.epoch % cfg.validate_every == 0 or state.epoch == cfg.epochs):
            vloss, vbleu, vrouge, vmeteor = _validate(model, val_data, eval_ctx)
            history.append({"step": state.step, "split": "validation", "loss": round(vloss, 10),
                            "bleu": round(vbleu, 10), "rouge_l": round(vrouge, 10), "meteor": round(vmeteor, 10)})
            if log:
                log(f"  validation loss {vloss:.4f} bleu {vbleu:.2f}")
            metric = (vbleu, -vloss)
            if state.best_metric is None or metric > state.best_metric:
                state.best_metric = metric
                state.best_step = state.step
                state.bad_validations = 0
                state.best_params = model.state_arrays()
            else:
                state.bad_validations += 1
                if cfg.patience and state.bad_validations >= cfg.patience:
                    stop = True

    if state.best_params is not None:
        model.load_state_arrays(state.best_params)
    return TrainResult(
        history=history,
        final_step=state.step,
        best_step=state.best_step,
        best_val_bleu=state.best_metric[0] if state.best_metric else None,
        steps_to_target=steps_to_target,
    )


# ---------------------------------------------------------------------------
# resumable state persistence
# ---------------------------------------------------------------------------


def save_train_state(path: str | Path, model: GenerationModel, state: TrainState, history: list[dict]) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arrays = {f"param/{k}": v for k, v in model.state_arrays().items()}
    arrays.update({f"adam_m/{k}": v for k, v in state.m.items()})
    arrays.update({f"adam_v/{k}": v for k, v in state.v.items()})
    if state.best_params is not None:
        arrays.update({f"best/{k}": v for k, v in state.best_params.items()})
    ad.save_arrays(path / "state.ckpt", arrays)
    meta = {
        "step": state.step,
        "epoch": state.epoch,
        "best_metric": list(state.best_metric) if state.best_metric else None,
        "best_step": state.best_step,
        "bad_validations": state.bad_validations,
    }
    (path / "state.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    write_history(path / "history.jsonl", history)


def load_train_state(path: str | Path, model: GenerationModel) -> tuple[TrainState, list[dict]]:
    path = Path(path)
    arrays = ad.load_arrays(path / "state.ckpt")
    params = {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("param/")}
    model.load_state_arrays(params)
    meta = json.loads((path / "state.json").read_text(encoding="utf-8"))
    best = {k.split("/", 1)[1]: v.copy() for k, v in arrays.items() if k.startswith("best/")}
    state = TrainState(
        step=meta["step"],
        epoch=meta["epoch"],
        m={k.split("/", 1)[1]: v.copy() for k, v in arrays.items() if k.startswith("adam_m/")},
        v={k.split("/", 1)[1]: v.copy() for k, v in arrays.items() if k.startswith("adam_v/")},
        best_metric=tuple(meta["best_metric"]) if meta["best_metric"] else None,
        best_step=meta["best_step"],
        bad_validations=meta["bad_validations"],
        best_params=best or None,
    )
    history = read_history(path / "history.jsonl")
    return state, history


def write_history(path: str | Path, history: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in history:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_history(path: str | Path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out
