"""Training loop: summed per-layer cross entropy, inner/inter-layer scheduled
sampling, bottom-up curriculum unlocking, and seeded reproducible batching.

The teacher-forced forward mirrors the inference decoders: layer i consumes
its own (sampled) history and the lower layer's token stream. With the
repeat-input variant on, the lower stream is stretched along the gold
alignment: a cursor over the lower target advances only where the upper
target emits the cursor token, exactly the inference-time consumption
pattern under perfect prediction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .corpus import (
    BOS,
    EOS,
    PAD,
    SemanticFrame,
    TaggedSentence,
    Vocabulary,
    build_layer_targets,
    encode_frame,
)
from .metrics import EvalInstance, corpus_bleu
from .model import HierModel, _step_batch, _view_rows, encode, generate_batch


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite (names epoch and batch)."""


@dataclass
class TrainingSchedule:
    total_epochs: int = 20
    curriculum_span: int = 5
    tf_prob_initial: float = 0.5
    tf_decay: float = 0.9
    batch_size: int = 32
    rng_seed: int = 0
    learning_rate: float = 1e-3
    curriculum: bool = True


def tf_prob(schedule: TrainingSchedule, epoch: int) -> float:
    """Teacher-forcing probability at a 1-based epoch (closed form)."""
    return schedule.tf_prob_initial * schedule.tf_decay ** (epoch - 1)


def trainable_layers(schedule: TrainingSchedule, epoch: int, n_layers: int) -> list[int]:
    """0-based trainable layer set; grows bottom-up every curriculum_span epochs."""
    if not schedule.curriculum:
        return list(range(n_layers))
    top = min(n_layers, 1 + (epoch - 1) // schedule.curriculum_span)
    return list(range(top))


@dataclass
class LossReport:
    epoch: int
    batch: int
    layer_losses: list[float]  # nats per token, one per trainable layer
    total: float
    tf_prob: float
    wall_ms: float


def layer_loss(logits_seq, target_ids: np.ndarray, mask: np.ndarray) -> nk.Tensor:
    """Mean token-level cross entropy (natural log) over unmasked positions.

    ``logits_seq`` is one (B, V) tensor per step; ``target_ids``/``mask`` are
    (B, T). PAD positions carry mask 0 and contribute nothing.
    """
    if len(logits_seq) != target_ids.shape[1]:
        raise nk.ContractError(
            f"layer_loss: {len(logits_seq)} logit steps vs {target_ids.shape[1]} targets"
        )
    count = float(mask.sum())
    if count == 0:
        raise nk.ContractError("layer_loss: empty mask")
    if len(logits_seq) == 1:
        total = nk.cross_entropy_sum(logits_seq[0], target_ids[:, 0], mask[:, 0])
    else:
        # one fused node over all steps: stack to (T*B, V)
        stacked = nk.concat_rows(logits_seq)
        total = nk.cross_entropy_sum(
            stacked, target_ids.T.reshape(-1), mask.T.reshape(-1)
        )
    return nk.scale(total, 1.0 / count)


def sample_inner(y_gold_prev: int, y_model_prev: int, p: float, rng) -> int:
    """Classic teacher forcing on a layer's own history: gold with prob p."""
    return y_gold_prev if rng.random() < p else y_model_prev


def sample_inter(y_gold_lower: int, y_model_lower: int, p: float, rng) -> int:
    """Teacher forcing on the lower layer's stream: label with prob p."""
    return y_gold_lower if rng.random() < p else y_model_lower


# ---------------------------------------------------------------------------
# Dataset preparation
# ---------------------------------------------------------------------------


@dataclass
class PreparedSample:
    enc_ids: list[int]
    multi_hot: np.ndarray
    targets: list[list[int]]        # per layer, EOS-terminated token ids
    lower_pos: list[list[int] | None]  # per layer, positions into the lower target


def repeat_positions(upper: list[int], lower: list[int]) -> list[int]:
    """Gold repeat-input alignment: per upper step, the lower cursor position."""
    pos = []
    c = 0
    for tok in upper:
        pos.append(min(c, len(lower) - 1))
        if c < len(lower) and tok == lower[c]:
            c += 1
    return pos


def prepare_sample(frame: SemanticFrame, ref: TaggedSentence, vocab: Vocabulary,
                   model_config) -> PreparedSample:
    enc_ids, multi_hot = encode_frame(frame, vocab)
    if model_config.hierarchical:
        layer_set = build_layer_targets(ref, model_config.order)
        targets = [[vocab.encode(tok) for tok in layer] + [EOS] for layer in layer_set.layers]
    else:
        targets = [[vocab.encode(tok) for tok in ref.lemmas()] + [EOS]]
    lower_pos: list[list[int] | None] = [None]
    for i in range(1, len(targets)):
        if model_config.repeat_input:
            lower_pos.append(repeat_positions(targets[i], targets[i - 1]))
        else:
            last = len(targets[i - 1]) - 1
            lower_pos.append([min(t, last) for t in range(len(targets[i]))])
    return PreparedSample(enc_ids, multi_hot, targets, lower_pos)


def prepare_pairs(groups, vocab: Vocabulary, model_config) -> list[PreparedSample]:
    """Flatten (frame, references) groups into per-reference training samples."""
    out = []
    for frame, refs in groups:
        for ref in refs:
            out.append(prepare_sample(frame, ref, vocab, model_config))
    return out


def _pad_batch(samples: list[PreparedSample], n_layers: int):
    B = len(samples)
    T_enc = max(len(s.enc_ids) for s in samples)
    enc_ids = np.full((B, T_enc), PAD, dtype=np.intp)
    for b, s in enumerate(samples):
        enc_ids[b, : len(s.enc_ids)] = s.enc_ids
    enc_lens = np.array([len(s.enc_ids) for s in samples], dtype=np.intp)
    multi_hot = np.stack([s.multi_hot for s in samples])

    targets, masks, positions = [], [], []
    for i in range(n_layers):
        T = max(len(s.targets[i]) for s in samples)
        ids = np.full((B, T), PAD, dtype=np.intp)
        mask = np.zeros((B, T), dtype=np.float64)
        for b, s in enumerate(samples):
            n = len(s.targets[i])
            ids[b, :n] = s.targets[i]
            mask[b, :n] = 1.0
        targets.append(ids)
        masks.append(mask)
        if i == 0:
            positions.append(None)
        else:
            pos = np.zeros((B, T), dtype=np.intp)
            for b, s in enumerate(samples):
                n = len(s.lower_pos[i])
                pos[b, :n] = s.lower_pos[i]
                pos[b, n:] = s.lower_pos[i][-1] if n else 0
            positions.append(pos)
    return enc_ids, enc_lens, multi_hot, targets, masks, positions


# ---------------------------------------------------------------------------
# Teacher-forced forward over the trainable layers
# ---------------------------------------------------------------------------


def forward_batch(model: HierModel, batch, layers: list[int], p_inner: float,
                  p_inter: float, inner_rng, inter_rng):
    """Graph forward for one batch; returns (per-layer loss tensors, counts)."""
    enc_ids, enc_lens, multi_hot, targets, masks, positions = batch
    cfg = model.config
    B = enc_ids.shape[0]
    enc = encode(model, enc_ids, enc_lens, multi_hot)

    attn = cfg.attention_kind
    p = model.params
    emb = p["emb"]
    losses = []
    prev_pred: np.ndarray | None = None
    prev_states: list[nk.Tensor] | None = None
    prev_mask: np.ndarray | None = None
    arange_b = np.arange(B)

    for layer in layers:
        tgt = targets[layer]
        msk = masks[layer]
        T = tgt.shape[1]
        h = enc.h_layers[layer]
        gru = model.gru(f"dec.{layer}.gru")
        w_out = p[f"dec.{layer}.out.w"]
        b_out = p[f"dec.{layer}.out.b"]
        own_prev = np.full(B, BOS, dtype=np.intp)
        preds = np.zeros((B, T), dtype=np.intp)
        states = []

        use_attn = attn != "none" and layer > 0 and prev_states is not None
        if use_attn:
            neg_mask = nk.Tensor(np.where(prev_mask > 0, 0.0, -1e30))
            w_att = p[f"dec.{layer}.attn.w"] if attn in ("general", "concat") else None
            if attn == "concat":
                h_dim = cfg.decoder_hidden[layer]
                w_k = _view_rows(w_att, h_dim, w_att.shape[0])
                w_q = _view_rows(w_att, 0, h_dim)
                # key products are step-independent; build them once per layer
                cat_k = nk.concat_lastdim([nk.matmul(s, w_k) for s in prev_states])

        for t in range(T):
            if layer == 0:
                lower_ids = np.full(B, BOS, dtype=np.intp) if cfg.hierarchical else None
            else:
                pos = positions[layer][:, t]
                gold_low = targets[layer - 1][arange_b, pos]
                model_low = prev_pred[arange_b, pos]
                take_gold = inter_rng.random(B) < p_inter
                lower_ids = np.where(take_gold, gold_low, model_low)

            parts = [nk.rows(emb, own_prev)]
            if cfg.hierarchical:
                parts.append(nk.rows(emb, lower_ids))
            if use_attn:
                if attn == "dot":
                    scores = nk.dot_scores(h, prev_states)
                elif attn == "general":
                    scores = nk.dot_scores(nk.matmul(h, w_att), prev_states)
                else:
                    scores = nk.tanh(nk.add(cat_k, nk.matmul(h, w_q)))
                weights = nk.softmax_lastdim(nk.add(scores, neg_mask))
                parts.append(nk.weighted_sum(weights, prev_states))
            x = parts[0] if len(parts) == 1 else nk.concat_lastdim(parts)
            h = nk.gru_cell(x, h, gru)
            states.append(h)
            # sampling needs this step's argmax only; keep it off the graph
            pred_t = np.argmax((h.data @ w_out.data) @ emb.data.T + b_out.data, axis=-1)
            preds[:, t] = pred_t
            take_gold = inner_rng.random(B) < p_inner
            own_prev = np.where(take_gold, tgt[:, t], pred_t)

        # logits and cross entropy for every step in one fused stack
        h_all = states[0] if T == 1 else nk.concat_rows(states)
        logits_all = nk.add(nk.matmul_transposed(nk.matmul(h_all, w_out), emb), b_out)
        ce = nk.cross_entropy_sum(logits_all, tgt.T.reshape(-1), msk.T.reshape(-1))
        losses.append(nk.scale(ce, 1.0 / float(msk.sum())))
        prev_pred, prev_states, prev_mask = preds, states, msk

    return losses


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    reports: list[LossReport]
    tf_trace: list[float]
    dev_bleu_trace: list[float]


def dev_bleu(model: HierModel, dev_groups, vocab: Vocabulary) -> float:
    """Corpus BLEU of greedy generations against each dev group's references."""
    frames = [frame for frame, _ in dev_groups]
    outputs = generate_batch(model, frames, vocab)
    instances = [
        EvalInstance(tuple(out), tuple(tuple(r.lemmas()) for r in refs))
        for out, (_, refs) in zip(outputs, dev_groups)
    ]
    return corpus_bleu(instances)


def train(model: HierModel, samples: list[PreparedSample], schedule: TrainingSchedule,
          *, dev_groups=None, vocab: Vocabulary | None = None,
          log_path=None, checkpoint_prefix=None) -> TrainResult:
    """Run the full schedule over prepared samples, updating the model in place.

    Per epoch: seeded shuffle, teacher-forced forward over the trainable
    layers with scheduled sampling, summed loss, backward, Adam; then decay
    the forcing probability and (when dev data is given) record dev BLEU.
    Checkpoints are written every 5 epochs and at the end when
    ``checkpoint_prefix`` is set.
    """
    if not samples:
        raise nk.ContractError("train: empty corpus")
    seeds = np.random.SeedSequence(schedule.rng_seed).spawn(3)
    shuffle_rng = np.random.default_rng(seeds[0])
    inner_rng = np.random.default_rng(seeds[1])
    inter_rng = np.random.default_rng(seeds[2])

    optimizer = nk.AdamState(learning_rate=schedule.learning_rate)
    reports: list[LossReport] = []
    tf_trace: list[float] = []
    bleu_trace: list[float] = []
    n_layers = model.config.n_layers
    log_file = open(log_path, "a", encoding="utf-8") if log_path else None
    if log_file and log_file.tell() == 0:
        cols = ["epoch", "batch"] + [f"loss_l{i + 1}" for i in range(n_layers)]
        log_file.write("\t".join(cols + ["total", "tf_prob", "wall_ms"]) + "\n")

    try:
        for epoch in range(1, schedule.total_epochs + 1):
            p_tf = tf_prob(schedule, epoch)
            tf_trace.append(p_tf)
            layers = trainable_layers(schedule, epoch, n_layers)
            order = shuffle_rng.permutation(len(samples))
            for batch_idx in range(0, len(order), schedule.batch_size):
                t0 = time.perf_counter()
                chunk = [samples[i] for i in order[batch_idx : batch_idx + schedule.batch_size]]
                batch = _pad_batch(chunk, n_layers)
                losses = forward_batch(model, batch, layers, p_tf, p_tf,
                                       inner_rng, inter_rng)
                total = losses[0]
                for extra in losses[1:]:
                    total = nk.add(total, extra)
                total_val = float(total.data)
                if not np.isfinite(total_val):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, batch {batch_idx // schedule.batch_size}"
                    )
                model.params.zero_grads()
                nk.backward(total)
                nk.adam_step(model.params, optimizer)
                wall_ms = (time.perf_counter() - t0) * 1e3

                per_layer = [float(l.data) for l in losses]
                report = LossReport(epoch, batch_idx // schedule.batch_size,
                                    per_layer, total_val, p_tf, wall_ms)
                reports.append(report)
                if log_file:
                    cells = [str(epoch), str(report.batch)]
                    vals = {layer: v for layer, v in zip(layers, per_layer)}
                    cells += [f"{vals[i]:.6f}" if i in vals else "" for i in range(n_layers)]
                    cells += [f"{total_val:.6f}", f"{p_tf:.10f}", f"{wall_ms:.1f}"]
                    log_file.write("\t".join(cells) + "\n")

            if dev_groups is not None and vocab is not None:
                bleu_trace.append(dev_bleu(model, dev_groups, vocab))
            if checkpoint_prefix and (epoch % 5 == 0 or epoch == schedule.total_epochs):
                from .model import save_model

                save_model(model, checkpoint_prefix)
    finally:
        if log_file:
            log_file.close()

    return TrainResult(reports, tf_trace, bleu_trace)


def split_groups(groups, dev_fraction: float, seed: int):
    """Seeded frame-level train/dev split (multi-reference groups stay intact)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(groups))
    n_dev = max(1, int(round(dev_fraction * len(groups))))
    dev_idx = set(order[:n_dev].tolist())
    train_g = [g for i, g in enumerate(groups) if i not in dev_idx]
    dev_g = [g for i, g in enumerate(groups) if i in dev_idx]
    return train_g, dev_g
