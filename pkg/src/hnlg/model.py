"""Encoder/hierarchical-decoder generation model.

A bidirectional GRU encoder reads the flattened frame tokens, with both
directions' initial states projected from the frame's multi-hot vector. Four
stacked GRU decoder layers each consume their own previous token and the
current token of the layer below (plus an optional attention context over the
lower layer's hidden states) and regenerate a growing subsequence of the
sentence, ordered by POS group. Baseline mode collapses the stack to a single
flat decoder.

Two execution paths share the same forward math: autodiff graph ops from
``numkit`` (training, gradient checks) and raw-array helpers (greedy
generation, evaluation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .corpus import (
    BOS,
    DEFAULT_ORDER,
    EOS,
    PAD,
    GeneratingOrder,
    SemanticFrame,
    TaggedSentence,
    Vocabulary,
    delexicalize,
    encode_frame,
    parse_order,
    relexicalize,
)

ATTENTION_KINDS = ("none", "dot", "general", "concat")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 64
    encoder_hidden: int = 100
    decoder_hidden: tuple[int, ...] = (100, 100, 100, 100)
    attention_kind: str = "none"
    order: GeneratingOrder = field(default_factory=lambda: DEFAULT_ORDER)
    max_decode_len: int = 60
    repeat_input: bool = False

    def __post_init__(self):
        if len(self.decoder_hidden) not in (1, 4):
            raise nk.ContractError("decoder_hidden must have 1 (flat) or 4 (hierarchical) sizes")
        if self.attention_kind not in ATTENTION_KINDS:
            raise nk.ContractError(f"unknown attention kind {self.attention_kind!r}")
        if not self.hierarchical:
            if self.attention_kind != "none":
                raise nk.ContractError("attention requires the hierarchical decoder")
            if self.repeat_input:
                raise nk.ContractError("repeat_input requires the hierarchical decoder")
        if self.attention_kind == "dot":
            for lo, hi in zip(self.decoder_hidden, self.decoder_hidden[1:]):
                if lo != hi:
                    raise nk.ContractError("dot attention needs equal adjacent decoder sizes")

    @property
    def hierarchical(self) -> bool:
        return len(self.decoder_hidden) == 4

    @property
    def n_layers(self) -> int:
        return len(self.decoder_hidden)

    def decoder_input_dim(self, layer: int) -> int:
        dim = self.embed_dim
        if self.hierarchical:
            dim += self.embed_dim
        if self.attention_kind != "none" and layer > 0:
            dim += self.decoder_hidden[layer - 1]
        return dim


@dataclass
class EncoderState:
    """Per-decoder-layer projections of the final BiGRU state, plus the
    per-timestep scan states (diagnostic; the decoders attend lower layers,
    not the encoder)."""

    h_layers: list[nk.Tensor]
    step_states: list[nk.Tensor]


@dataclass
class DecoderStepState:
    layer_index: int
    hidden: nk.Tensor
    logits: nk.Tensor
    token: int


@dataclass
class AttentionContext:
    weights: nk.Tensor
    context: nk.Tensor


@dataclass
class LayerDecode:
    """Result of decoding one layer: emitted tokens (EOS-terminated unless
    truncated), per-step hidden states and logits, and diagnostics."""

    tokens: list[int]
    hidden_states: list[nk.Tensor]
    logits: list[nk.Tensor]
    truncated: bool = False
    lower_unconsumed: bool = False


class HierModel:
    """Model parameters plus the config that shapes them."""

    def __init__(self, config: ModelConfig, params: nk.ParamSet):
        self.config = config
        self.params = params

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "HierModel":
        ps = nk.ParamSet(rng_seed=seed)
        V, E, H = config.vocab_size, config.embed_dim, config.encoder_hidden
        ps.glorot("emb", V, E)
        ps.glorot("enc.init.w", V, H)
        ps.zeros("enc.init.b", H)
        ps.gru("enc.fwd", E, H)
        ps.gru("enc.bwd", E, H)
        for i, h_i in enumerate(config.decoder_hidden):
            ps.glorot(f"enc.proj.{i}.w", 2 * H, h_i)
            ps.zeros(f"enc.proj.{i}.b", h_i)
            ps.gru(f"dec.{i}.gru", config.decoder_input_dim(i), h_i)
            # output layer is tied to the token embeddings: logits =
            # (h @ out.w) @ emb^T + out.b, so emitting a just-seen token only
            # needs the GRU to carry its embedding through
            ps.glorot(f"dec.{i}.out.w", h_i, E)
            ps.zeros(f"dec.{i}.out.b", V)
            if config.attention_kind == "general" and i > 0:
                ps.glorot(f"dec.{i}.attn.w", h_i, config.decoder_hidden[i - 1])
            elif config.attention_kind == "concat" and i > 0:
                ps.glorot(f"dec.{i}.attn.w", h_i + config.decoder_hidden[i - 1], 1)
        return cls(config, ps)

    def gru(self, prefix: str) -> nk.GruParams:
        return self.params.gru_view(prefix)


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------


def _reverse_within_lengths(ids: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    rev = np.full_like(ids, PAD)
    for b, n in enumerate(lengths):
        rev[b, :n] = ids[b, :n][::-1]
    return rev


def _scan_gru(emb: nk.Tensor, ids: np.ndarray, lengths: np.ndarray,
              h0: nk.Tensor, gp: nk.GruParams) -> tuple[nk.Tensor, list[nk.Tensor]]:
    """Masked GRU scan over a padded batch; state freezes past each length."""
    B, T = ids.shape
    h = h0
    states = []
    for t in range(T):
        x = nk.rows(emb, ids[:, t])
        h_new = nk.gru_cell(x, h, gp)
        active = (lengths > t)
        if active.all():
            h = h_new
        else:
            m = nk.Tensor(active.astype(np.float64)[:, None])
            keep = nk.Tensor(1.0 - m.data)
            h = nk.add(nk.mul(h_new, m), nk.mul(h, keep))
        states.append(h)
    return h, states


def encode(model: HierModel, ids: np.ndarray, lengths: np.ndarray,
           multi_hot: np.ndarray) -> EncoderState:
    """BiGRU over the frame token batch; returns per-layer initial states.

    ``ids`` is (B, T) PAD-padded, ``lengths`` (B,), ``multi_hot`` (B, V).
    Both scan directions start from the learned projection of the multi-hot
    vector, keeping the order-independent condition available alongside the
    sequential read.
    """
    ids = np.asarray(ids, dtype=np.intp)
    lengths = np.asarray(lengths, dtype=np.intp)
    if ids.size == 0 or (lengths <= 0).any():
        raise nk.ContractError("encode: empty input sequence")
    p = model.params
    emb = p["emb"]
    h0 = nk.add(nk.matmul(nk.Tensor(multi_hot), p["enc.init.w"]), p["enc.init.b"])
    h_fwd, fwd_states = _scan_gru(emb, ids, lengths, h0, model.gru("enc.fwd"))
    rev = _reverse_within_lengths(ids, lengths)
    h_bwd, bwd_states = _scan_gru(emb, rev, lengths, h0, model.gru("enc.bwd"))
    h_cat = nk.concat_lastdim([h_fwd, h_bwd])
    h_layers = [
        nk.add(nk.matmul(h_cat, p[f"enc.proj.{i}.w"]), p[f"enc.proj.{i}.b"])
        for i in range(model.config.n_layers)
    ]
    steps = [nk.concat_lastdim([f, b]) for f, b in zip(fwd_states, bwd_states[::-1])]
    return EncoderState(h_layers, steps)


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------


def attention(h_cur: nk.Tensor, lower_states, kind: str,
              w: nk.Tensor | None = None) -> AttentionContext:
    """Score the query against each lower-layer state and mix them.

    ``dot``: h . s_j; ``general``: h W s_j; ``concat``: tanh(W [h; s_j]) with
    W mapping the concatenation to a scalar. Scores are softmax-normalized and
    the context is the weighted sum of the lower states.
    """
    lower_states = list(lower_states)
    if not lower_states:
        raise nk.DimensionError("attention: no lower states")
    if kind == "dot":
        if lower_states[0].shape[-1] != h_cur.shape[-1]:
            raise nk.DimensionError(
                f"dot attention: query dim {h_cur.shape[-1]} vs "
                f"state dim {lower_states[0].shape[-1]}"
            )
        scores = nk.dot_scores(h_cur, lower_states)
    elif kind == "general":
        scores = nk.dot_scores(nk.matmul(h_cur, w), lower_states)
    elif kind == "concat":
        # W maps [h; s_j] to a scalar; split into the query and key halves so
        # the per-state products stay (B, 1) columns
        h_dim = h_cur.shape[-1]
        q_part = nk.matmul(h_cur, _view_rows(w, 0, h_dim))
        w_k = _view_rows(w, h_dim, w.shape[0])
        k_parts = [nk.matmul(s, w_k) for s in lower_states]
        scores = nk.tanh(nk.add(nk.concat_lastdim(k_parts), q_part))
    else:
        raise nk.ContractError(f"unknown attention kind {kind!r}")
    weights = nk.softmax_lastdim(scores)
    return AttentionContext(weights, nk.weighted_sum(weights, lower_states))


def _view_rows(t: nk.Tensor, start: int, stop: int) -> nk.Tensor:
    """Differentiable row slice of a 2-D tensor."""
    out = nk.Tensor(t.data[start:stop], (t,))

    def bw(g):
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad[start:stop] += g

    out._backward = bw
    return out


def _layer_attention(model: HierModel, layer: int, h_prev: nk.Tensor,
                     lower_states) -> AttentionContext | None:
    kind = model.config.attention_kind
    if kind == "none" or layer == 0 or not lower_states:
        return None
    w = model.params[f"dec.{layer}.attn.w"] if kind in ("general", "concat") else None
    return attention(h_prev, lower_states, kind, w)


# ---------------------------------------------------------------------------
# Decoder
# ---------------------------------------------------------------------------


def decoder_step(model: HierModel, layer: int, y_own_prev: int,
                 y_lower_cur: int | None, h_prev: nk.Tensor,
                 attn: AttentionContext | None = None) -> DecoderStepState:
    """One step of one decoder layer (batch of 1).

    Input is the concatenation of the own-history embedding, the lower-layer
    token embedding (hierarchical mode), and the attention context when given.
    The emitted token is the argmax over logits; numpy's argmax breaks ties
    toward the lowest id.
    """
    h, logits = _step_batch(
        model, layer,
        np.array([y_own_prev], dtype=np.intp),
        None if y_lower_cur is None else np.array([y_lower_cur], dtype=np.intp),
        h_prev, attn.context if attn else None,
    )
    return DecoderStepState(layer, h, logits, int(np.argmax(logits.data[0])))


def _step_batch(model: HierModel, layer: int, own_ids: np.ndarray,
                lower_ids: np.ndarray | None, h_prev: nk.Tensor,
                ctx: nk.Tensor | None) -> tuple[nk.Tensor, nk.Tensor]:
    p = model.params
    parts = [nk.rows(p["emb"], own_ids)]
    if model.config.hierarchical:
        parts.append(nk.rows(p["emb"], lower_ids))
    if ctx is not None:
        parts.append(ctx)
    x = parts[0] if len(parts) == 1 else nk.concat_lastdim(parts)
    h = nk.gru_cell(x, h_prev, model.gru(f"dec.{layer}.gru"))
    logits = nk.add(
        nk.matmul_transposed(nk.matmul(h, p[f"dec.{layer}.out.w"]), p["emb"]),
        p[f"dec.{layer}.out.b"],
    )
    return h, logits


def decode_layer(model: HierModel, layer: int, lower_tokens: list[int] | None,
                 enc: EncoderState, repeat_input: bool,
                 forced_targets: list[int] | None = None,
                 lower_states=None, lower_model_tokens: list[int] | None = None,
                 inner_choose=None, inter_choose=None) -> LayerDecode:
    """Run one decoder layer over a single sample.

    Without ``forced_targets``: greedy generation until EOS or max_decode_len.
    With repeat_input on, a cursor over ``lower_tokens`` advances only when
    the emitted token matches the token under the cursor; otherwise the lower
    stream advances every step, EOS-padded once exhausted.

    With ``forced_targets`` (teacher forcing): exactly len(forced_targets)
    steps; the own-history input is chosen by ``inner_choose(gold, model)``
    and the lower token by ``inter_choose(gold_lower, model_lower)`` (both
    default to gold). The repeat-input cursor is then driven by the gold
    targets so the input stream stays aligned with the supervision.

    Layer 0 has no lower layer; its lower input is a constant BOS.
    """
    cfg = model.config
    bottom = layer == 0 or not cfg.hierarchical
    if not bottom and (not lower_tokens or lower_tokens[-1] != EOS):
        raise nk.ContractError("decode_layer: lower sequence must end with EOS")
    inner_choose = inner_choose or (lambda gold, model_tok: gold)
    inter_choose = inter_choose or (lambda gold, model_tok: gold)
    # model-decoded lower stream, aligned with lower_tokens (inter-layer
    # sampling); defaults to the gold stream
    lower_model = list(lower_model_tokens if lower_model_tokens is not None
                       else (lower_tokens or []))

    n_steps = len(forced_targets) if forced_targets is not None else cfg.max_decode_len
    h = enc.h_layers[layer]
    cursor = 0
    own_prev = BOS
    tokens: list[int] = []
    hiddens: list[nk.Tensor] = []
    logits_seq: list[nk.Tensor] = []
    truncated = False

    for t in range(n_steps):
        if bottom:
            y_lower = BOS if cfg.hierarchical else None
        elif repeat_input:
            gold_low = lower_tokens[min(cursor, len(lower_tokens) - 1)]
            model_low = lower_model[min(cursor, len(lower_model) - 1)]
            y_lower = inter_choose(gold_low, model_low)
        else:
            gold_low = lower_tokens[t] if t < len(lower_tokens) else EOS
            model_low = lower_model[t] if t < len(lower_model) else EOS
            y_lower = inter_choose(gold_low, model_low)

        attn = _layer_attention(model, layer, h, lower_states)
        h, logits = _step_batch(
            model, layer,
            np.array([own_prev], dtype=np.intp),
            None if y_lower is None else np.array([y_lower], dtype=np.intp),
            h, attn.context if attn else None,
        )
        emitted = int(np.argmax(logits.data[0]))
        tokens.append(emitted)
        hiddens.append(h)
        logits_seq.append(logits)

        if forced_targets is not None:
            gold = forced_targets[t]
            if not bottom and repeat_input and cursor < len(lower_tokens) and gold == lower_tokens[cursor]:
                cursor += 1
            own_prev = inner_choose(gold, emitted)
        else:
            if emitted == EOS:
                break
            if not bottom and repeat_input and cursor < len(lower_tokens) - 1 and emitted == lower_tokens[cursor]:
                cursor += 1
            own_prev = emitted
    else:
        if forced_targets is None:
            truncated = True

    unconsumed = (
        forced_targets is None
        and not bottom
        and repeat_input
        and truncated
        and cursor < len(lower_tokens) - 1
    )
    return LayerDecode(tokens, hiddens, logits_seq, truncated, unconsumed)


# ---------------------------------------------------------------------------
# Raw-array fast path (no autodiff) for generation and evaluation
# ---------------------------------------------------------------------------


def _gru_np(model: HierModel, prefix: str):
    p = model.params
    return tuple(p[f"{prefix}.{k}"].data for k in ("wz", "bz", "wr", "br", "wh", "bh"))


def encode_np(model: HierModel, ids: np.ndarray, lengths: np.ndarray,
              multi_hot: np.ndarray) -> list[np.ndarray]:
    """Raw-array encoder; returns the per-layer initial decoder states."""
    ids = np.asarray(ids, dtype=np.intp)
    lengths = np.asarray(lengths, dtype=np.intp)
    if ids.size == 0 or (lengths <= 0).any():
        raise nk.ContractError("encode: empty input sequence")
    p = model.params
    emb = p["emb"].data
    h0 = multi_hot @ p["enc.init.w"].data + p["enc.init.b"].data

    def scan(seq, prefix):
        gp = _gru_np(model, prefix)
        h = h0
        for t in range(seq.shape[1]):
            h_new = nk.gru_forward_np(emb[seq[:, t]], h, *gp)[0]
            active = (lengths > t).astype(np.float64)[:, None]
            h = active * h_new + (1.0 - active) * h
        return h

    h_fwd = scan(ids, "enc.fwd")
    h_bwd = scan(_reverse_within_lengths(ids, lengths), "enc.bwd")
    h_cat = np.concatenate([h_fwd, h_bwd], axis=-1)
    return [
        h_cat @ p[f"enc.proj.{i}.w"].data + p[f"enc.proj.{i}.b"].data
        for i in range(model.config.n_layers)
    ]


def _attention_np(model: HierModel, layer: int, h: np.ndarray,
                  states: np.ndarray, T_lens: np.ndarray) -> np.ndarray:
    """Batched attention context on raw arrays. states (B, T, Hl)."""
    kind = model.config.attention_kind
    if kind == "dot":
        scores = np.einsum("bh,bth->bt", h, states)
    elif kind == "general":
        w = model.params[f"dec.{layer}.attn.w"].data
        scores = np.einsum("bh,bth->bt", h @ w, states)
    else:
        w = model.params[f"dec.{layer}.attn.w"].data
        hd = h.shape[-1]
        scores = np.tanh((h @ w[:hd])[:, None, 0] + states @ w[hd:, 0])
    # mask positions past each sample's lower length
    T = states.shape[1]
    mask = np.arange(T)[None, :] < T_lens[:, None]
    scores = np.where(mask, scores, -np.inf)
    weights = nk._softmax_np(scores)
    return np.einsum("bt,bth->bh", weights, states)


def decode_layer_np(model: HierModel, layer: int, lower: np.ndarray | None,
                    lower_lens: np.ndarray | None, h0: np.ndarray,
                    repeat_input: bool,
                    lower_states: np.ndarray | None = None
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched greedy decode of one layer on raw arrays.

    Returns (tokens (B, T), out_lens (B,), states (B, T, H)). Token rows are
    EOS-terminated (EOS appended on truncation) and EOS-padded.
    """
    cfg = model.config
    p = model.params
    emb = p["emb"].data
    gp = _gru_np(model, f"dec.{layer}.gru")
    w_out = p[f"dec.{layer}.out.w"].data
    b_out = p[f"dec.{layer}.out.b"].data
    bottom = layer == 0 or not cfg.hierarchical
    B = h0.shape[0]
    h = h0
    own_prev = np.full(B, BOS, dtype=np.intp)
    cursor = np.zeros(B, dtype=np.intp)
    done = np.zeros(B, dtype=bool)
    out_tokens = []
    states = []
    use_attn = cfg.attention_kind != "none" and not bottom and lower_states is not None

    for t in range(cfg.max_decode_len):
        if bottom:
            y_lower = np.full(B, BOS, dtype=np.intp) if cfg.hierarchical else None
        elif repeat_input:
            y_lower = lower[np.arange(B), np.minimum(cursor, lower_lens - 1)]
        else:
            idx = np.minimum(t, lower_lens - 1)
            y_lower = np.where(t < lower_lens, lower[np.arange(B), idx], EOS)

        parts = [emb[own_prev]]
        if cfg.hierarchical:
            parts.append(emb[y_lower])
        if use_attn:
            parts.append(_attention_np(model, layer, h, lower_states, lower_lens))
        x = np.concatenate(parts, axis=-1) if len(parts) > 1 else parts[0]
        h_new = nk.gru_forward_np(x, h, *gp)[0]
        h = np.where(done[:, None], h, h_new)
        logits = (h @ w_out) @ emb.T + b_out
        emitted = np.where(done, EOS, np.argmax(logits, axis=-1))
        out_tokens.append(emitted)
        states.append(h)
        if not bottom and repeat_input:
            advance = (~done) & (emitted != EOS) & (cursor < lower_lens - 1) \
                & (emitted == lower[np.arange(B), np.minimum(cursor, lower_lens - 1)])
            cursor = cursor + advance
        done = done | (emitted == EOS)
        own_prev = emitted
        if done.all():
            break

    tokens = np.stack(out_tokens, axis=1)
    if not done.all():
        # EOS-terminate truncated rows with an appended column (the final
        # emitted token is kept; no step state exists for the extra position)
        tokens = np.concatenate([tokens, np.full((B, 1), EOS, dtype=np.intp)], axis=1)
    first_eos = np.argmax(tokens == EOS, axis=1)
    out_lens = first_eos + 1
    return tokens, out_lens, np.stack(states, axis=1)


def generate_batch(model: HierModel, frames: list[SemanticFrame],
                   vocab: Vocabulary) -> list[list[str]]:
    """Greedy end-to-end generation for a batch of (delexicalized) frames.

    Returns token lists in delexicalized space (no placeholders expanded),
    EOS stripped.
    """
    cfg = model.config
    seqs, mhs = [], []
    for fr in frames:
        seq, mh = encode_frame(fr, vocab)
        if not seq:
            raise nk.ContractError("generate: empty frame")
        seqs.append(seq)
        mhs.append(mh)
    T = max(len(s) for s in seqs)
    ids = np.full((len(frames), T), PAD, dtype=np.intp)
    for b, s in enumerate(seqs):
        ids[b, : len(s)] = s
    lengths = np.array([len(s) for s in seqs], dtype=np.intp)
    h_layers = encode_np(model, ids, lengths, np.stack(mhs))

    lower = lower_lens = lower_states = None
    tokens = out_lens = None
    for layer in range(cfg.n_layers):
        tokens, out_lens, states = decode_layer_np(
            model, layer, lower, lower_lens, h_layers[layer],
            cfg.repeat_input and layer > 0, lower_states,
        )
        lower, lower_lens, lower_states = tokens, out_lens, states

    results = []
    for b in range(len(frames)):
        row = tokens[b, : out_lens[b]]
        results.append([vocab.decode(i) for i in row if i != EOS])
    return results


def delexicalize_frame(frame: SemanticFrame) -> SemanticFrame:
    """Frame-only delexicalization (name/near values -> placeholders)."""
    fr, _ = delexicalize(frame, TaggedSentence((("x", "X"),)))
    return fr


def generate(frame: SemanticFrame, model: HierModel, vocab: Vocabulary) -> str:
    """Frame -> relexicalized surface string (greedy, repeat-input per config)."""
    if not frame.delex_map:
        frame = delexicalize_frame(frame)
    toks = generate_batch(model, [frame], vocab)[0]
    return " ".join(relexicalize(toks, frame.delex_map))


# ---------------------------------------------------------------------------
# Model persistence (checkpoint container + config sidecar + vocab file)
# ---------------------------------------------------------------------------


def save_model(model: HierModel, prefix) -> None:
    nk.save_checkpoint(f"{prefix}.hnlg", model.params)
    cfg = model.config
    lines = [
        f"vocab_size = {cfg.vocab_size}",
        f"embed_dim = {cfg.embed_dim}",
        f"encoder_hidden = {cfg.encoder_hidden}",
        f"decoder_hidden = {', '.join(str(h) for h in cfg.decoder_hidden)}",
        f"attention_kind = {cfg.attention_kind}",
        f"order = {cfg.order.spec()}",
        f"max_decode_len = {cfg.max_decode_len}",
        f"repeat_input = {'true' if cfg.repeat_input else 'false'}",
    ]
    with open(f"{prefix}.cfg", "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_model(prefix) -> HierModel:
    kv: dict[str, str] = {}
    with open(f"{prefix}.cfg", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and "=" in line:
                key, _, value = line.partition("=")
                kv[key.strip()] = value.strip()
    config = ModelConfig(
        vocab_size=int(kv["vocab_size"]),
        embed_dim=int(kv["embed_dim"]),
        encoder_hidden=int(kv["encoder_hidden"]),
        decoder_hidden=tuple(int(x) for x in kv["decoder_hidden"].split(",")),
        attention_kind=kv["attention_kind"],
        order=parse_order(kv["order"]),
        max_decode_len=int(kv["max_decode_len"]),
        repeat_input=kv["repeat_input"] == "true",
    )
    arrays = nk.load_checkpoint(f"{prefix}.hnlg")
    ps = nk.ParamSet(rng_seed=0)
    for name, arr in arrays.items():
        ps.add(name, nk.Tensor(arr))
    return HierModel(config, ps)
