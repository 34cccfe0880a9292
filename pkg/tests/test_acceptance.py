"""Acceptance suite: one test per criterion, each printing a PASS line.

Criteria 7 and 8 need the official E2E release preprocessed by the tagprep
tool; point HNLG_E2E_DIR at a directory containing train.tagged.jsonl and
test.tagged.jsonl to enable them (they skip otherwise).
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from hnlg import cli
from hnlg import corpus as cp
from hnlg import metrics as mt
from hnlg import model as md
from hnlg import numkit as nk
from hnlg import training as tr
from gradcheck import FD_STEP, finite_difference, rel_error
from test_corpus import brute_force_layers, is_subsequence

FIXTURE = Path(__file__).parent.parent / "data" / "fixture_train.jsonl"
E2E_DIR = os.environ.get("HNLG_E2E_DIR", "")

# Criterion-4 protocol: 20 epochs, seeds {1,2,3}, fixture 90/10, and the
# module-default training schedule (batch 32, Adam lr 1e-3, teacher forcing
# 0.5 decaying by 0.9 per epoch, curriculum span 5) shared by all nine runs.
DESK_ORDER = cp.SIX_ORDERS[5]  # NOUN group > others > ADJ/ADV > VERB
DESK_SEEDS = (1, 2, 3)
DESK_LR = 1e-3
DESK_EPOCHS = 20


def _report(criterion: str, detail: str) -> None:
    print(f"\n[acceptance] {criterion}: PASS ({detail})")


# ---------------------------------------------------------------------------
# Criterion 1: gradient soundness, < 60 s
# ---------------------------------------------------------------------------


def test_criterion_1_gradient_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0

    # every differentiable op, 20 random trials
    for trial in range(20):
        a = nk.Tensor(rng.uniform(-1, 1, (3, 4)))
        b = nk.Tensor(rng.uniform(-1, 1, (4, 3)))
        states = [nk.Tensor(rng.uniform(-1, 1, (3, 4))) for _ in range(3)]
        targets = rng.integers(0, 3, size=3)
        mask = np.array([1.0, 0.0, 1.0])
        leaves = [a, b, *states]

        def build():
            m = nk.matmul(a, b)
            s = nk.softmax_lastdim(nk.mul(a, nk.sigmoid(a)))
            cat = nk.concat_lastdim([nk.tanh(a), s])
            ctx = nk.weighted_sum(nk.softmax_lastdim(nk.dot_scores(a, states)), states)
            emb = nk.rows(a, np.array([0, 2, 1]))
            return nk.add(
                nk.add(nk.tsum(cat), nk.tsum(ctx)),
                nk.add(nk.tsum(emb), nk.cross_entropy_sum(m, targets, mask)),
            )

        nk.backward(build())
        numeric = finite_difference(lambda: float(build().data), [l.data for l in leaves])
        for leaf, num in zip(leaves, numeric):
            worst = max(worst, rel_error(leaf.grad, num))

    # GRU cell
    for trial in range(5):
        p = nk.ParamSet(rng_seed=trial)
        gp = p.gru("g", 3, 4)
        x = nk.Tensor(rng.uniform(-1, 1, (2, 3)))
        h = nk.Tensor(rng.uniform(-1, 1, (2, 4)))
        mix = nk.Tensor(rng.uniform(-1, 1, (2, 4)))
        leaves = [x, h, *gp.tensors()]

        def build():
            return nk.tsum(nk.mul(nk.gru_cell(x, h, gp), mix))

        nk.backward(build())
        numeric = finite_difference(lambda: float(build().data), [l.data for l in leaves])
        for leaf, num in zip(leaves, numeric):
            worst = max(worst, rel_error(leaf.grad, num))

    # all three attention kinds
    for kind in ("dot", "general", "concat"):
        q = nk.Tensor(rng.uniform(-1, 1, (2, 3)))
        states = [nk.Tensor(rng.uniform(-1, 1, (2, 3))) for _ in range(3)]
        w = {"dot": None, "general": nk.Tensor(rng.uniform(-1, 1, (3, 3))),
             "concat": nk.Tensor(rng.uniform(-1, 1, (6, 1)))}[kind]
        mix = nk.Tensor(rng.uniform(-1, 1, (2, 3)))
        leaves = [q, *states] + ([w] if w is not None else [])

        def build():
            return nk.tsum(nk.mul(md.attention(q, states, kind, w).context, mix))

        nk.backward(build())
        numeric = finite_difference(lambda: float(build().data), [l.data for l in leaves])
        for leaf, num in zip(leaves, numeric):
            worst = max(worst, rel_error(leaf.grad, num))

    # full encode -> 4-layer teacher-forced loss on a 2-sentence micro-batch
    for kind in ("none", "dot", "general", "concat"):
        worst = max(worst, _full_model_grad_error(kind))

    elapsed = time.perf_counter() - t0
    assert worst < 1e-5, f"worst relative error {worst:.2e}"
    assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"
    _report("criterion 1 (gradient soundness)",
            f"worst rel err {worst:.2e}, {elapsed:.1f}s")


def _full_model_grad_error(attention_kind: str) -> float:
    groups = cp.delexicalize_corpus(cp.load_tagged_corpus(FIXTURE))[:2]
    vocab = cp.Vocabulary.build(groups)
    cfg = md.ModelConfig(vocab_size=len(vocab), embed_dim=6, encoder_hidden=5,
                         decoder_hidden=(6, 6, 6, 6), max_decode_len=40,
                         attention_kind=attention_kind, repeat_input=True)
    model = md.HierModel.init(cfg, seed=3)
    samples = [tr.prepare_sample(frame, refs[0], vocab, cfg) for frame, refs in groups]
    batch = tr._pad_batch(samples, 4)
    rng = np.random.default_rng(1)

    def loss_value() -> float:
        losses = tr.forward_batch(model, batch, [0, 1, 2, 3], 1.0, 1.0, rng, rng)
        total = losses[0]
        for extra in losses[1:]:
            total = nk.add(total, extra)
        return total

    model.params.zero_grads()
    nk.backward(loss_value())
    grads = {name: p.grad.copy() for name, p in model.params.items()}

    worst = 0.0
    dir_rng = np.random.default_rng(7)
    names = model.params.names()
    # directional derivatives over all parameters jointly
    for _ in range(3):
        direction = {n: dir_rng.normal(size=model.params[n].data.shape) for n in names}
        analytic = sum(float((grads[n] * direction[n]).sum()) for n in names)
        for n in names:
            model.params[n].data += FD_STEP * direction[n]
        hi = float(loss_value().data)
        for n in names:
            model.params[n].data -= 2 * FD_STEP * direction[n]
        lo = float(loss_value().data)
        for n in names:
            model.params[n].data += FD_STEP * direction[n]
        numeric = (hi - lo) / (2 * FD_STEP)
        denom = max(abs(analytic), abs(numeric), 1e-12)
        worst = max(worst, abs(analytic - numeric) / denom)
    # spot coordinates per tensor
    coord_rng = np.random.default_rng(8)
    for n in names:
        flat = model.params[n].data.reshape(-1)
        gflat = grads[n].reshape(-1)
        for idx in coord_rng.integers(0, flat.size, size=1):
            orig = flat[idx]
            flat[idx] = orig + FD_STEP
            hi = float(loss_value().data)
            flat[idx] = orig - FD_STEP
            lo = float(loss_value().data)
            flat[idx] = orig
            numeric = (hi - lo) / (2 * FD_STEP)
            denom = max(abs(gflat[idx]), abs(numeric), 1e-3)
            worst = max(worst, abs(gflat[idx] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# Criterion 2: layer-target oracle on the full fixture, all six orders
# ---------------------------------------------------------------------------


def test_criterion_2_layer_target_oracle():
    loaded = cp.load_tagged_corpus(FIXTURE)
    sentences = [s for _, refs in loaded for s in refs]
    assert len(sentences) == 2000
    checked = 0
    for order in cp.SIX_ORDERS:
        for s in sentences:
            ts = cp.build_layer_targets(s, order)
            assert ts.layers == brute_force_layers(s.tokens, order.groups)
            assert ts.layers[3] == s.lemmas()
            group_count = sum(
                1 for _, tag in s.tokens
                if order.group_of(tag) in (1, 2, 3, 4)
            )
            assert group_count == len(s)  # partition totality
            for i in range(3):
                assert is_subsequence(ts.layers[i], ts.layers[i + 1])
            checked += 1
    _report("criterion 2 (layer-target oracle)",
            f"{checked} sentence/order pairs exact, invariants 100%")


# ---------------------------------------------------------------------------
# Criterion 3: metric oracles and 1000 randomized invariant trials
# ---------------------------------------------------------------------------


def test_criterion_3_metric_oracles():
    # hand-computed cases
    assert mt.corpus_bleu([mt.EvalInstance(("the", "cat"), (("the", "cat", "sat"),))]) \
        == pytest.approx(60.65306597126334, abs=1e-6)
    assert mt.rouge_n(mt.EvalInstance(("a", "b", "c"), (("a", "c"),)), 1) \
        == pytest.approx(0.8, abs=1e-12)
    assert mt.rouge_l(mt.EvalInstance(("a", "b", "c"), (("a", "c"),))) \
        == pytest.approx(0.8, abs=1e-12)
    lcs_f1 = 2 * (1 / 3) * (1 / 3) / (2 / 3)
    assert mt.rouge_l(mt.EvalInstance(("c", "b", "a"), (("a", "b", "c"),))) \
        == pytest.approx(lcs_f1, abs=1e-12)
    assert mt.corpus_bleu([mt.EvalInstance(("a", "b", "c", "d"),
                                           (("a", "b", "c", "d"),
                                            ("a", "b", "c", "d", "e", "f", "g", "h")))]) \
        == pytest.approx(100.0, abs=1e-6)

    rng = np.random.default_rng(42)
    alphabet = list("abcdef")
    trials = 0
    for _ in range(1000):
        cand = tuple(rng.choice(alphabet, size=rng.integers(1, 9)))
        refs = tuple(tuple(rng.choice(alphabet, size=rng.integers(1, 9)))
                     for _ in range(rng.integers(1, 4)))
        inst = mt.EvalInstance(cand, refs)
        # identity maximal
        ident = mt.EvalInstance(cand, (cand,) + refs)
        assert mt.rouge_n(ident, 1) == 1.0 and mt.rouge_l(ident) == 1.0
        assert mt.corpus_bleu([mt.EvalInstance(cand, (cand,))]) == pytest.approx(100.0)
        # reference permutation invariance
        perm = mt.EvalInstance(cand, refs[::-1])
        assert mt.rouge_n(perm, 1) == mt.rouge_n(inst, 1)
        assert mt.rouge_n(perm, 2) == mt.rouge_n(inst, 2)
        assert mt.rouge_l(perm) == mt.rouge_l(inst)
        assert mt.corpus_bleu([perm]) == pytest.approx(mt.corpus_bleu([inst]))
        # adding a reference never decreases ROUGE
        extra = mt.EvalInstance(cand, refs + (tuple(rng.choice(alphabet, size=4)),))
        assert mt.rouge_n(extra, 1) >= mt.rouge_n(inst, 1)
        assert mt.rouge_n(extra, 2) >= mt.rouge_n(inst, 2)
        assert mt.rouge_l(extra) >= mt.rouge_l(inst)
        trials += 1
    # BLEU corpus permutation invariance on random corpora
    for _ in range(50):
        instances = [
            mt.EvalInstance(tuple(rng.choice(alphabet, size=rng.integers(1, 9))),
                            tuple(tuple(rng.choice(alphabet, size=rng.integers(1, 9)))
                                  for _ in range(rng.integers(1, 4))))
            for _ in range(6)
        ]
        score = mt.corpus_bleu(instances)
        shuffled = [instances[j] for j in rng.permutation(6)]
        assert mt.corpus_bleu(shuffled) == pytest.approx(score)
    _report("criterion 3 (metric oracles)", f"{trials} randomized trials")


# ---------------------------------------------------------------------------
# Criterion 4: desk-scale Table-1 direction (9 training runs)
# ---------------------------------------------------------------------------


def test_criterion_4_desk_scale_direction():
    t0 = time.perf_counter()
    groups = cp.delexicalize_corpus(cp.load_tagged_corpus(FIXTURE))
    train_g, dev_g = tr.split_groups(groups, 0.1, seed=42)
    vocab = cp.Vocabulary.build(train_g)

    def run(seed, curriculum, **over):
        cfg = md.ModelConfig(vocab_size=len(vocab), order=DESK_ORDER, **over)
        model = md.HierModel.init(cfg, seed=seed)
        samples = tr.prepare_pairs(train_g, vocab, cfg)
        sched = tr.TrainingSchedule(total_epochs=DESK_EPOCHS, rng_seed=seed,
                                    curriculum=curriculum, learning_rate=DESK_LR)
        result = tr.train(model, samples, sched, dev_groups=dev_g, vocab=vocab)
        return result.dev_bleu_trace[-1]

    scores = {"baseline": [], "hierarchical": [], "all": []}
    for seed in DESK_SEEDS:
        scores["baseline"].append(run(seed, False, decoder_hidden=(400,)))
        scores["hierarchical"].append(run(seed, False))
        scores["all"].append(run(seed, True, repeat_input=True))

    means = {k: float(np.mean(v)) for k, v in scores.items()}
    elapsed_min = (time.perf_counter() - t0) / 60.0
    detail = (f"baseline {means['baseline']:.2f}, +HD {means['hierarchical']:.2f}, "
              f"+All {means['all']:.2f}, gap {means['all'] - means['baseline']:.2f}, "
              f"{elapsed_min:.1f} min; per-seed {scores}")
    assert elapsed_min <= 45.0, detail
    assert means["all"] > means["hierarchical"] > means["baseline"], detail
    assert means["all"] - means["baseline"] >= 8.0, detail
    _report("criterion 4 (desk-scale direction)", detail)


# ---------------------------------------------------------------------------
# Criterion 5: single-sample overfit
# ---------------------------------------------------------------------------


def test_criterion_5_overfit_sanity():
    groups = cp.delexicalize_corpus(cp.load_tagged_corpus(FIXTURE))[:20]
    vocab = cp.Vocabulary.build(groups)
    cfg = md.ModelConfig(vocab_size=len(vocab), embed_dim=8, encoder_hidden=8,
                         decoder_hidden=(10, 10, 10, 10), max_decode_len=40)
    model = md.HierModel.init(cfg, seed=1)
    sample = tr.prepare_sample(groups[0][0], groups[0][1][0], vocab, cfg)
    sched = tr.TrainingSchedule(total_epochs=50, batch_size=1, curriculum_span=1000,
                                learning_rate=0.04, rng_seed=3,
                                tf_prob_initial=1.0, tf_decay=1.0)
    result = tr.train(model, [sample], sched)
    losses = [r.layer_losses[0] for r in result.reports]
    assert len(losses) == 50
    assert losses[-1] < 0.1, f"final layer-1 loss {losses[-1]:.4f}"
    _report("criterion 5 (overfit sanity)",
            f"layer-1 loss {losses[0]:.2f} -> {losses[-1]:.4f} in 50 steps")


# ---------------------------------------------------------------------------
# Criterion 6: bit-identical determinism
# ---------------------------------------------------------------------------


def test_criterion_6_determinism(tmp_path):
    lines = [l for l in FIXTURE.read_text().splitlines() if '"mr"' in l]
    data = tmp_path / "train.jsonl"
    data.write_text("\n".join(lines[:80]) + "\n")
    test_data = tmp_path / "test.jsonl"
    test_data.write_text("\n".join(lines[80:100]) + "\n")

    def one(tag):
        cfg_path = tmp_path / f"{tag}.cfg"
        cfg_path.write_text(
            f"train_data = {data}\ntest_data = {test_data}\n"
            "hierarchical = true\nrepeat_input = true\ncurriculum = true\n"
            "epochs = 6\nbatch_size = 16\nembed_dim = 8\nencoder_hidden = 8\n"
            "decoder_hidden = 8, 8, 8, 8\nmax_decode_len = 30\nseed = 4\n"
            f"out_dir = {tmp_path / tag}\n"
        )
        row = cli.run(cli.parse_config(cfg_path))
        ckpt = (tmp_path / tag / "checkpoint.hnlg").read_bytes()
        report = {k: v for k, v in row.items() if k not in ("config_id", "config_hash")}
        return ckpt, report

    ckpt_a, row_a = one("a")
    ckpt_b, row_b = one("b")
    assert ckpt_a == ckpt_b, "checkpoints differ between identical runs"
    assert row_a == row_b, "report rows differ between identical runs"
    _report("criterion 6 (determinism)",
            f"bit-identical checkpoints ({len(ckpt_a)} bytes) and report rows")


# ---------------------------------------------------------------------------
# Criteria 7 and 8 (secondary): need the official E2E release via tagprep
# ---------------------------------------------------------------------------

PAPER_TRAIN_ROW = (6.64, 9.67, 12.54, 18.09)
PAPER_TEST_ROW = (7.90, 11.53, 14.84, 21.32)


@pytest.mark.skipif(not E2E_DIR, reason="HNLG_E2E_DIR not set (official E2E data not bundled)")
def test_criterion_7_table3_reproduction():
    train_path = Path(E2E_DIR) / "train.tagged.jsonl"
    test_path = Path(E2E_DIR) / "test.tagged.jsonl"
    assert train_path.exists() and test_path.exists()
    order = cp.SIX_ORDERS[0]  # N > V > A > others, the Table-3 reference row
    rows = {}
    for split, path, expected in [("train", train_path, PAPER_TRAIN_ROW),
                                  ("test", test_path, PAPER_TEST_ROW)]:
        groups = cp.delexicalize_corpus(cp.load_tagged_corpus(path))
        sets = [cp.build_layer_targets(ref, order) for _, refs in groups for ref in refs]
        rows[split] = cp.length_stats(sets)
        for got, want in zip(rows[split], expected):
            assert abs(got - want) <= 0.6, f"{split}: {rows[split]} vs {expected}"
    _report("criterion 7 (Table-3 reproduction)",
            f"train {rows['train']}, test {rows['test']}")


@pytest.mark.skipif(not (E2E_DIR and os.environ.get("HNLG_FULL_RUN")),
                    reason="full-corpus soft target needs HNLG_E2E_DIR and HNLG_FULL_RUN=1")
def test_criterion_8_full_scale_soft_target():
    groups = cp.delexicalize_corpus(
        cp.load_tagged_corpus(Path(E2E_DIR) / "train.tagged.jsonl"))
    test_groups = cp.delexicalize_corpus(
        cp.load_tagged_corpus(Path(E2E_DIR) / "test.tagged.jsonl"))
    vocab = cp.Vocabulary.build(groups)
    order = cp.SIX_ORDERS[3]  # VERB > ADJ/ADV > NOUN group > others
    cfg = md.ModelConfig(vocab_size=len(vocab), order=order, repeat_input=True)
    model = md.HierModel.init(cfg, seed=1)
    samples = tr.prepare_pairs(groups, vocab, cfg)
    sched = tr.TrainingSchedule(total_epochs=20, rng_seed=1, curriculum=True)
    tr.train(model, samples, sched)
    bleu = tr.dev_bleu(model, test_groups, vocab)
    print(f"\n[acceptance] criterion 8 (soft target): test BLEU {bleu:.2f} (goal >= 50)")
    assert bleu >= 50.0
