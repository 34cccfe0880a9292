import numpy as np
import pytest

from hnlg import numkit as nk
from gradcheck import finite_difference, rel_error


def t(data):
    return nk.Tensor(np.asarray(data, dtype=np.float64))


# ---------------------------------------------------------------------------
# Forward examples
# ---------------------------------------------------------------------------


def test_matmul_identity():
    a = t([[3.0, 4.0], [5.0, 6.0]])
    out = nk.matmul(t(np.eye(2)), a)
    assert np.array_equal(out.data, a.data)


def test_matmul_hand_case():
    out = nk.matmul(t([[1.0, 2.0]]), t([[3.0], [4.0]]))
    assert out.data.shape == (1, 1)
    assert out.data[0, 0] == 11.0  # 1*3 + 2*4


def test_matmul_zero_annihilates():
    rng = np.random.default_rng(0)
    b = t(rng.uniform(-1, 1, (2, 2)))
    out = nk.matmul(t(np.zeros((2, 2))), b)
    assert np.array_equal(out.data, np.zeros((2, 2)))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(nk.DimensionError) as err:
        nk.matmul(t(np.zeros((2, 3))), t(np.zeros((2, 3))))
    assert "(2, 3)" in str(err.value)


def test_sigmoid_at_zero():
    assert nk.sigmoid(t([0.0])).data[0] == 0.5


def test_softmax_uniform():
    out = nk.softmax_lastdim(t([0.0, 0.0]))
    assert np.allclose(out.data, [0.5, 0.5])


def test_softmax_hand_case():
    out = nk.softmax_lastdim(t([1.0, 0.0]))
    assert abs(out.data[0] - 0.7311) < 1e-4
    assert abs(out.data[1] - 0.2689) < 1e-4


def test_softmax_rows_are_distributions():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = t(rng.uniform(-20, 20, (4, 7)))
        s = nk.softmax_lastdim(x).data
        assert (s >= 0).all()
        assert np.abs(s.sum(axis=-1) - 1.0).max() < 1e-9


def test_concat_and_elementwise_dispatch():
    a, b = t([[1.0, 2.0]]), t([[3.0]])
    out = nk.elementwise("concat_lastdim", a, b)
    assert np.array_equal(out.data, [[1.0, 2.0, 3.0]])
    with pytest.raises(nk.ContractError):
        nk.elementwise("nope", a)


def test_gru_zero_params_halves_h():
    p = _zero_gru(3, 2)
    h = t([[0.8, -0.4]])
    out = nk.gru_cell(t([[0.0, 0.0, 0.0]]), h, p)
    assert np.allclose(out.data, [[0.4, -0.2]])  # z=0.5, h_tilde=0


def test_gru_zero_state_fixed_point():
    p = _zero_gru(3, 2)
    out = nk.gru_cell(t([[0.5, -0.5, 1.0]]), t([[0.0, 0.0]]), p)
    assert np.array_equal(out.data, np.zeros((1, 2)))


def test_gru_output_interpolates():
    rng = np.random.default_rng(2)
    for _ in range(25):
        p = _random_gru(rng, 3, 4)
        h = t(rng.uniform(-1, 1, (2, 4)))
        x = t(rng.uniform(-1, 1, (2, 3)))
        h_new, _, _, h_tilde, _, _ = nk.gru_forward_np(
            x.data, h.data, *(q.data for q in p.tensors())
        )
        lo = np.minimum(h.data, h_tilde)
        hi = np.maximum(h.data, h_tilde)
        assert (h_new >= lo - 1e-12).all() and (h_new <= hi + 1e-12).all()


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------


def test_backward_linear_case():
    p = t([[1.0, -2.0], [3.0, 0.5]])
    nk.backward(nk.tsum(p))
    assert np.array_equal(p.grad, np.ones((2, 2)))


def test_backward_quadratic_case():
    p = t([[1.0, -2.0], [3.0, 0.5]])
    nk.backward(nk.scale(nk.tsum(nk.mul(p, p)), 0.5))
    assert np.allclose(p.grad, p.data)


def test_backward_requires_scalar():
    p = t([[1.0, 2.0]])
    with pytest.raises(nk.ContractError):
        nk.backward(nk.mul(p, p))


def test_backward_accumulates_until_reset():
    p = t([1.0, 2.0])
    loss = nk.tsum(p)
    nk.backward(loss)
    first = p.grad.copy()
    loss2 = nk.tsum(p)
    nk.backward(loss2)
    assert np.array_equal(p.grad, 2 * first)


def _zero_gru(d_in, d_h):
    return nk.GruParams(
        t(np.zeros((d_in + d_h, d_h))), t(np.zeros(d_h)),
        t(np.zeros((d_in + d_h, d_h))), t(np.zeros(d_h)),
        t(np.zeros((d_in + d_h, d_h))), t(np.zeros(d_h)),
    )


def _random_gru(rng, d_in, d_h):
    return nk.GruParams(
        t(rng.uniform(-1, 1, (d_in + d_h, d_h))), t(rng.uniform(-1, 1, d_h)),
        t(rng.uniform(-1, 1, (d_in + d_h, d_h))), t(rng.uniform(-1, 1, d_h)),
        t(rng.uniform(-1, 1, (d_in + d_h, d_h))), t(rng.uniform(-1, 1, d_h)),
    )


def test_gru_cell_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    p = _random_gru(rng, 3, 4)
    x = t(rng.uniform(-1, 1, (2, 3)))
    h = t(rng.uniform(-1, 1, (2, 4)))
    leaves = [x, h, *p.tensors()]
    weight = rng.uniform(-1, 1, (2, 4))  # fixed projection to a scalar

    def forward():
        h_new, *_ = nk.gru_forward_np(x.data, h.data, *(q.data for q in p.tensors()))
        return float((h_new * weight).sum())

    loss = nk.tsum(nk.mul(nk.gru_cell(x, h, p), t(weight)))
    nk.backward(loss)
    numeric = finite_difference(forward, [leaf.data for leaf in leaves])
    for leaf, num in zip(leaves, numeric):
        assert rel_error(leaf.grad, num) < 1e-6


def test_gru_chain_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    p = _random_gru(rng, 3, 4)
    xs = [rng.uniform(-1, 1, (2, 3)) for _ in range(5)]
    h0 = rng.uniform(-1, 1, (2, 4))

    def forward():
        h = h0
        for x in xs:
            h, *_ = nk.gru_forward_np(x, h, *(q.data for q in p.tensors()))
        return float(h.sum())

    h = t(h0)
    h0_t = h
    for x in xs:
        h = nk.gru_cell(t(x), h, p)
    nk.backward(nk.tsum(h))
    leaves = [h0_t, *p.tensors()]
    numeric = finite_difference(forward, [h0] + [q.data for q in p.tensors()])
    for leaf, num in zip(leaves, numeric):
        assert rel_error(leaf.grad, num) < 1e-6


@pytest.mark.parametrize("trial", range(20))
def test_op_gradients_match_finite_differences(trial):
    """Every differentiable op against the central-difference oracle."""
    rng = np.random.default_rng(100 + trial)
    a = t(rng.uniform(-1, 1, (3, 4)))
    b = t(rng.uniform(-1, 1, (4, 2)))
    c = t(rng.uniform(-1, 1, (3, 4)))
    states = [t(rng.uniform(-1, 1, (3, 4))) for _ in range(3)]
    w = t(rng.uniform(-1, 1, (3, 3)))
    ids = rng.integers(0, 3, size=4)
    targets = rng.integers(0, 2, size=3)
    mask = np.array([1.0, 1.0, 0.0])
    leaves = [a, b, c, w, *states]

    def build():
        m = nk.matmul(a, b)  # (3, 2)
        s = nk.softmax_lastdim(nk.add(nk.mul(a, c), nk.tanh(c)))  # (3, 4)
        cat = nk.concat_lastdim([nk.sigmoid(a), s])  # (3, 8)
        scores = nk.dot_scores(a, states)  # (3, 3)
        ctx = nk.weighted_sum(nk.softmax_lastdim(nk.add(scores, w)), states)
        emb = nk.rows(c, ids)  # (4, 4)
        ce = nk.cross_entropy_sum(m, targets, mask)
        total = nk.add(
            nk.add(nk.tsum(cat), nk.tsum(ctx)),
            nk.add(nk.scale(nk.tsum(emb), 0.5), ce),
        )
        return total

    def forward():
        return float(build().data)

    nk.backward(build())
    numeric = finite_difference(forward, [leaf.data for leaf in leaves])
    for leaf, num in zip(leaves, numeric):
        assert rel_error(leaf.grad, num) < 1e-6


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def _params_with(values):
    ps = nk.ParamSet(rng_seed=0)
    for name, val in values.items():
        ps.add(name, t(val))
    return ps


def test_adam_zero_gradients_keep_params():
    ps = _params_with({"a": [1.0, -2.0]})
    ps.zero_grads()
    st = nk.AdamState()
    nk.adam_step(ps, st)
    assert np.array_equal(ps["a"].data, [1.0, -2.0])
    assert st.step_count == 1


def test_adam_first_step_closed_form():
    ps = _params_with({"a": [0.0]})
    ps.zero_grads()
    ps["a"].grad[:] = 1.0
    st = nk.AdamState(learning_rate=0.1)
    nk.adam_step(ps, st)
    # bias-corrected first step: delta = lr * g / (|g| + eps)
    assert abs(ps["a"].data[0] + 0.1) < 1e-8
    assert ps["a"].grad is None  # cleared


def test_adam_identical_params_update_identically():
    ps = _params_with({"a": [0.3, -0.7], "b": [0.3, -0.7]})
    st = nk.AdamState()
    for _ in range(3):
        ps.zero_grads()
        ps["a"].grad[:] = [0.5, -0.2]
        ps["b"].grad[:] = [0.5, -0.2]
        nk.adam_step(ps, st)
    assert np.array_equal(ps["a"].data, ps["b"].data)


def test_adam_missing_grad_is_contract_error():
    ps = _params_with({"a": [1.0]})
    with pytest.raises(nk.ContractError):
        nk.adam_step(ps, nk.AdamState())


def test_adam_moment_shapes_mirror_params():
    ps = _params_with({"a": np.zeros((2, 3)), "b": np.zeros(4)})
    ps.zero_grads()
    st = nk.AdamState()
    nk.adam_step(ps, st)
    assert st.m["a"].shape == (2, 3) and st.v["b"].shape == (4,)


# ---------------------------------------------------------------------------
# ParamSet / checkpoint
# ---------------------------------------------------------------------------


def test_paramset_rejects_duplicate_names():
    ps = nk.ParamSet(rng_seed=0)
    ps.zeros("a", 2)
    with pytest.raises(nk.ContractError):
        ps.zeros("a", 2)


def test_paramset_init_is_seeded_and_bounded():
    p1 = nk.ParamSet(rng_seed=7).glorot("w", 10, 20)
    p2 = nk.ParamSet(rng_seed=7).glorot("w", 10, 20)
    assert np.array_equal(p1.data, p2.data)
    bound = np.sqrt(6.0 / 30)
    assert np.abs(p1.data).max() <= bound


def test_checkpoint_round_trip_bit_exact(tmp_path):
    ps = nk.ParamSet(rng_seed=11)
    ps.glorot("enc.wz", 5, 3)
    ps.zeros("dec.0.b", 4)
    ps.add("scalarish", t(np.array(0.123456789)))
    path = tmp_path / "model.hnlg"
    nk.save_checkpoint(path, ps)
    loaded = nk.load_checkpoint(path)
    assert list(loaded) == ps.names()
    for name, arr in loaded.items():
        assert arr.tobytes() == ps[name].data.tobytes()

    ps2 = nk.ParamSet(rng_seed=0)
    for name, arr in loaded.items():
        ps2.add(name, t(arr))
    path2 = tmp_path / "model2.hnlg"
    nk.save_checkpoint(path2, ps2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(nk.ContractError):
        nk.load_checkpoint(path)


def test_checkpoint_rejects_trailing_bytes(tmp_path):
    ps = nk.ParamSet(rng_seed=1)
    ps.zeros("a", 2)
    path = tmp_path / "model.hnlg"
    nk.save_checkpoint(path, ps)
    path.write_bytes(path.read_bytes() + b"\x01")
    with pytest.raises(nk.ContractError):
        nk.load_checkpoint(path)
