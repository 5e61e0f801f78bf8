import itertools
import math

import numpy as np
import pytest

from pagesum.exceptions import ConfigError, InputError
from pagesum.model import (
    ModelConfig,
    encode_pages,
    forward,
    fuse,
    generate,
    init_params,
    param_shapes,
    sequence_score,
    teacher_forcing_pair,
)
from pagesum.numerics import Tensor, no_grad
from pagesum.paging import Page, PagedDocument
from pagesum.text import BOS_ID, EOS_ID

CFG = ModelConfig.tiny()


def noisy_params(cfg=CFG, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    params = init_params(cfg, seed=seed)
    for p in params.values():
        p.data = (p.data + rng.normal(0.0, scale, p.shape)).astype(np.float32)
    return params


def paged(*pages):
    return PagedDocument(tuple(Page(tuple(p), j, (j, j + 1)) for j, p in enumerate(pages)), "spatial")


DOC = paged([5, 9, 12, 7], [20, 21, 22], [30, 8, 8, 41, 6])
PREFIX = [BOS_ID, 10, 11, 12, 13]


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=10, d_model=15, n_heads=2)
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"vocab_size": 10, "width": 3})
    assert ModelConfig.from_dict(CFG.to_dict()) == CFG


def test_init_is_seeded_and_shaped():
    a, b = init_params(CFG, seed=3), init_params(CFG, seed=3)
    assert set(a) == set(param_shapes(CFG))
    assert all(np.array_equal(a[k].data, b[k].data) for k in a)
    assert not np.any(a["conf_proj.w"].data)
    assert a["vocab_proj.w"].shape == (CFG.d_model, CFG.vocab_size)


def test_forward_shapes_and_state():
    res = forward(noisy_params(), CFG, DOC, PREFIX)
    assert res.logits.shape == (len(PREFIX), CFG.vocab_size)
    st = res.state
    assert st.local_hidden.shape == (3, len(PREFIX), CFG.d_model)
    assert st.confidence_norm.shape == (len(PREFIX), 3)
    np.testing.assert_allclose(st.confidence_norm.sum(axis=1), 1.0, atol=1e-6)


def test_identical_pages_encode_identically():
    with no_grad():
        enc = encode_pages(noisy_params(), CFG, paged([5, 6, 7], [5, 6, 7]))
    assert np.array_equal(enc[0].data, enc[1].data)


def test_single_page_fusion_is_identity():
    res = forward(noisy_params(), CFG, paged([5, 6, 7, 8]), PREFIX)
    np.testing.assert_array_equal(res.state.confidence_norm, 1.0)
    np.testing.assert_array_equal(res.state.fused_hidden, res.state.local_hidden[0])


def test_single_page_matches_global_mode():
    params = noisy_params(seed=2)
    pd = paged([9, 10, 11, 12, 13])
    with no_grad():
        a = forward(params, CFG, pd, PREFIX, "paged").logits.data
        b = forward(params, CFG, pd, PREFIX, "global").logits.data
    assert np.array_equal(a, b)


def test_fuse_hand_case():
    local = [Tensor([[1.0, 0.0]]), Tensor([[0.0, 1.0]])]
    fused, weights = fuse(local, Tensor([[math.log(3.0), 0.0]]))
    np.testing.assert_allclose(weights.data, [[0.75, 0.25]], rtol=1e-6)
    np.testing.assert_allclose(fused.data, [[0.75, 0.25]], rtol=1e-6)


def test_fuse_equal_states_and_scores():
    h = [[0.2, -1.0, 3.0]]
    fused, _ = fuse([Tensor(h), Tensor(h)], Tensor([[0.7, 0.7]]))
    np.testing.assert_allclose(fused.data, h, rtol=1e-6)


def test_zero_confidence_head_gives_uniform_weights():
    params = noisy_params()
    params["conf_proj.w"].data[:] = 0.0
    weights = forward(params, CFG, DOC, PREFIX).state.confidence_norm
    np.testing.assert_allclose(weights, 1.0 / 3.0, rtol=1e-6)


def test_zero_vocab_projection_gives_uniform_distribution():
    params = noisy_params()
    params["vocab_proj.w"].data[:] = 0.0
    np.testing.assert_allclose(forward(params, CFG, DOC, PREFIX).probs, 1.0 / CFG.vocab_size, rtol=1e-6)


def test_decoder_is_causal():
    params = noisy_params(seed=4)
    with no_grad():
        full = forward(params, CFG, DOC, PREFIX).logits.data
        for k in range(1, len(PREFIX)):
            short = forward(params, CFG, DOC, PREFIX[:k]).logits.data
            np.testing.assert_allclose(short, full[:k], atol=1e-5)


def test_page_order_does_not_matter():
    params = noisy_params(seed=5)
    pages = [[5, 9, 12, 7], [20, 21, 22], [30, 8, 8, 41, 6]]
    with no_grad():
        a = forward(params, CFG, paged(*pages), PREFIX)
        b = forward(params, CFG, paged(*pages[::-1]), PREFIX)
    np.testing.assert_allclose(a.probs, b.probs, atol=1e-6)
    np.testing.assert_allclose(a.state.confidence_norm, b.state.confidence_norm[:, ::-1], atol=1e-6)


def test_input_validation():
    params = noisy_params()
    with pytest.raises(InputError):
        forward(params, CFG, DOC, [10, 11])
    with pytest.raises(InputError):
        forward(params, CFG, DOC, PREFIX, mode="sparse")
    with pytest.raises(InputError):
        forward(params, CFG, paged([5, CFG.vocab_size]), PREFIX)
    with pytest.raises(InputError):
        forward(params, CFG, paged(list(range(5, 5 + CFG.max_positions + 1))), PREFIX)


def test_teacher_forcing_pair_truncates():
    cfg = ModelConfig.tiny(max_positions=4)
    assert teacher_forcing_pair([7, 8, 9, 10, 11], cfg) == ([BOS_ID, 7, 8, 9], [7, 8, 9, EOS_ID])


# -- generation -----------------------------------------------------------------


def rigged_params(target):
    """Decoder residual branches silenced so the output depends only on the
    current token: BOS points at ``target``, ``target`` points at EOS."""
    params = noisy_params(seed=6)
    for name, p in params.items():
        if name.startswith("dec.") and name.endswith((".o.w", ".o.b", ".w2", ".b2")):
            p.data[:] = 0.0
    params["pos_emb"].data[:] = 0.0
    params["dec.ln_f.g"].data[:] = 1.0
    params["dec.ln_f.b"].data[:] = 0.0
    emb = params["tok_emb"].data
    emb[:] = 0.0
    emb[BOS_ID, :2] = [1.0, -1.0]
    emb[target, :2] = [-1.0, 1.0]
    proj = params["vocab_proj.w"].data
    proj[:] = 0.0
    proj[0, target] = 10.0
    proj[1, EOS_ID] = 10.0
    return params


@pytest.mark.parametrize("strategy", ["greedy", "beam"])
def test_rigged_generation(strategy):
    assert generate(rigged_params(17), CFG, DOC, strategy=strategy, max_len=8) == [17]


def test_beam_of_one_is_greedy():
    for seed in range(5):
        params = noisy_params(seed=seed, scale=0.5)
        greedy = generate(params, CFG, DOC, strategy="greedy", max_len=6)
        assert generate(params, CFG, DOC, strategy="beam", beam_size=1, max_len=6) == greedy


def test_exhaustive_beam_finds_the_best_sequence():
    cfg = ModelConfig.tiny(vocab_size=7)
    doc = paged([5, 6, 5], [6, 6])
    max_len = 3
    alphabet = [t for t in range(cfg.vocab_size) if t not in (0, BOS_ID)]
    for seed in range(3):
        params = noisy_params(cfg, seed=seed, scale=1.0)
        candidates = []
        for n in range(max_len + 1):
            for seq in itertools.product([t for t in alphabet if t != EOS_ID], repeat=n):
                candidates.append(list(seq))
        best = max(sequence_score(params, cfg, doc, s, max_len=max_len) for s in candidates)
        found = generate(params, cfg, doc, strategy="beam", beam_size=len(alphabet) ** max_len, max_len=max_len)
        greedy = generate(params, cfg, doc, strategy="greedy", max_len=max_len)
        assert sequence_score(params, cfg, doc, found, max_len=max_len) == pytest.approx(best, abs=1e-9)
        assert sequence_score(params, cfg, doc, found, max_len=max_len) >= sequence_score(
            params, cfg, doc, greedy, max_len=max_len
        ) - 1e-9


def test_generate_never_emits_reserved_tokens():
    out = generate(noisy_params(seed=9, scale=1.0), CFG, DOC, strategy="beam", max_len=10)
    assert 0 not in out and BOS_ID not in out and EOS_ID not in out


def test_generate_validation():
    with pytest.raises(InputError):
        generate(noisy_params(), CFG, DOC, max_len=0)
    with pytest.raises(InputError):
        generate(noisy_params(), CFG, DOC, strategy="sample")
