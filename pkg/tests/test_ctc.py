import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from childasr import numcore as nc
from childasr.ctc import (
    CtcPrefixScorer,
    collapse_path,
    ctc_log_prob,
    ctc_loss,
    ctc_loss_and_grad,
    ctc_prefix_score,
    ctc_score,
    log_normalize,
    min_frames,
)
from childasr.errors import DimensionError, TrainingError
from childasr.numcore import Tensor

from oracles import ctc_brute, path_table, random_grid

C, A, T_ = 1, 2, 3


def test_collapse_examples():
    assert collapse_path([0, C, 0, A, A, 0, T_, 0]) == [C, A, T_]
    assert collapse_path([0, 0, 0]) == []
    assert collapse_path([A, A, 0, A]) == [A, A]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 3), max_size=5), st.data())
def test_collapse_of_expanded_path_is_fixed_point(y, data):
    path = []
    prev = None
    for tok in y:
        if tok == prev or data.draw(st.booleans()):
            path += [0] * data.draw(st.integers(1, 2))
        path += [tok] * data.draw(st.integers(1, 3))
        prev = tok
    path += [0] * data.draw(st.integers(0, 2))
    assert collapse_path(path) == y


def test_single_frame():
    g = random_grid(np.random.default_rng(0), 1, 3)
    assert ctc_log_prob(g, [2]) == pytest.approx(g[0, 2], abs=1e-15)


def test_t4_k2_against_enumeration():
    g = random_grid(np.random.default_rng(1), 4, 2)
    assert abs(ctc_log_prob(g, [1, 2]) - ctc_brute(g, [1, 2])) < 1e-10


def test_repeat_needs_separating_blank():
    g = random_grid(np.random.default_rng(2), 2, 2)
    res = ctc_score(g, [1, 1])
    assert res.log_prob == -np.inf and not res.feasible
    assert min_frames([1, 1]) == 3


def test_enumeration_equivalence_50_grids():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        T, K = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        g = random_grid(rng, T, K)
        table = path_table(g)
        ys = list(table)
        ys.append(tuple(rng.integers(1, K + 1, size=T + 1)))  # infeasible by length
        for y in ys:
            got = ctc_log_prob(g, y)
            want = table.get(y, -np.inf)
            assert got == want if want == -np.inf else abs(got - want) < 1e-10


def test_total_probability_is_one():
    rng = np.random.default_rng(7)
    for T in range(1, 5):
        for K in (1, 2, 3):
            g = random_grid(rng, T, K)
            tot = np.logaddexp.reduce([ctc_log_prob(g, y) for y in path_table(g)])
            assert abs(np.exp(tot) - 1.0) < 1e-9


def test_long_grid_no_underflow():
    g = random_grid(np.random.default_rng(3), 512, 4)
    assert np.isfinite(ctc_log_prob(g, [1, 2, 3, 4] * 20))


def test_invalid_label():
    with pytest.raises(DimensionError):
        ctc_log_prob(random_grid(np.random.default_rng(0), 3, 2), [3])
    with pytest.raises(DimensionError):
        ctc_log_prob(random_grid(np.random.default_rng(0), 3, 2), [0])


def test_loss_matches_log_prob_and_rows_sum_to_zero():
    rng = np.random.default_rng(4)
    logits = rng.normal(size=(5, 4))
    loss, grad = ctc_loss_and_grad(logits, [1, 3])
    assert abs(loss + ctc_log_prob(log_normalize(logits), [1, 3])) < 1e-12
    assert np.all(np.abs(grad.sum(axis=1)) < 1e-9)


def test_loss_gradient_finite_differences():
    rng = np.random.default_rng(5)
    logits = rng.normal(size=(5, 4))
    err = nc.check_gradients(lambda t: ctc_loss(t[0], [2, 3, 2]), [logits])
    assert err < 1e-5


def test_infeasible_training_target_names_utterance():
    with pytest.raises(TrainingError, match="utt7"):
        ctc_loss(Tensor(np.zeros((1, 2, 3))), [[1, 1]], utt_ids=["utt7"])


def test_prefix_empty_is_zero_and_total_mass():
    g = random_grid(np.random.default_rng(6), 4, 2)
    score, _ = ctc_prefix_score(g, [])
    assert score == 0.0
    assert abs(np.exp(np.logaddexp.reduce(list(path_table(g).values()))) - 1.0) < 1e-12


def test_prefix_score_matches_enumeration():
    rng = np.random.default_rng(8)
    for _ in range(20):
        T, K = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        g = random_grid(rng, T, K)
        table = path_table(g)
        for L in range(0, 3):
            prefix = tuple(rng.integers(1, K + 1, size=L))
            mass = [v for y, v in table.items() if y[:L] == prefix]
            want = np.logaddexp.reduce(mass) if mass else -np.inf
            got, state = ctc_prefix_score(g, prefix)
            assert (got == want) if want == -np.inf else abs(got - want) < 1e-10
            full = state.full_score()
            want_full = table.get(prefix, -np.inf)
            assert (full == want_full) if want_full == -np.inf else abs(full - want_full) < 1e-10


def test_prefix_monotone():
    g = random_grid(np.random.default_rng(9), 6, 3)
    sc = CtcPrefixScorer(g)
    st0 = sc.initial_state()
    for s1 in sc.extend(st0, [1, 2, 3]):
        assert s1.score <= st0.score + 1e-12
        for s2 in sc.extend(s1, [1, 2, 3]):
            assert s2.score <= s1.score + 1e-12


def test_batched_loss_respects_lengths():
    rng = np.random.default_rng(10)
    logits = rng.normal(size=(2, 6, 4))
    batched = ctc_loss(Tensor(logits), [[1], [2, 3]], [3, 6]).data
    assert batched[0] == pytest.approx(ctc_loss_and_grad(logits[0, :3], [1])[0], abs=1e-12)
    assert batched[1] == pytest.approx(ctc_loss_and_grad(logits[1], [2, 3])[0], abs=1e-12)
