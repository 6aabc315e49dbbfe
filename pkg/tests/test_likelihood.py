import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carpnet import (
    FitConfig,
    ImpossibleHistoryError,
    ModelParams,
    TransitionSummary,
    build_history,
    fit,
    log_likelihood,
    month_sequence,
    run_cascades,
    transition_log_prob,
)
from conftest import make_network
from oracles import naive_log_likelihood


def _history(net, states):
    states = np.asarray(states, dtype=np.uint8)
    return build_history(net, month_sequence("2001-01", states.shape[1]), states)


def test_all_passive_edgeless_history_hand_value():
    # alpha tuned so every passive->passive cell contributes exactly ln 0.9
    alpha = math.log(0.9) / math.log(0.7)
    net = make_network([0.3, 0.3, 0.3])
    hist = _history(net, np.zeros((3, 2)))
    value = log_likelihood(hist, ModelParams(alpha, 0.5, 1.0), net)
    assert value == pytest.approx(3 * math.log(0.9), rel=1e-12)


def test_recovery_cell_hand_value():
    net = make_network([0.5, 0.2], edges=[(0, 1)])
    hist = _history(net, [[1, 0], [0, 0]])
    lp = transition_log_prob(0, 1, hist, ModelParams(0.4, 0.4, 1.0), net)
    assert lp == pytest.approx(math.log(0.5), rel=1e-15)


def test_impossible_activation_raises():
    net = make_network([0.3])
    hist = _history(net, [[0, 1]])
    params = ModelParams(0.0, 0.0, 1.0)
    with pytest.raises(ImpossibleHistoryError):
        transition_log_prob(0, 1, hist, params, net)
    with pytest.raises(ImpossibleHistoryError):
        log_likelihood(hist, params, net)


def test_impossible_continuation_raises():
    net = make_network([0.3])
    hist = _history(net, [[1, 1]])
    with pytest.raises(ImpossibleHistoryError):
        log_likelihood(hist, ModelParams(0.2, 0.2, 0.0), net)


def test_transition_log_prob_bounds_checked():
    net = make_network([0.3, 0.4], edges=[(0, 1)])
    hist = _history(net, [[0, 1, 0], [1, 1, 0]])
    from carpnet import DataError

    with pytest.raises(DataError):
        transition_log_prob(0, 0, hist, ModelParams(1, 1, 1), net)
    with pytest.raises(DataError):
        transition_log_prob(0, 3, hist, ModelParams(1, 1, 1), net)


small_states = st.integers(2, 4).flatmap(
    lambda r: st.integers(2, 7).flatmap(
        lambda t: st.tuples(
            st.just(r),
            st.lists(
                st.lists(st.integers(0, 1), min_size=t, max_size=t),
                min_size=r,
                max_size=r,
            ),
            st.lists(st.booleans(), min_size=r * (r - 1) // 2, max_size=r * (r - 1) // 2),
        )
    )
)


@given(data=small_states, alpha=st.floats(0.05, 2), beta=st.floats(0.05, 2), gamma=st.floats(0.05, 2))
def test_log_likelihood_agrees_with_naive_loops(data, alpha, beta, gamma):
    """Sufficient-statistic evaluation equals a cell-by-cell transcription."""
    r, rows, edge_bits = data
    states = np.array(rows, dtype=np.uint8)
    all_pairs = [(i, j) for i in range(r) for j in range(i + 1, r)]
    edges = [p for p, keep in zip(all_pairs, edge_bits) if keep]
    L = [0.15 + 0.1 * i for i in range(r)]
    net = make_network(L, edges=edges)
    hist = _history(net, states)
    params = ModelParams(alpha, beta, gamma)

    mine = log_likelihood(hist, params, net)
    reference = naive_log_likelihood(states, net.adjacency, net.likelihoods, alpha, beta, gamma)
    assert mine == pytest.approx(reference, rel=1e-10, abs=1e-10)

    cell_sum = sum(
        transition_log_prob(i, t, hist, params, net)
        for i in range(r)
        for t in range(1, states.shape[1])
    )
    assert mine == pytest.approx(cell_sum, rel=1e-10, abs=1e-10)


@given(data=small_states, seed=st.integers(0, 10))
@settings(max_examples=25)
def test_log_likelihood_is_permutation_equivariant(data, seed):
    r, rows, edge_bits = data
    states = np.array(rows, dtype=np.uint8)
    all_pairs = [(i, j) for i in range(r) for j in range(i + 1, r)]
    edges = [p for p, keep in zip(all_pairs, edge_bits) if keep]
    L = [0.15 + 0.1 * i for i in range(r)]
    params = ModelParams(0.4, 0.6, 0.9)

    perm = np.random.default_rng(seed).permutation(r)
    position = np.argsort(perm)  # new index of each original risk
    edges_p = [(min(position[u], position[v]), max(position[u], position[v])) for u, v in edges]

    net = make_network(L, edges=edges)
    net_p = make_network([L[i] for i in perm], edges=edges_p)
    value = log_likelihood(_history(net, states), params, net)
    value_p = log_likelihood(_history(net_p, states[perm]), params, net_p)
    assert value == pytest.approx(value_p, rel=1e-12, abs=1e-12)


@pytest.fixture(scope="module")
def toy_fit():
    net = make_network([0.25, 0.4, 0.3, 0.35], edges=[(0, 1), (1, 2), (2, 3), (0, 3)])
    truth = ModelParams(0.4, 0.3, 1.2)
    batch = run_cascades(net, net.likelihoods, truth, np.zeros(4, bool), 3000,
                         master_seed=33, run_indices=[0], keep_states=True)
    hist = _history(net, batch.states[0])
    return net, hist, truth, fit(hist, net)


def test_fit_recovers_generator_parameters(toy_fit):
    net, hist, truth, result = toy_fit
    assert result.converged
    assert result.params.alpha == pytest.approx(truth.alpha, rel=0.25)
    assert result.params.beta == pytest.approx(truth.beta, rel=0.4)
    assert result.params.gamma == pytest.approx(truth.gamma, rel=0.15)
    assert result.boundary_flags == ()


def test_fit_is_a_local_maximum(toy_fit):
    net, hist, truth, result = toy_fit
    best = result.log_likelihood
    assert best == pytest.approx(log_likelihood(hist, result.params, net), rel=1e-12)
    theta = np.array(result.params.as_tuple())
    for i in range(3):
        for sign in (-1, 1):
            bumped = theta.copy()
            bumped[i] = max(bumped[i] + sign * 1e-3, 1e-9)
            nearby = log_likelihood(hist, ModelParams(*bumped), net)
            assert nearby <= best + 1e-7


def test_fit_is_deterministic(toy_fit):
    net, hist, _, result = toy_fit
    again = fit(hist, net)
    assert again.params == result.params
    assert again.log_likelihood == result.log_likelihood


def test_fix_beta_pins_the_coupling(toy_fit):
    net, hist, _, _ = toy_fit
    result = fit(hist, net, FitConfig(fix_beta=0.0))
    assert result.params.beta == 0.0
    assert result.converged


def test_degenerate_history_is_flagged_not_failed():
    net = make_network([0.2, 0.3], edges=[(0, 1)])
    hist = _history(net, np.zeros((2, 6)))
    result = fit(hist, net)
    for flag in ("no_activations", "no_recoveries", "beta_unidentified", "gamma_unidentified"):
        assert flag in result.boundary_flags
    assert result.params.alpha <= 1e-3  # driven to the lower boundary


def test_summary_counts_match_hand_tally():
    net = make_network([0.2, 0.3], edges=[(0, 1)])
    #           months:  1  2  3  4
    states = np.array([[0, 1, 1, 0],
                       [1, 0, 0, 1]], dtype=np.uint8)
    s = TransitionSummary(_history(net, states), net)
    assert s.n_activations == 2  # r1 in month 2, r2 in month 4
    assert s.n_recoveries == 2  # r1 in month 4, r2 in month 2
    assert s.n_active_source == 3  # final-month activity is not a source
