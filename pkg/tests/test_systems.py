import warnings

import numpy as np
import pytest

import lqconsensus as lq

from conftest import chain_graph, ring_graph


def two_agent_single_edge():
    A = np.array([[0.9, 0.1], [0.0, 1.05]])
    B = np.array([[1.0], [0.3]])
    dyn = lq.AgentDynamics(A, (B, B))
    W = np.zeros((2, 2))
    W[0, 1] = 1.0
    g = lq.DirectedGraph(W)
    w = lq.CostWeights(np.eye(2), (np.eye(1), np.eye(1)))
    return dyn, g, w


def test_two_agent_single_edge_structure():
    dyn, g, w = two_agent_single_edge()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sys_e = lq.build_error_system(dyn, g, w)
    assert sys_e.ledger.entries == ((0, 1),)
    np.testing.assert_array_equal(sys_e.A_tilde, dyn.A)
    np.testing.assert_array_equal(sys_e.B_bar_list[0], dyn.B_list[0])
    np.testing.assert_array_equal(sys_e.B_bar_list[1], -dyn.B_list[1])


def test_not_strongly_connected_warns():
    dyn, g, w = two_agent_single_edge()
    with pytest.warns(UserWarning, match="strongly connected"):
        lq.build_error_system(dyn, g, w)


def test_example1_measurement_plan_accepted():
    A = np.array([[1.1, 0.3], [0.0, 0.8]])
    B = np.array([[1.0], [0.5]])
    dyn = lq.AgentDynamics(A, tuple([B] * 4))
    g = chain_graph(4)
    w = lq.CostWeights(np.eye(2), tuple([np.eye(1)] * 4))
    H = [np.zeros((2, 6)) for _ in range(4)]
    H[0][:, 0:2] = np.eye(2)
    H[1][:, 2:4] = np.eye(2)
    H[2][:, 2:4] = np.eye(2)  # deliberately the same block as agent 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sys_e = lq.build_error_system(dyn, g, w, measurement_plan=H)
    np.testing.assert_array_equal(sys_e.H_list[2], H[2])
    assert sys_e.H_list[3].shape == (2, 6)
    assert not sys_e.H_list[3].any()


def test_measurement_plan_dimension_rejected():
    dyn, g, w = two_agent_single_edge()
    bad = [np.eye(2), np.ones((1, 3))]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError, match="columns"):
            lq.build_error_system(dyn, g, w, measurement_plan=bad)


def test_error_system_matches_per_agent_simulation():
    # oracle: simulate each agent directly and stack the pairwise errors
    rng = np.random.default_rng(5)
    A = np.array([[1.0, 0.2], [-0.1, 0.9]])
    dyn = lq.AgentDynamics(A, tuple(rng.standard_normal((2, 1)) for _ in range(3)))
    g = ring_graph(3)
    w = lq.CostWeights(np.eye(2), tuple([np.eye(1)] * 3))
    sys_e = lq.build_error_system(dyn, g, w)

    x = rng.standard_normal((3, 2))
    e = sys_e.ledger.stack_errors(x)
    for _ in range(20):
        u = [rng.standard_normal(1) for _ in range(3)]
        e = sys_e.A_tilde @ e + sum(sys_e.B_bar_list[i] @ u[i] for i in range(3))
        x = np.array([dyn.A @ x[i] + dyn.B_list[i] @ u[i] for i in range(3)])
        np.testing.assert_allclose(e, sys_e.ledger.stack_errors(x), atol=1e-12)


def test_state_system_q_matrix_n3():
    A = np.array([[1.0]])
    dyn = lq.AgentDynamics(A, tuple(np.array([[1.0]]) for _ in range(3)))
    g = ring_graph(3)
    w = lq.CostWeights(np.array([[1.0]]), tuple([np.eye(1)] * 3))
    sys_s = lq.build_state_system(dyn, g, w)
    np.testing.assert_allclose(sys_s.Q_cal, [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    np.testing.assert_array_equal(sys_s.A_tilde, np.eye(3))


def test_state_system_q_matrix_n2_blocks():
    A = np.eye(2)
    dyn = lq.AgentDynamics(A, (np.eye(2), np.eye(2)))
    W = np.zeros((2, 2))
    W[0, 1] = W[1, 0] = 1.0
    g = lq.DirectedGraph(W)
    w = lq.CostWeights(np.eye(2), (np.eye(2), np.eye(2)))
    sys_s = lq.build_state_system(dyn, g, w)
    eye = np.eye(2)
    np.testing.assert_allclose(
        sys_s.Q_cal, np.block([[eye, -eye], [-eye, eye]])
    )


def test_state_quadratic_form_equals_pair_double_sum():
    # oracle: explicit double sum over the complete set of unordered pairs
    rng = np.random.default_rng(9)
    n, N = 2, 4
    M = rng.standard_normal((n, n))
    Q = M @ M.T
    dyn = lq.AgentDynamics(np.eye(n), tuple(rng.standard_normal((n, 1)) for _ in range(N)))
    g = ring_graph(N)
    w = lq.CostWeights(Q, tuple([np.eye(1)] * N))
    sys_s = lq.build_state_system(dyn, g, w)
    for _ in range(20):
        x = rng.standard_normal((N, n))
        X = x.ravel()
        double_sum = sum(
            (x[i] - x[j]) @ Q @ (x[i] - x[j])
            for i in range(N)
            for j in range(i + 1, N)
        )
        assert X @ sys_s.Q_cal @ X == pytest.approx(double_sum, rel=1e-12, abs=1e-12)


def test_q_matrices_psd_and_consensus_kernel():
    rng = np.random.default_rng(21)
    n, N = 3, 4
    M = rng.standard_normal((n, n))
    Q = M @ M.T
    dyn = lq.AgentDynamics(np.eye(n), tuple(rng.standard_normal((n, 2)) for _ in range(N)))
    g = ring_graph(N)
    w = lq.CostWeights(Q, tuple([np.eye(2)] * N))
    sys_e = lq.build_error_system(dyn, g, w)
    sys_s = lq.build_state_system(dyn, g, w)
    assert np.linalg.eigvalsh(sys_e.Q_tilde).min() >= -1e-10
    assert np.linalg.eigvalsh(sys_s.Q_cal).min() >= -1e-10
    for _ in range(5):
        v = rng.standard_normal(n)
        np.testing.assert_allclose(
            sys_s.Q_cal @ np.tile(v, N), 0.0, atol=1e-10
        )


def test_bbar_nonzero_row_blocks_count():
    rng = np.random.default_rng(2)
    W = np.zeros((4, 4))
    W[0, 1] = W[1, 2] = W[2, 3] = W[3, 0] = W[0, 2] = 1.0
    g = lq.DirectedGraph(W)
    n = 2
    dyn = lq.AgentDynamics(np.eye(n), tuple(rng.standard_normal((n, 1)) for _ in range(4)))
    w = lq.CostWeights(np.eye(n), tuple([np.eye(1)] * 4))
    sys_e = lq.build_error_system(dyn, g, w)
    ledger = sys_e.ledger
    for i, Bi in enumerate(sys_e.B_bar_list):
        expected = sum(1 for (p, q) in ledger.entries if p == i or q == i)
        nonzero_blocks = sum(
            1
            for t in range(ledger.n_entries)
            if np.any(Bi[ledger.entry_slice(t)] != 0)
        )
        assert nonzero_blocks == expected


def test_error_cost_equivalence_trivials(bench1):
    sys_e = bench1["sys"]
    assert lq.error_cost_equivalence_check(sys_e, np.zeros((1, sys_e.dim))) == 0.0

    # single edge, Q = 1, e = 2 -> both cost routes give 4
    A = np.array([[1.0]])
    dyn = lq.AgentDynamics(A, (np.array([[1.0]]), np.array([[1.0]])))
    W = np.zeros((2, 2))
    W[0, 1] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sys_1 = lq.build_error_system(
            dyn, lq.DirectedGraph(W),
            lq.CostWeights(np.array([[1.0]]), (np.eye(1), np.eye(1))),
        )
    e = np.array([[2.0]])
    assert float(e[0] @ sys_1.Q_tilde @ e[0]) == pytest.approx(4.0)
    assert lq.error_cost_equivalence_check(sys_1, e) == pytest.approx(0.0, abs=1e-12)


def test_error_cost_equivalence_random():
    rng = np.random.default_rng(77)
    W = (rng.random((4, 4)) < 0.6) * 1.0
    np.fill_diagonal(W, 0.0)
    W[0, 1] = 1.0
    g = lq.DirectedGraph(W)
    n = 2
    M = rng.standard_normal((n, n))
    dyn = lq.AgentDynamics(np.eye(n), tuple(rng.standard_normal((n, 1)) for _ in range(4)))
    w = lq.CostWeights(M @ M.T, tuple([np.eye(1)] * 4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sys_e = lq.build_error_system(dyn, g, w)
    samples = rng.standard_normal((50, sys_e.dim))
    assert lq.error_cost_equivalence_check(sys_e, samples) < 1e-10


def test_cost_weight_validation():
    with pytest.raises(ValueError, match="positive semidefinite"):
        lq.CostWeights(np.array([[-1.0]]), (np.eye(1),))
    with pytest.raises(ValueError, match="positive definite"):
        lq.CostWeights(np.eye(1), (np.zeros((1, 1)),))


def test_duplicate_errors_kept_as_distinct_components():
    # both edges of a 2-cycle create e_12 and e_21 as separate entries
    A = np.array([[1.0]])
    dyn = lq.AgentDynamics(A, (np.array([[1.0]]), np.array([[1.0]])))
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    g = lq.DirectedGraph(W)
    w = lq.CostWeights(np.array([[1.0]]), (np.eye(1), np.eye(1)))
    sys_e = lq.build_error_system(dyn, g, w)
    assert sys_e.ledger.entries == ((0, 1), (1, 0))
    assert sys_e.dim == 2
