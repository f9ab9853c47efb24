import numpy as np
import pytest

import lqconsensus as lq


def dare_rhs(A, B, Q, R, P):
    """Defining identity right-hand side, evaluated independently."""
    W = B.T @ P @ A
    return A.T @ P @ A + Q - W.T @ np.linalg.solve(R + B.T @ P @ B, W)


def random_instance(rng, n_max=6, m_max=5):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.3, 1.2) / max(np.abs(np.linalg.eigvals(A)).max(), 1e-6)
    B = rng.standard_normal((n, m))
    M = rng.standard_normal((n, n))
    Q = M @ M.T + 0.1 * np.eye(n)
    Rm = rng.standard_normal((m, m))
    R = Rm @ Rm.T + 0.5 * np.eye(m)
    return lq.DareProblem(A, B, Q, R)


def test_scalar_golden_ratio():
    p = lq.DareProblem([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    sol = lq.solve_dare(p)
    golden = (1 + np.sqrt(5)) / 2
    assert sol.P[0, 0] == pytest.approx(golden, abs=1e-9)
    assert sol.gain[0, 0] == pytest.approx(-1 / golden, abs=1e-9)
    assert sol.is_positive_definite


def test_zero_dynamics_gives_P_equal_Q():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    p = lq.DareProblem(np.zeros((2, 2)), np.eye(2), Q, np.eye(2))
    sol = lq.solve_dare(p)
    np.testing.assert_allclose(sol.P, Q, atol=1e-12)


def test_residual_defining_identity_random():
    rng = np.random.default_rng(123)
    for _ in range(10):
        p = random_instance(rng)
        sol = lq.solve_dare(p, tol=1e-11)
        gap = np.linalg.norm(sol.P - dare_rhs(p.A, p.B, p.Q, p.R, sol.P), "fro")
        assert gap <= 1e-10
        assert sol.residual <= 1e-11
        np.testing.assert_allclose(sol.P, sol.P.T, atol=1e-10)


def test_gap_monotone_after_burn_in():
    # property of the fixed-point iteration itself, tracked explicitly
    rng = np.random.default_rng(7)
    p = random_instance(rng, n_max=4, m_max=2)
    P = p.Q.copy()
    gaps = []
    for _ in range(60):
        Pn = dare_rhs(p.A, p.B, p.Q, p.R, P)
        gaps.append(np.linalg.norm(Pn - P, "fro"))
        P = 0.5 * (Pn + Pn.T)
    tail = np.array(gaps[5:])
    assert np.all(np.diff(tail) <= 1e-12)


def test_closed_loop_stable_when_pd():
    rng = np.random.default_rng(99)
    for _ in range(10):
        p = random_instance(rng)
        sol = lq.solve_dare(p)
        if sol.is_positive_definite:
            assert lq.spectral_radius(lq.closed_loop(p, sol.gain)) < 1.0


def test_feedback_gain_formula():
    rng = np.random.default_rng(31)
    p = random_instance(rng)
    sol = lq.solve_dare(p)
    K = lq.feedback_gain(p, sol)
    expected = -np.linalg.solve(
        p.R + p.B.T @ sol.P @ p.B, p.B.T @ sol.P @ p.A
    )
    np.testing.assert_allclose(K, expected, atol=1e-12)
    np.testing.assert_allclose(sol.gain, expected, atol=1e-12)


def test_cost_matches_quadratic_value():
    # x(s)' P x(s) equals the summed closed-loop stage cost under u = Kx
    rng = np.random.default_rng(17)
    p = random_instance(rng, n_max=4, m_max=3)
    sol = lq.solve_dare(p)
    K = sol.gain
    x = rng.standard_normal(p.A.shape[0])
    expected = float(x @ sol.P @ x)
    cost = 0.0
    for _ in range(10000):
        u = K @ x
        cost += float(x @ p.Q @ x + u @ p.R @ u)
        x = p.A @ x + p.B @ u
        if np.linalg.norm(x) < 1e-10:
            break
    assert cost == pytest.approx(expected, rel=1e-6)


def test_gain_optimality_spot_check():
    rng = np.random.default_rng(55)
    p = random_instance(rng, n_max=3, m_max=2)
    sol = lq.solve_dare(p)

    def simulated_cost(K, x0):
        x, cost = x0.copy(), 0.0
        for _ in range(20000):
            u = K @ x
            cost += float(x @ p.Q @ x + u @ p.R @ u)
            x = p.A @ x + p.B @ u
            if np.linalg.norm(x) < 1e-10:
                break
        return cost

    x0 = rng.standard_normal(p.A.shape[0])
    base = simulated_cost(sol.gain, x0)
    for _ in range(20):
        delta = rng.standard_normal(sol.gain.shape)
        K_pert = sol.gain + 1e-3 * delta
        if lq.spectral_radius(lq.closed_loop(p, K_pert)) >= 1.0:
            continue
        assert simulated_cost(K_pert, x0) >= base - 1e-8


def test_slice_agent_gain():
    K = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(
        lq.slice_agent_gain(K, 0, [1, 1, 2]), K[0:1]
    )
    np.testing.assert_array_equal(
        lq.slice_agent_gain(K, 2, [1, 1, 2]), K[2:4]
    )
    blocks = lq.agent_gain_blocks(K, [1, 1, 2])
    np.testing.assert_array_equal(np.vstack(blocks), K)
    with pytest.raises(IndexError):
        lq.slice_agent_gain(K, 3, [1, 1, 2])


def test_slice_restack_random():
    rng = np.random.default_rng(4)
    m_list = [2, 1, 3]
    K = rng.standard_normal((6, 5))
    np.testing.assert_array_equal(
        np.vstack(lq.agent_gain_blocks(K, m_list)), K
    )


def test_spectral_radius_trivials():
    assert lq.spectral_radius(np.eye(3)) == pytest.approx(1.0)
    assert lq.spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(0.0)
    assert lq.spectral_radius(np.diag([0.9, -0.95])) == pytest.approx(0.95)


def test_divergent_instance_raises():
    # uncontrollable unstable mode: iterates blow up, never silently return
    p = lq.DareProblem([[2.0]], [[0.0]], [[1.0]], [[1.0]])
    with pytest.raises((lq.NonConvergence, lq.IndefiniteIterate)):
        lq.solve_dare(p, max_iter=5000)


def test_non_convergence_raises_with_payload():
    p = lq.DareProblem([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(lq.NonConvergence) as exc:
        lq.solve_dare(p, tol=1e-15, max_iter=3)
    assert exc.value.iterations == 3
    assert exc.value.residual > 0


def test_problem_validation():
    with pytest.raises(ValueError, match="positive definite"):
        lq.DareProblem([[1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(ValueError, match="square"):
        lq.DareProblem(np.ones((2, 3)), np.ones((2, 1)), np.eye(2), np.eye(1))
    with pytest.raises(ValueError, match="rows"):
        lq.DareProblem(np.eye(2), np.ones((3, 1)), np.eye(2), np.eye(1))
