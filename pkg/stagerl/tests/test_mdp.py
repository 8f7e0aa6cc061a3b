"""Tests for MDP data structures and the dynamic-programming oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stagerl.data_structures import (
    DeterministicPolicy,
    NestingReport,
    OptimalityViolation,
    PolicySet,
    StageSchedule,
    SupportViolation,
    TabularMDP,
    ValueFunction,
)
from stagerl.examples import chain_mdp, random_mdp, self_loop_mdp, twin_action_mdp, zero_reward_mdp
from stagerl.examples.mdps import ADVANCE, STAY
from stagerl.mdp import (
    bellman_residual,
    greedy_policy,
    is_eps_converged,
    optimal_policy_set,
    policy_evaluation,
    policy_evaluation_exact,
    q_values,
    value_iteration,
)


class TestTabularMDP:
    """Tests for TabularMDP construction."""

    def test_chain_shape(self) -> None:
        """Test dimensions and terminal mask of the chain fixture."""
        mdp = chain_mdp()
        assert mdp.n_states == 3
        assert mdp.n_actions == 2
        assert mdp.terminal_states == frozenset({2})
        assert list(mdp.terminal_mask) == [False, False, True]
        assert mdp.is_deterministic

    def test_probabilities_must_sum_to_one(self) -> None:
        """Test that unnormalized rows are rejected."""
        with pytest.raises(ValueError, match="sum to"):
            TabularMDP(
                np.zeros((1, 1, 2), dtype=int), np.array([[[0.5, 0.4]]]), np.zeros((1, 1)), 0.9
            )

    def test_gamma_range(self) -> None:
        """Test that gamma = 1 is rejected."""
        with pytest.raises(ValueError, match="gamma must lie"):
            self_loop_mdp(gamma=1.0)

    def test_terminal_must_self_loop(self) -> None:
        """Test that a terminal state with outgoing mass is rejected."""
        with pytest.raises(ValueError, match="self-loop"):
            TabularMDP(
                np.array([[[1]], [[1]]]),
                np.ones((2, 1, 1)),
                np.zeros((2, 1)),
                0.9,
                frozenset({0}),
            )

    def test_from_dense_forces_terminal_rows(self) -> None:
        """Test that from_dense turns terminal rows into zero-reward self-loops."""
        transition = np.zeros((2, 1, 2))
        transition[:, 0, 0] = 1.0
        mdp = TabularMDP.from_dense(transition, np.ones((2, 1)), 0.5, terminal_states=[1])
        assert mdp.transition_vector(1, 0).tolist() == [0.0, 1.0]
        assert mdp.reward[1, 0] == 0.0
        assert mdp.reward[0, 0] == 1.0

    def test_arrays_are_read_only(self) -> None:
        """Test that stored tables cannot be mutated."""
        mdp = chain_mdp()
        with pytest.raises(ValueError):
            mdp.reward[0, 0] = 5.0

    def test_with_reward_keeps_dynamics(self) -> None:
        """Test swapping the reward table."""
        mdp = chain_mdp()
        other = mdp.with_reward(np.ones((3, 2)) * np.array([[1], [1], [0]]))
        assert np.array_equal(other.next_states, mdp.next_states)
        assert other.reward[0, STAY] == 1.0


class TestPolicyTypes:
    """Tests for policies and policy sets."""

    def test_policy_check(self) -> None:
        """Test that out-of-range actions are reported."""
        with pytest.raises(ValueError, match="action 2"):
            DeterministicPolicy(np.array([0, 2, 0])).check(chain_mdp())
        with pytest.raises(ValueError, match="covers 2 states"):
            DeterministicPolicy(np.array([0, 0])).check(chain_mdp())

    def test_policy_equality_and_hash(self) -> None:
        """Test value semantics of deterministic policies."""
        a = DeterministicPolicy(np.array([0, 1, 0]))
        b = DeterministicPolicy([0, 1, 0])
        assert a == b
        assert hash(a) == hash(b)
        assert a != DeterministicPolicy([1, 1, 0])

    def test_policy_set_requires_an_action_per_state(self) -> None:
        """Test that an empty action set is rejected."""
        with pytest.raises(ValueError, match="State 1 has no allowed action"):
            PolicySet(np.array([[True, False], [False, False]]))

    def test_policy_set_contains(self) -> None:
        """Test membership of deterministic policies."""
        allowed = PolicySet(np.array([[True, False], [True, True]]))
        assert allowed.actions(1) == frozenset({0, 1})
        assert allowed.contains(DeterministicPolicy([0, 1]))
        assert not allowed.contains(DeterministicPolicy([1, 1]))
        assert not allowed.contains(DeterministicPolicy([0]))

    def test_value_function_rejects_nan(self) -> None:
        """Test that non-finite values are rejected."""
        with pytest.raises(ValueError, match="finite"):
            ValueFunction(np.array([0.0, np.nan]))


class TestStageSchedule:
    """Tests for stage schedules."""

    def test_half_open_intervals(self) -> None:
        """Test that the stage switches exactly at each transition."""
        schedule = StageSchedule((10, 20, 30))
        assert [schedule.stage_index(t) for t in (0, 9, 10, 19, 20, 29)] == [0, 0, 1, 1, 2, 2]

    def test_last_stage_held_after_final_transition(self) -> None:
        """Test that the last stage stays active past t_N."""
        schedule = StageSchedule((10, 20, 30))
        assert schedule.stage_index(30) == 2
        assert schedule.stage_index(10_000) == 2

    def test_window_and_label(self) -> None:
        """Test stage windows and label round trip."""
        schedule = StageSchedule((10, 20, 30))
        assert schedule.window(0) == (0, 10)
        assert schedule.window(1) == (10, 20)
        assert schedule.label == "10-20-30"
        assert StageSchedule.from_label("10-20-30") == schedule

    @pytest.mark.parametrize(
        "transitions,message",
        [((), "at least one"), ((0, 5), "must be positive"), ((5, 5), "strictly increase")],
    )
    def test_invalid_schedules(self, transitions, message) -> None:
        """Test schedule validation."""
        with pytest.raises(ValueError, match=message):
            StageSchedule(transitions)

    def test_negative_step(self) -> None:
        """Test that negative steps are rejected."""
        with pytest.raises(ValueError, match="non-negative"):
            StageSchedule((5,)).stage_index(-1)

    @settings(max_examples=50, deadline=None)
    @given(st.sets(st.integers(1, 10_000), min_size=1, max_size=5), st.integers(0, 12_000))
    def test_stage_index_matches_windows(self, points, step) -> None:
        """Test that the active stage is the one whose window holds the step."""
        schedule = StageSchedule(tuple(sorted(points)))
        index = schedule.stage_index(step)
        start, end = schedule.window(index)
        assert start <= step
        assert step < end or index == schedule.n_stages - 1


class TestNestingReport:
    """Tests for nesting reports."""

    def test_empty_report_is_ok(self) -> None:
        """Test flags of a report without violations."""
        report = NestingReport(checks=frozenset({"support"}))
        assert report.ok
        assert "Support nesting: ok" in report.to_text()

    def test_combine_and_render(self) -> None:
        """Test merging fragments and rendering violations with labels."""
        support = NestingReport((SupportViolation(1, 0),), checks=frozenset({"support"}))
        optimality = NestingReport(
            optimality_violations=(OptimalityViolation(2, 1, 3, "forward"),),
            checks=frozenset({"optimality"}),
            directions=("forward",),
        )
        report = support.combine(optimality)
        assert not report.support_ok
        assert not report.optimality_ok
        assert report.checks == frozenset({"support", "optimality"})
        text = report.to_text(["a", "b"])
        assert "stage 1 -> 2: state a" in text
        assert "[forward] stage 2 -> 3: state b, action 3" in text


class TestValueIteration:
    """Tests for the value-iteration oracle."""

    def test_chain_values(self) -> None:
        """Test the hand-computed chain solution."""
        values = value_iteration(chain_mdp(0.9))
        assert values.values == pytest.approx([0.81, 0.9, 0.0], abs=1e-9)

    def test_self_loop_closed_form(self) -> None:
        """Test V* = r / (1 - gamma) on a single self-loop."""
        assert value_iteration(self_loop_mdp(0.5, 1.0))[0] == pytest.approx(2.0, abs=1e-8)

    def test_zero_reward(self) -> None:
        """Test that an all-zero reward gives zero values."""
        assert np.all(value_iteration(zero_reward_mdp()).values == 0.0)

    def test_residual_below_tolerance(self) -> None:
        """Test the Bellman residual bound of the result."""
        mdp = random_mdp(20, 3, seed=4)
        values = value_iteration(mdp, tol=1e-9)
        assert bellman_residual(mdp, values.values) <= 1e-9

    def test_tolerance_must_be_positive(self) -> None:
        """Test tol validation."""
        with pytest.raises(ValueError, match="tol must be positive"):
            value_iteration(chain_mdp(), tol=0.0)

    def test_iteration_cap(self) -> None:
        """Test that hitting the sweep cap raises."""
        with pytest.raises(RuntimeError, match="did not reach"):
            value_iteration(self_loop_mdp(0.99), max_iterations=3)

    def test_bit_identical_reruns(self) -> None:
        """Test determinism of the oracle."""
        mdp = random_mdp(15, 4, seed=9)
        assert np.array_equal(value_iteration(mdp).values, value_iteration(mdp).values)

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(1, 50), st.integers(1, 4), st.integers(0, 10_000), st.integers(0, 2)
    )
    def test_greedy_policy_attains_optimal_values(
        self, n_states, n_actions, seed, n_terminal
    ) -> None:
        """Test that the greedy policy of V* evaluates back to V*."""
        mdp = random_mdp(n_states, n_actions, seed=seed, n_terminal=min(n_terminal, n_states))
        v_star = value_iteration(mdp)
        v_pi = policy_evaluation_exact(mdp, greedy_policy(mdp, v_star.values))
        assert v_pi.max_abs_diff(v_star) < 1e-6


class TestPolicyEvaluation:
    """Tests for the two policy-evaluation implementations."""

    def test_chain_stay_policy(self) -> None:
        """Test that standing still is worth nothing."""
        policy = DeterministicPolicy([STAY, STAY, STAY])
        assert policy_evaluation(chain_mdp(), policy).values.tolist() == [0.0, 0.0, 0.0]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 30), st.integers(1, 3), st.integers(0, 10_000))
    def test_iterative_matches_direct_solve(self, n_states, n_actions, seed) -> None:
        """Test agreement of iterative and sparse direct evaluation."""
        mdp = random_mdp(n_states, n_actions, seed=seed, n_terminal=1)
        policy = DeterministicPolicy(np.random.default_rng(seed).integers(n_actions, size=n_states))
        iterative = policy_evaluation(mdp, policy)
        exact = policy_evaluation_exact(mdp, policy)
        assert iterative.max_abs_diff(exact) < 1e-7

    def test_policy_must_fit(self) -> None:
        """Test that a policy of the wrong size is rejected."""
        with pytest.raises(ValueError, match="covers"):
            policy_evaluation(chain_mdp(), DeterministicPolicy([0]))


class TestOptimalPolicySet:
    """Tests for argmax sets and eps-convergence."""

    def test_chain_argmax_sets(self) -> None:
        """Test that only advancing is optimal outside the terminal."""
        allowed = optimal_policy_set(chain_mdp())
        assert allowed.actions(0) == frozenset({ADVANCE})
        assert allowed.actions(1) == frozenset({ADVANCE})
        assert allowed.actions(2) == frozenset({ADVANCE, STAY})

    def test_twin_actions_both_optimal(self) -> None:
        """Test that tied actions are both kept."""
        allowed = optimal_policy_set(twin_action_mdp())
        assert all(allowed.actions(s) == frozenset({0, 1}) for s in range(3))

    def test_zero_reward_everything_optimal(self) -> None:
        """Test that every action is optimal without reward."""
        allowed = optimal_policy_set(zero_reward_mdp(n_actions=3))
        assert bool(np.all(allowed.allowed))

    def test_greedy_policy_is_in_set(self) -> None:
        """Test that the greedy policy belongs to the argmax set."""
        mdp = random_mdp(25, 4, seed=3)
        v_star = value_iteration(mdp)
        assert optimal_policy_set(mdp, v_star=v_star).contains(greedy_policy(mdp, v_star.values))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 10_000))
    def test_any_choice_from_the_sets_is_near_optimal(self, n_states, n_actions, seed) -> None:
        """Test that per-state picks from the argmax sets lose at most tie_tol / (1 - gamma)."""
        mdp = random_mdp(n_states, n_actions, seed=seed, n_terminal=1)
        v_star = value_iteration(mdp)
        tie_tol = 0.05
        allowed = optimal_policy_set(mdp, tie_tol, v_star)
        rng = np.random.default_rng(seed)
        for _ in range(5):
            policy = DeterministicPolicy(
                [int(rng.choice(sorted(allowed.actions(s)))) for s in range(n_states)]
            )
            v_pi = policy_evaluation_exact(mdp, policy)
            assert v_pi.max_abs_diff(v_star) <= tie_tol / (1.0 - mdp.gamma) + 1e-6

    def test_q_values_shape(self) -> None:
        """Test Q table shape."""
        mdp = random_mdp(6, 2, seed=1)
        assert q_values(mdp, np.zeros(6)).shape == (6, 2)

    def test_tie_tol_must_be_positive(self) -> None:
        """Test tie_tol validation."""
        with pytest.raises(ValueError, match="tie_tol"):
            optimal_policy_set(chain_mdp(), tie_tol=0.0)

    def test_eps_convergence(self) -> None:
        """Test eps-convergence of optimal and idle policies on the chain."""
        mdp = chain_mdp()
        v_star = value_iteration(mdp)
        assert is_eps_converged(mdp, DeterministicPolicy([ADVANCE, ADVANCE, STAY]), v_star, 0.1)
        assert not is_eps_converged(mdp, DeterministicPolicy([STAY, STAY, STAY]), v_star, 0.1)
        # Advancing only from s1 loses gamma^2 at s0.
        assert not is_eps_converged(mdp, DeterministicPolicy([STAY, ADVANCE, STAY]), v_star, 0.5)

    def test_eps_must_be_finite(self) -> None:
        """Test eps validation."""
        v_star = value_iteration(chain_mdp())
        with pytest.raises(ValueError, match="eps must be finite"):
            is_eps_converged(chain_mdp(), DeterministicPolicy([0, 0, 0]), v_star, float("inf"))
