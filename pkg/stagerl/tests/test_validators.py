"""Tests for support and optimality nesting validators."""

import numpy as np
import pytest

from stagerl.data_structures import SupportViolation
from stagerl.examples import (
    chain_mdp,
    loitering_model,
    loitering_stack,
    potential_stack,
    random_mdp,
)
from stagerl.gridnav import UP, GridNavEnv, NavState, canonical_layout, compile_nav, make_level
from stagerl.guidance import GuidanceStack, scaled_stack, support
from stagerl.validators import NestingValidator, check_optimality_nesting, check_support_nesting


class TestSupportNesting:
    """Tests for support nesting."""

    def test_growing_supports_pass(self) -> None:
        """Test a stack whose supports grow."""
        mdp = chain_mdp()
        first = np.zeros((3, 2))
        first[1, 0] = 1.0
        second = first.copy()
        second[0, 1] = 0.5
        assert check_support_nesting(GuidanceStack(mdp, (first, second))).support_ok

    def test_shrinking_support_reported(self) -> None:
        """Test that a state leaving the support is listed."""
        mdp = chain_mdp()
        first = np.zeros((3, 2))
        first[0, 0] = 1.0
        second = np.zeros((3, 2))
        second[1, 0] = 1.0
        report = check_support_nesting(GuidanceStack(mdp, (first, second)))
        assert report.support_violations == (SupportViolation(1, 0),)

    def test_single_stage_is_vacuous(self) -> None:
        """Test that one stage always nests."""
        report = NestingValidator().validate(GuidanceStack(chain_mdp(), (chain_mdp().reward,)))
        assert report.ok

    def test_gridnav_components_nest_on_canonical_layout(self) -> None:
        """Test shaped-component support nesting on the level-1 layout."""
        model = compile_nav(GridNavEnv(canonical_layout(5), time_limit=8), full_state=True)
        assert check_support_nesting(model.component_stack()).support_ok

    @pytest.mark.parametrize("level,seed", [(2, 0), (2, 1), (3, 0), (3, 1)])
    def test_gridnav_components_nest_on_sampled_layouts(self, level, seed) -> None:
        """Test shaped-component support nesting on random layouts."""
        env = GridNavEnv(make_level(level, 7, seed), time_limit=6)
        model = compile_nav(env, full_state=True)
        assert check_support_nesting(model.component_stack()).support_ok
        assert check_support_nesting(model.component_stack(include_base=True)).support_ok

    def test_signed_rewards_have_full_support(self) -> None:
        """Test that every non-terminal state is in the support of each signed stage table."""
        model = compile_nav(GridNavEnv(canonical_layout(5), time_limit=8), full_state=True)
        signed = model.guidance_stack()
        non_terminal = frozenset(range(3, model.mdp.n_states))
        assert all(support(r, model.mdp) == non_terminal for r in signed.rewards)


class TestOptimalityNesting:
    """Tests for optimal-policy-set nesting."""

    def test_potential_shaping_passes(self) -> None:
        """Test the positive control on random instances."""
        for seed in range(20):
            mdp = random_mdp(12, 3, seed=seed, n_terminal=1)
            report = check_optimality_nesting(potential_stack(mdp), direction="both")
            assert report.optimality_ok, seed

    def test_scaled_stack_nests_forward(self) -> None:
        """Test that reward scaling never adds optimal actions."""
        mdp = random_mdp(15, 3, seed=5)
        assert check_optimality_nesting(scaled_stack(mdp, (1, 2, 4))).optimality_ok

    def test_loitering_bonus_violates(self) -> None:
        """Test the negative control: a per-step goal bonus rewards loitering."""
        model = loitering_model(5)
        report = check_optimality_nesting(model.guidance_stack((1, 2)))
        assert not report.optimality_ok
        beside_goal = model.index[NavState((2, 1), model.env.time_limit - 1)]
        actions = {v.action for v in report.optimality_violations if v.state == beside_goal}
        assert actions
        assert UP not in actions
        assert all(v.stage == 1 and v.direction == "forward" for v in report.optimality_violations)

    def test_loitering_stack_shortcut(self) -> None:
        """Test the stack helper matches the model."""
        stack = loitering_stack(5)
        assert stack.n_stages == 2
        assert stack.labels == ("stage-1", "stage-2")

    def test_both_directions_reported(self) -> None:
        """Test that direction 'both' records the two directions."""
        report = check_optimality_nesting(loitering_stack(5), direction="both")
        assert report.directions == ("forward", "reverse")
        assert {v.direction for v in report.optimality_violations} <= {"forward", "reverse"}

    def test_unknown_direction(self) -> None:
        """Test direction validation."""
        with pytest.raises(ValueError, match="Unknown nesting direction"):
            check_optimality_nesting(potential_stack(chain_mdp()), direction="sideways")


class TestNestingValidator:
    """Tests for the validator front-end."""

    def test_unknown_check(self) -> None:
        """Test check-name validation."""
        with pytest.raises(ValueError, match="Unknown checks"):
            NestingValidator(checks=("support", "speed"))

    def test_support_only(self) -> None:
        """Test that disabled checks are skipped."""
        report = NestingValidator(checks=("support",)).validate(loitering_stack(5))
        assert report.checks == frozenset({"support"})
        assert report.ok

    def test_separate_support_stack(self) -> None:
        """Test validating supports on a component stack and optima on signed rewards."""
        model = compile_nav(GridNavEnv(canonical_layout(5), time_limit=6), full_state=True)
        report = NestingValidator().validate(model.guidance_stack(), model.component_stack())
        assert report.support_ok
        assert report.checks == frozenset({"support", "optimality"})
