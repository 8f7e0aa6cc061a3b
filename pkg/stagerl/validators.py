"""Anti-curriculum validation: support nesting and optimal-policy-set nesting."""

from typing import List, Optional, Sequence, Tuple

from stagerl.data_structures import (
    NestingReport,
    OptimalityViolation,
    PolicySet,
    SupportViolation,
)
from stagerl.guidance import GuidanceStack, support
from stagerl.mdp import DEFAULT_TIE_TOL, optimal_policy_set

# "forward": Pi*_i ⊇ Pi*_{i+1}, i.e. Argmax_{i+1}(s) ⊆ Argmax_i(s).
# "reverse": optima of stage i stay optimal at stage i+1.
DIRECTIONS = ("forward", "reverse")


def check_support_nesting(stack: GuidanceStack) -> NestingReport:
    """Verify supp(R_1) ⊆ supp(R_2) ⊆ ... ⊆ supp(R_N).

    Args:
        stack: Guidance stack to check

    Returns:
        Report fragment listing every state in supp(R_i) but not supp(R_i+1)
    """
    supports = [support(reward, stack.base) for reward in stack.rewards]
    violations: List[SupportViolation] = []
    for i, (inner, outer) in enumerate(zip(supports, supports[1:])):
        for state in sorted(inner - outer):
            violations.append(SupportViolation(i + 1, state))
    return NestingReport(support_violations=tuple(violations), checks=frozenset({"support"}))


def _inclusion_violations(
    stage: int, subset: PolicySet, superset: PolicySet, direction: str
) -> List[OptimalityViolation]:
    extra = subset.allowed & ~superset.allowed
    return [
        OptimalityViolation(stage, int(s), int(a), direction)
        for s, a in zip(*extra.nonzero())
    ]


def check_optimality_nesting(
    stack: GuidanceStack,
    tie_tol: float = DEFAULT_TIE_TOL,
    direction: str = "forward",
) -> NestingReport:
    """Verify nesting of per-stage optimal policy sets.

    With ``direction="forward"`` every action optimal at stage i+1 must be
    optimal at stage i; ``"reverse"`` checks the opposite inclusion and
    ``"both"`` runs the two.

    Args:
        stack: Guidance stack to check
        tie_tol: Tie slack for the optimal action sets
        direction: "forward", "reverse" or "both"

    Returns:
        Report fragment listing (stage, state, action) violations
    """
    directions: Tuple[str, ...] = DIRECTIONS if direction == "both" else (direction,)
    for name in directions:
        if name not in DIRECTIONS:
            raise ValueError(f"Unknown nesting direction: {direction}")

    policy_sets = [
        optimal_policy_set(stack.stage_mdp(i), tie_tol) for i in range(stack.n_stages)
    ]
    violations: List[OptimalityViolation] = []
    for name in directions:
        for i, (current, following) in enumerate(zip(policy_sets, policy_sets[1:])):
            if name == "forward":
                violations.extend(_inclusion_violations(i + 1, following, current, name))
            else:
                violations.extend(_inclusion_violations(i + 1, current, following, name))
    return NestingReport(
        optimality_violations=tuple(violations),
        checks=frozenset({"optimality"}),
        directions=directions,
    )


class NestingValidator:
    """Runs the configured anti-curriculum checks over guidance stacks."""

    def __init__(
        self,
        checks: Sequence[str] = ("support", "optimality"),
        tie_tol: float = DEFAULT_TIE_TOL,
        direction: str = "forward",
    ) -> None:
        """Configure the validator.

        Args:
            checks: Subset of ("support", "optimality")
            tie_tol: Tie slack for optimal action sets
            direction: Optimality inclusion direction
        """
        unknown = set(checks) - {"support", "optimality"}
        if unknown:
            raise ValueError(f"Unknown checks: {sorted(unknown)}")
        self.checks = tuple(checks)
        self.tie_tol = tie_tol
        self.direction = direction

    def validate(
        self, stack: GuidanceStack, support_stack: Optional[GuidanceStack] = None
    ) -> NestingReport:
        """Validate a stack, return the combined report.

        Args:
            stack: Stack whose optimal policy sets are compared
            support_stack: Stack whose supports are compared (defaults to ``stack``)

        Returns:
            Combined nesting report
        """
        report = NestingReport()
        if "support" in self.checks:
            report = report.combine(check_support_nesting(support_stack or stack))
        if "optimality" in self.checks:
            report = report.combine(
                check_optimality_nesting(stack, self.tie_tol, self.direction)
            )
        return report
