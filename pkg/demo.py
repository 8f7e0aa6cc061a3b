#!/usr/bin/env python
"""Quick demo of stagerl package capabilities."""

import argparse

from stagerl import Experiment
from stagerl.examples import chain_mdp, loitering_stack, potential_stack
from stagerl.gridnav import canonical_layout, make_level
from stagerl.mdp import optimal_policy_set, value_iteration
from stagerl.validators import NestingValidator
from stagerl.visualizers import GridRenderer

SMALL = {
    "env": {"level": 1, "grid_size": 5, "time_limit": 8},
    "schedule": {"transitions": [[100, 300, 500], [200, 400, 600]]},
    "trainer": {"total_steps": 800, "snapshot_every": 50, "learning_rate": 0.5, "seeds": [0, 1]},
    "measurement": {"checks": ["support"], "eps": 0.5},
}


def show_basic_demo():
    """Show layouts, an exact solve and the nesting checks."""
    print("=" * 70)
    print("STAGERL DEMO - Multi-stage reward guidance")
    print("=" * 70)
    print()

    print("1. Layouts")
    print("-" * 70)
    renderer = GridRenderer()
    print(renderer.render_layout(canonical_layout(7)))
    print()
    print(renderer.render_layout(make_level(3, 7, seed=2)))
    print()

    print("2. Exact solve of the three-state chain")
    print("-" * 70)
    mdp = chain_mdp()
    values = value_iteration(mdp)
    print(f"V* = {[round(v, 3) for v in values.values]}")
    policy_set = optimal_policy_set(mdp, v_star=values)
    print(f"optimal actions: {[sorted(policy_set.actions(s)) for s in range(mdp.n_states)]}")
    print()

    print("3. Nesting checks")
    print("-" * 70)
    validator = NestingValidator()
    print("potential shaping:", "ok" if validator.validate(potential_stack(mdp)).ok else "fails")
    report = validator.validate(loitering_stack(5))
    print(report.to_text())
    print()


def show_training():
    """Train once and sweep two schedules on a small task."""
    experiment = Experiment.from_dict(SMALL)
    print(experiment.describe())
    print()

    print("1. One training run")
    print("-" * 70)
    result = experiment.train()
    print(f"convergence step: {result.convergence_step}")
    print(f"final success: {result.curve[-1][1]:.2f}")
    print()

    print("2. Sweep")
    print("-" * 70)
    outcome = experiment.sweep()
    for summary in outcome.result.summaries():
        print(
            f"  {summary.label:>20}  L = {summary.mean_l:.1f}  "
            f"success = {summary.mean_success:.2f}"
        )
    print()
    if outcome.critical is None:
        print("No schedule converged")
    else:
        print(f"critical period: {outcome.critical.label}")
    if outcome.comparison is not None:
        print()
        print(outcome.comparison.to_text())


def main():
    """Main entry point for demo script."""
    parser = argparse.ArgumentParser(
        description="Demo script for the stagerl package",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python demo.py              # Layouts, exact solve and nesting checks
  python demo.py --training   # A training run and a small sweep
  python demo.py --all        # Show everything
        """
    )

    parser.add_argument(
        "--training",
        action="store_true",
        help="Train on a small task and sweep two schedules"
    )

    parser.add_argument(
        "--all",
        action="store_true",
        help="Show all demos"
    )

    args = parser.parse_args()

    if args.all:
        show_basic_demo()
        print("\n\n")
        show_training()
    elif args.training:
        show_training()
    else:
        show_basic_demo()


if __name__ == "__main__":
    main()
