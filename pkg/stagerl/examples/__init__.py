"""Ready-made MDPs and guidance stacks."""

from stagerl.examples.mdps import (
    chain_mdp,
    random_mdp,
    self_loop_mdp,
    twin_action_mdp,
    zero_reward_mdp,
)
from stagerl.examples.stacks import loitering_model, loitering_stack, potential_stack

__all__ = [
    "chain_mdp",
    "loitering_model",
    "loitering_stack",
    "potential_stack",
    "random_mdp",
    "self_loop_mdp",
    "twin_action_mdp",
    "zero_reward_mdp",
]
