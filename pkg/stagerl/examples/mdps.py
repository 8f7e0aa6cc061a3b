"""Small MDP fixtures with known solutions."""

import numpy as np

from stagerl.data_structures import TabularMDP

ADVANCE, STAY = 0, 1


def chain_mdp(gamma: float = 0.9) -> TabularMDP:
    """Three-state chain s0 -> s1 -> s2 with s2 terminal.

    Entering s2 pays 1. Rewards are paid on the step that takes the action,
    so the arrival reward is credited to (s1, advance) as ``gamma * 1``,
    which gives V* = (gamma**2, gamma, 0) = (0.81, 0.9, 0.0) for gamma 0.9.
    ``STAY`` self-loops with reward 0.

    Returns:
        TabularMDP with actions ADVANCE (0) and STAY (1)
    """
    transition = np.zeros((3, 2, 3))
    transition[0, ADVANCE, 1] = 1.0
    transition[0, STAY, 0] = 1.0
    transition[1, ADVANCE, 2] = 1.0
    transition[1, STAY, 1] = 1.0
    reward = np.zeros((3, 2))
    reward[1, ADVANCE] = gamma * 1.0
    return TabularMDP.from_dense(transition, reward, gamma, terminal_states=[2])


def self_loop_mdp(gamma: float = 0.5, reward: float = 1.0) -> TabularMDP:
    """Single state with a single self-loop action; V* = reward / (1 - gamma)."""
    return TabularMDP.from_dense(np.ones((1, 1, 1)), np.full((1, 1), reward), gamma)


def twin_action_mdp(gamma: float = 0.9) -> TabularMDP:
    """Chain whose two actions have identical effect everywhere."""
    chain = chain_mdp(gamma)
    transition = np.stack([chain.transition_vector(s, ADVANCE) for s in range(3)])
    dense = np.repeat(transition[:, None, :], 2, axis=1)
    reward = np.repeat(chain.reward[:, ADVANCE:ADVANCE + 1], 2, axis=1)
    return TabularMDP.from_dense(dense, reward, gamma, terminal_states=[2])


def zero_reward_mdp(
    n_states: int = 4, n_actions: int = 3, gamma: float = 0.9, seed: int = 0
) -> TabularMDP:
    """Random dynamics with an all-zero reward."""
    mdp = random_mdp(n_states, n_actions, seed=seed, gamma=gamma)
    return mdp.with_reward(np.zeros((n_states, n_actions)))


def random_mdp(
    n_states: int,
    n_actions: int,
    seed: int = 0,
    gamma: float = 0.9,
    branching: int = 3,
    n_terminal: int = 0,
) -> TabularMDP:
    """Random MDP with ``branching`` successors per (s, a) and uniform rewards in [-1, 1].

    The last ``n_terminal`` states are absorbing.
    """
    rng = np.random.default_rng(seed)
    width = min(branching, n_states)
    next_states = np.empty((n_states, n_actions, width), dtype=np.int64)
    probs = rng.dirichlet(np.ones(width), size=(n_states, n_actions))
    for s in range(n_states):
        for a in range(n_actions):
            next_states[s, a] = rng.choice(n_states, size=width, replace=False)
    reward = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    terminals = range(n_states - n_terminal, n_states)
    for s in terminals:
        next_states[s] = s
        probs[s] = 1.0 / width
        reward[s] = 0.0
    return TabularMDP(next_states, probs, reward, gamma, frozenset(terminals))
