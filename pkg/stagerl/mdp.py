"""Exact dynamic-programming oracle for tabular MDPs.

All routines are pure functions of their inputs and use a fixed (Jacobi)
update order, so identical inputs give bit-identical outputs.
"""

import math
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from stagerl.data_structures import (
    DeterministicPolicy,
    PolicySet,
    TabularMDP,
    ValueFunction,
)

DEFAULT_TOL = 1e-9
DEFAULT_TIE_TOL = 1e-6
MAX_ITERATIONS = 1_000_000


def q_values(mdp: TabularMDP, values: np.ndarray) -> np.ndarray:
    """Action values R(s, a) + gamma * E[V(s')] for every (s, a).

    Args:
        mdp: The MDP
        values: State values, length S

    Returns:
        Array of shape (S, A)
    """
    return mdp.reward + mdp.gamma * mdp.expected(values)


def bellman_residual(mdp: TabularMDP, values: np.ndarray) -> float:
    """Sup-norm Bellman optimality residual max_s |TV(s) - V(s)|."""
    return float(np.max(np.abs(q_values(mdp, values).max(axis=1) - np.asarray(values))))


def greedy_policy(mdp: TabularMDP, values: np.ndarray) -> DeterministicPolicy:
    """Greedy policy w.r.t. state values; ties go to the lowest action id."""
    return DeterministicPolicy(np.argmax(q_values(mdp, values), axis=1))


def value_iteration(
    mdp: TabularMDP, tol: float = DEFAULT_TOL, max_iterations: int = MAX_ITERATIONS
) -> ValueFunction:
    """Compute V* by value iteration.

    Iterates until gamma * ||V_k+1 - V_k|| <= tol, which bounds the Bellman
    residual of the returned vector by tol.

    Args:
        mdp: The MDP
        tol: Bound on the sup-norm Bellman residual of the result
        max_iterations: Safety cap on sweeps

    Returns:
        Optimal value function

    Raises:
        ValueError: If tol is not positive
        RuntimeError: If the iteration cap is hit
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be positive: {tol}")
    values = np.zeros(mdp.n_states)
    for _ in range(max_iterations):
        updated = q_values(mdp, values).max(axis=1)
        delta = float(np.max(np.abs(updated - values)))
        values = updated
        if mdp.gamma * delta <= tol:
            return ValueFunction(values)
    raise RuntimeError(f"Value iteration did not reach tol={tol} in {max_iterations} sweeps")


def _policy_tables(mdp: TabularMDP, policy: DeterministicPolicy):
    policy.check(mdp)
    states = np.arange(mdp.n_states)
    return (
        mdp.reward[states, policy.actions],
        mdp.next_states[states, policy.actions],
        mdp.probs[states, policy.actions],
    )


def policy_evaluation(
    mdp: TabularMDP,
    policy: DeterministicPolicy,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_ITERATIONS,
) -> ValueFunction:
    """Compute V^pi of a deterministic policy by iterative evaluation.

    Args:
        mdp: The MDP
        policy: Policy to evaluate
        tol: Bound on the sup-norm residual of the fixed-policy backup
        max_iterations: Safety cap on sweeps

    Returns:
        Value function of the policy

    Raises:
        ValueError: If the policy does not fit the MDP or tol is not positive
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be positive: {tol}")
    reward, next_states, probs = _policy_tables(mdp, policy)
    values = np.zeros(mdp.n_states)
    for _ in range(max_iterations):
        updated = reward + mdp.gamma * (probs * values[next_states]).sum(axis=1)
        delta = float(np.max(np.abs(updated - values)))
        values = updated
        if mdp.gamma * delta <= tol:
            return ValueFunction(values)
    raise RuntimeError(f"Policy evaluation did not reach tol={tol} in {max_iterations} sweeps")


def policy_evaluation_exact(mdp: TabularMDP, policy: DeterministicPolicy) -> ValueFunction:
    """Compute V^pi by a sparse direct solve of (I - gamma P_pi) V = R_pi.

    Independent of :func:`policy_evaluation`; used to cross-check it.
    """
    reward, next_states, probs = _policy_tables(mdp, policy)
    n = mdp.n_states
    rows = np.repeat(np.arange(n), next_states.shape[1])
    p_pi = sparse.csr_matrix(
        (probs.ravel(), (rows, next_states.ravel())), shape=(n, n)
    )
    system = sparse.identity(n, format="csr") - mdp.gamma * p_pi
    values = spsolve(system.tocsc(), reward)
    return ValueFunction(np.atleast_1d(values))


def optimal_policy_set(
    mdp: TabularMDP,
    tie_tol: float = DEFAULT_TIE_TOL,
    v_star: Optional[ValueFunction] = None,
    tol: float = DEFAULT_TOL,
) -> PolicySet:
    """Per-state argmax sets {a : Q*(s, a) >= max_a' Q*(s, a') - tie_tol}.

    Args:
        mdp: The MDP
        tie_tol: Slack under which actions count as tied
        v_star: Precomputed optimal values (computed if omitted)
        tol: Value-iteration tolerance when v_star is computed here

    Returns:
        Product set of optimal deterministic policies
    """
    if not tie_tol > 0.0:
        raise ValueError(f"tie_tol must be positive: {tie_tol}")
    if v_star is None:
        v_star = value_iteration(mdp, tol)
    q = q_values(mdp, v_star.values)
    return PolicySet(q >= q.max(axis=1, keepdims=True) - tie_tol)


def is_eps_converged(
    mdp: TabularMDP, policy: DeterministicPolicy, v_star: ValueFunction, eps: float
) -> bool:
    """Check |V^pi(s) - V*(s)| < eps at every state.

    V^pi is evaluated at residual tolerance eps * (1 - gamma) / 10, which is
    at most eps / 10 and keeps the evaluation error below eps / 10.

    Raises:
        ValueError: If eps is not a finite positive number or dimensions differ
    """
    if not (math.isfinite(eps) and eps > 0.0):
        raise ValueError(f"eps must be finite and positive: {eps}")
    if len(v_star) != mdp.n_states:
        raise ValueError(f"v_star has {len(v_star)} entries, MDP has {mdp.n_states} states")
    tol = eps * (1.0 - mdp.gamma) / 10.0
    v_pi = policy_evaluation(mdp, policy, tol)
    return bool(np.all(np.abs(v_pi.values - v_star.values) < eps))
