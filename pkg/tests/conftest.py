"""Shared generators for the seeded random test suites."""

import itertools

import numpy as np

from avgmdp import FiniteMdp, Policy


def random_mdp(rng, n_states, n_actions, dense=True):
    """Dirichlet transition rows and uniform costs; dense rows make the
    induced chains irreducible with probability one."""
    actions = [list(range(n_actions))] * n_states
    q = []
    c = []
    for x in range(n_states):
        rows = rng.dirichlet(np.ones(n_states), size=n_actions)
        if not dense:
            rows = rows * (rng.random(rows.shape) < 0.6)
            rows[:, rng.integers(n_states)] += 1e-3
            rows /= rows.sum(axis=1, keepdims=True)
        q.append([list(r) for r in rows])
        c.append(list(rng.uniform(0.0, 1.0, n_actions)))
    return FiniteMdp(actions, q, c)


def random_stationary(rng, mdp):
    table = []
    for x in range(mdp.n_states):
        w = rng.dirichlet(np.ones(mdp.n_actions(x)))
        table.append(list(w))
    return Policy.stationary(table, mdp)


def weakly_communicating_mdp(rng, n_states, n_actions):
    """Action 0 at every state carries a strictly positive row, so the
    whole state space is one maximal end component."""
    actions = [list(range(n_actions))] * n_states
    q = []
    c = []
    for x in range(n_states):
        rows = [list(rng.dirichlet(np.ones(n_states)) + 1e-3)]
        rows[0] = list(np.asarray(rows[0]) / np.sum(rows[0]))
        for _ in range(n_actions - 1):
            rows.append(list(rng.dirichlet(np.ones(n_states))))
        q.append(rows)
        c.append(list(rng.uniform(0.0, 1.0, n_actions)))
    return FiniteMdp(actions, q, c)


def two_block_multichain(rng, block=3, transient=2, n_actions=2):
    """Two closed communicating blocks plus transient states that can
    steer into either block."""
    n = 2 * block + transient
    actions = [list(range(n_actions))] * n
    q = []
    c = []
    for x in range(n):
        rows = []
        for a in range(n_actions):
            row = np.zeros(n)
            if x < block:
                row[:block] = rng.dirichlet(np.ones(block)) + 1e-3
            elif x < 2 * block:
                row[block:2 * block] = rng.dirichlet(np.ones(block)) + 1e-3
            else:
                target = rng.integers(2 * block)
                row[target] = 0.7
                row[2 * block + rng.integers(transient)] += 0.3
            rows.append(list(row / row.sum()))
        q.append(rows)
        c.append(list(rng.uniform(0.0, 1.0, n_actions)))
    return FiniteMdp(actions, q, c)


def deterministic_mdps(max_states=3, max_actions=2):
    """The exhaustive small suite: every deterministic transition
    structure with costs on the {0, 1} grid."""
    for n in range(1, max_states + 1):
        for na in range(1, max_actions + 1):
            pairs = n * na
            for targets in itertools.product(range(n), repeat=pairs):
                for costs in itertools.product((0.0, 1.0), repeat=pairs):
                    q = []
                    c = []
                    k = 0
                    for x in range(n):
                        rows = []
                        cc = []
                        for _ in range(na):
                            row = [0.0] * n
                            row[targets[k]] = 1.0
                            rows.append(row)
                            cc.append(costs[k])
                            k += 1
                        q.append(rows)
                        c.append(cc)
                    yield FiniteMdp([list(range(na))] * n, q, c)
