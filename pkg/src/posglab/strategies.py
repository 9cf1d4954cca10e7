"""Belief-fed strategies for simulation and coupling runs.

Every strategy maps the current belief to a mixed action for one player;
all of them are therefore admissible (they depend on the observed history
only through the belief).  Batch evaluation over a (k, nx) matrix of
beliefs is the hot path of the vectorized simulator.
"""

import numpy as np

from . import grid as gridmod

ROW, COL = 1, 2   # player 1 maximizes, player 2 minimizes


class Strategy:
    kind = "abstract"

    def __init__(self, side: int):
        if side not in (ROW, COL):
            raise ValueError("side must be 1 (row/maximizer) or 2 (col/minimizer)")
        self.side = side

    def n_actions(self, model) -> int:
        return model.nu if self.side == ROW else model.nv

    def mixed_batch(self, model, beliefs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mixed(self, model, psi) -> np.ndarray:
        p = psi.probs if hasattr(psi, "probs") else np.asarray(psi, dtype=float)
        return self.mixed_batch(model, p[None, :])[0]


class FixedMixed(Strategy):
    kind = "fixed_mixed"

    def __init__(self, side: int, probs):
        super().__init__(side)
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("fixed mixed action must be a probability vector")
        self.probs = probs / probs.sum()
        self.name = "mixed:" + ",".join(f"{p:g}" for p in self.probs)

    def mixed_batch(self, model, beliefs):
        return np.broadcast_to(self.probs, (beliefs.shape[0], self.probs.size))


def pure(side: int, action: int, n_actions: int) -> FixedMixed:
    probs = np.zeros(n_actions)
    probs[action] = 1.0
    s = FixedMixed(side, probs)
    s.name = f"pure:{action}"
    return s


class UniformRandom(Strategy):
    kind = "uniform_random"
    name = "uniform"

    def mixed_batch(self, model, beliefs):
        n = self.n_actions(model)
        return np.full((beliefs.shape[0], n), 1.0 / n)


class GridTableStrategy(Strategy):
    """Project the belief onto the grid and play that point's stored mix."""

    kind = "grid_table"
    name = "table"

    def __init__(self, side: int, grid: gridmod.SimplexGrid, table: np.ndarray):
        super().__init__(side)
        self.grid = grid
        self.table = np.asarray(table, dtype=float)

    def mixed_batch(self, model, beliefs):
        idx = gridmod.project_many(self.grid, beliefs)
        return self.table[idx]


class MyopicGreedy(Strategy):
    """Pure best response, through the reduced stage cost, to an announced
    opponent strategy evaluated at the same belief."""

    kind = "myopic_greedy"

    def __init__(self, side: int, announced: Strategy):
        super().__init__(side)
        if announced.side == side:
            raise ValueError("announced strategy must belong to the opponent")
        self.announced = announced
        self.name = f"greedy-vs-{getattr(announced, 'name', announced.kind)}"

    def mixed_batch(self, model, beliefs):
        ctil = np.einsum("kx,xuv->kuv", beliefs, model.cost)
        opp = self.announced.mixed_batch(model, beliefs)
        if self.side == ROW:
            payoff = np.einsum("kuv,kv->ku", ctil, opp)
            best = np.argmax(payoff, axis=1)
            n = model.nu
        else:
            payoff = np.einsum("kuv,ku->kv", ctil, opp)
            best = np.argmin(payoff, axis=1)
            n = model.nv
        out = np.zeros((beliefs.shape[0], n))
        out[np.arange(beliefs.shape[0]), best] = 1.0
        return out
