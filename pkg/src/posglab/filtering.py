"""Belief state and the Bayes filtering recursion.

The belief is the conditional law of the hidden state given the observed
history; it is the state of the equivalent completely observable game.
"""

import itertools
from dataclasses import dataclass

import numpy as np

UNDERFLOW = 1e-300
BRUTE_FORCE_MAX_T = 4


class ZeroProbabilityObservation(RuntimeError):
    """The observation fed to the filter has zero predictive probability."""


class ZeroProbabilityHistory(RuntimeError):
    """The whole action/observation history has zero probability."""


@dataclass
class Belief:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        s = p.sum()
        if s <= UNDERFLOW:
            raise ZeroProbabilityObservation("belief mass underflow")
        if abs(s - 1.0) > 1e-14:
            p = p / s
        p.setflags(write=False)
        self.probs = p


def _probs(psi) -> np.ndarray:
    return psi.probs if isinstance(psi, Belief) else np.asarray(psi, dtype=float)


def filter_update(model, psi, u: int, v: int, y: int) -> Belief:
    """One step of the Bayes recursion: condition on actions (u,v) and the
    observation y, returning the new belief over next states."""
    p = _probs(psi)
    if not 0 <= y < model.ny:
        raise IndexError(f"observation index {y} out of range [0,{model.ny})")
    unnorm = p @ model.kernel[:, u, v, :, y]
    d = unnorm.sum()
    if d <= UNDERFLOW:
        raise ZeroProbabilityObservation(
            f"observation y={y} has zero probability under (psi,u={u},v={v})")
    return Belief(unnorm / d)


def obs_predictive(model, psi, u: int, v: int) -> np.ndarray:
    """Predictive distribution of the next observation: the filter normalizer."""
    p = _probs(psi)
    return p @ model.kernel[:, u, v].sum(axis=1)


def stage_cost(model, psi, u: int, v: int) -> float:
    """Expected one-step payoff under the belief: the reduced stage cost."""
    return float(_probs(psi) @ model.cost[:, u, v])


def brute_force_posterior(model, history) -> Belief:
    """Posterior of the final hidden state by enumerating every state path.

    ``history`` is a sequence of (u, v, y) triples, length at most
    BRUTE_FORCE_MAX_T.  Test oracle only; exponential in the history length.
    """
    history = list(history)
    T = len(history)
    if T > BRUTE_FORCE_MAX_T:
        raise ValueError(f"history length {T} exceeds oracle cap {BRUTE_FORCE_MAX_T}")
    if T == 0:
        return Belief(model.initial_belief)
    mass = np.zeros(model.nx)
    for path in itertools.product(range(model.nx), repeat=T + 1):
        prob = model.initial_belief[path[0]]
        for t, (u, v, y) in enumerate(history):
            prob *= model.kernel[path[t], u, v, path[t + 1], y]
        mass[path[-1]] += prob
    if mass.sum() <= UNDERFLOW:
        raise ZeroProbabilityHistory("history has zero probability")
    return Belief(mass)
