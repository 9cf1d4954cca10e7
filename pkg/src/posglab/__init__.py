"""posglab: solver and verification lab for finite zero-sum partially
observable stochastic games."""

from . import average, coupling, filtering, grid, matgame, model, rollout, shapley, strategies

__all__ = ["average", "coupling", "filtering", "grid", "matgame", "model",
           "rollout", "shapley", "strategies"]

__version__ = "0.1.0"
