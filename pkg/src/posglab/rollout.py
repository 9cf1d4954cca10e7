"""Monte Carlo simulator for the hidden-state game.

Episodes run on the true (unobserved) state while both players act on the
filtered belief.  Every episode draws from its own counter-based random
stream keyed by (seed, episode index), so results are bit-identical no
matter how episodes are batched or fanned out across workers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import strategies as strat
from .strategies import ROW, COL


@dataclass
class RolloutResult:
    episodes: int
    horizon: int
    mean_avg_payoff: float
    std_error: float
    per_episode_averages: np.ndarray
    per_episode_belief_averages: np.ndarray
    first_half_mean: float
    second_half_mean: float


def _episode_rng(seed: int, episode: int) -> np.random.Generator:
    key = np.array([seed, episode], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sample_rows(probs: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Inverse-CDF sample per row of a (k, n) probability matrix."""
    idx = (np.cumsum(probs, axis=1) < r[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def _run_block(model, s1, s2, ep_lo, ep_hi, horizon, seed):
    """Lockstep simulation of episodes [ep_lo, ep_hi)."""
    k = ep_hi - ep_lo
    nx, ny = model.nx, model.ny
    draws = np.empty((k, 1 + 3 * horizon))
    for e in range(k):
        draws[e] = _episode_rng(seed, ep_lo + e).random(1 + 3 * horizon)

    kern_flat = model.kernel.reshape(nx, model.nu, model.nv, nx * ny)
    kern_t = np.ascontiguousarray(model.kernel.transpose(1, 2, 4, 0, 3))  # (u,v,y,x,z)
    cost_t = np.ascontiguousarray(model.cost.transpose(1, 2, 0))          # (u,v,x)

    x = _sample_rows(np.broadcast_to(model.initial_belief, (k, nx)), draws[:, 0])
    psi = np.broadcast_to(model.initial_belief, (k, nx)).copy()
    hidden_sum = np.zeros(k)
    belief_sum = np.zeros(k)
    half_first = np.zeros(k)
    half = horizon // 2
    for t in range(horizon):
        u = _sample_rows(s1.mixed_batch(model, psi), draws[:, 1 + 3 * t])
        v = _sample_rows(s2.mixed_batch(model, psi), draws[:, 2 + 3 * t])
        c_hidden = model.cost[x, u, v]
        hidden_sum += c_hidden
        belief_sum += np.einsum("kx,kx->k", psi, cost_t[u, v])
        if t < half:
            half_first += c_hidden
        zy = _sample_rows(kern_flat[x, u, v], draws[:, 3 + 3 * t])
        z = zy // ny
        y = zy % ny
        unnorm = np.einsum("ki,kij->kj", psi, kern_t[u, v, y])
        denom = unnorm.sum(axis=1)
        if np.any(denom <= 1e-300):
            # observations are drawn from the model's own joint, so this
            # indicates an internal inconsistency, not bad input
            raise RuntimeError("filter denominator vanished along a simulated path")
        psi = unnorm / denom[:, None]
        x = z
    return hidden_sum / horizon, belief_sum / horizon, half_first


def _run_paths(model, s1, s2, episodes, horizon, seed, workers=1):
    if horizon < 1 or episodes < 1:
        raise ValueError("need horizon >= 1 and episodes >= 1")
    if s1.side != ROW or s2.side != COL:
        raise ValueError("s1 must be the player-1 (row) strategy, s2 player-2 (col)")
    workers = max(1, int(workers))
    bounds = np.linspace(0, episodes, min(workers, episodes) + 1).astype(int)
    blocks = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if len(blocks) == 1:
        parts = [_run_block(model, s1, s2, 0, episodes, horizon, seed)]
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as ex:
            futs = [ex.submit(_run_block, model, s1, s2, lo, hi, horizon, seed)
                    for lo, hi in blocks]
            parts = [f.result() for f in futs]
    hidden = np.concatenate([p[0] for p in parts])
    belief = np.concatenate([p[1] for p in parts])
    half_first = np.concatenate([p[2] for p in parts])
    return hidden, belief, half_first


def simulate(model, s1, s2, episodes: int, horizon: int, seed: int, workers: int = 1) -> RolloutResult:
    hidden, belief, half_first = _run_paths(model, s1, s2, episodes, horizon, seed, workers)
    half = horizon // 2
    mean = float(hidden.mean())
    se = float(hidden.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0
    fh = float(half_first.sum() / (episodes * half)) if half else float("nan")
    sh = (float((hidden.sum() * horizon - half_first.sum()) / (episodes * (horizon - half)))
          if horizon > half else float("nan"))
    return RolloutResult(episodes, horizon, mean, se, hidden, belief, fh, sh)


def payoff_equivalence_test(model, s1, s2, episodes: int, horizon: int, seed: int,
                            workers: int = 1) -> dict:
    """Compare hidden-state payoffs with belief-state reduced payoffs along
    the same sample paths; they estimate the same expectation."""
    hidden, belief, _ = _run_paths(model, s1, s2, episodes, horizon, seed, workers)
    se_h = float(hidden.std(ddof=1) / np.sqrt(episodes))
    se_b = float(belief.std(ddof=1) / np.sqrt(episodes))
    combined = float(np.hypot(se_h, se_b))
    diff = float(hidden.mean() - belief.mean())
    return {
        "hidden_mean": float(hidden.mean()),
        "belief_mean": float(belief.mean()),
        "difference": diff,
        "combined_se": combined,
        "passed": abs(diff) <= 3.0 * combined + 1e-12,
    }


def default_adversary_pool(model, table_row: strat.Strategy, table_col: strat.Strategy) -> dict:
    """Cheap deviation battery: uniform, every pure action, and a myopic
    best-responder to the announced table strategy."""
    pool = {ROW: [], COL: []}
    pool[ROW].append(strat.UniformRandom(ROW))
    pool[COL].append(strat.UniformRandom(COL))
    for u in range(model.nu):
        pool[ROW].append(strat.pure(ROW, u, model.nu))
    for v in range(model.nv):
        pool[COL].append(strat.pure(COL, v, model.nv))
    pool[ROW].append(strat.MyopicGreedy(ROW, table_col))
    pool[COL].append(strat.MyopicGreedy(COL, table_row))
    return pool


def saddle_test(model, grid, stable, gamma: float, episodes: int, horizon: int,
                seed: int, slack: float, adversary_pool: dict | None = None,
                workers: int = 1) -> dict:
    """Empirical saddle check: the table strategies must defend gamma against
    every adversary in the pool, up to 3 standard errors plus the caller's
    grid/VI slack budget."""
    s_row = strat.GridTableStrategy(ROW, grid, stable.row)
    s_col = strat.GridTableStrategy(COL, grid, stable.col)
    if adversary_pool is None:
        adversary_pool = default_adversary_pool(model, s_row, s_col)
    rows = []
    run = 0
    for adv in adversary_pool[COL]:
        res = simulate(model, s_row, adv, episodes, horizon, seed + run, workers)
        run += 1
        bound = gamma - (3.0 * res.std_error + slack)
        rows.append({"adversary": getattr(adv, "name", adv.kind), "side": 2,
                     "mean": res.mean_avg_payoff, "stderr": res.std_error,
                     "bound": bound, "passed": res.mean_avg_payoff >= bound})
    for adv in adversary_pool[ROW]:
        res = simulate(model, adv, s_col, episodes, horizon, seed + run, workers)
        run += 1
        bound = gamma + 3.0 * res.std_error + slack
        rows.append({"adversary": getattr(adv, "name", adv.kind), "side": 1,
                     "mean": res.mean_avg_payoff, "stderr": res.std_error,
                     "bound": bound, "passed": res.mean_avg_payoff <= bound})
    res = simulate(model, s_row, s_col, episodes, horizon, seed + run, workers)
    tol = 3.0 * res.std_error + slack
    rows.append({"adversary": "table-vs-table", "side": 0,
                 "mean": res.mean_avg_payoff, "stderr": res.std_error,
                 "bound": tol, "passed": abs(res.mean_avg_payoff - gamma) <= tol})
    return {"rows": rows, "gamma": gamma, "all_passed": all(r["passed"] for r in rows)}
