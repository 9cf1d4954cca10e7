"""Average payoff by vanishing discount.

The long-run value gamma is read off as the limit of (1 - alpha) times the
discounted value at a reference belief; the relative value function (the
discounted value re-centered at that reference) stays bounded and its
dynamic-programming residual shrinks as alpha approaches 1.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import grid as gridmod, matgame, shapley


def default_schedule(levels: int = 7) -> list[float]:
    """Geometric approach to 1: 1 - 2^-k for k = 1..levels."""
    return [1.0 - 0.5 ** k for k in range(1, levels + 1)]


@dataclass
class VanishingDiscountRun:
    alphas: list[float]
    psi_star_index: int
    gammas: np.ndarray
    v_star: np.ndarray                 # V_alpha(psi*) per alpha
    relative_tables: list[shapley.ValueTable]
    gamma_estimate: float
    diagnostics: list[dict]

    def successive_differences(self) -> np.ndarray:
        return np.abs(np.diff(self.gammas))


def run_vanishing_discount(model, grid, alphas, psi_star, tol: float,
                           max_iter: int = shapley.DEFAULT_MAX_ITER) -> VanishingDiscountRun:
    alphas = [float(a) for a in alphas]
    if any(not 0.0 < a < 1.0 for a in alphas):
        raise ValueError("every alpha must lie in (0,1)")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    star = gridmod.project(grid, psi_star)
    op = shapley.ShapleyOperator(model, grid)
    gammas, v_star, tables, diags = [], [], [], []
    partial_exc = None
    for a in alphas:
        t0 = time.perf_counter()
        try:
            vt, iters, residual = shapley.value_iterate(model, grid, a, tol,
                                                        max_iter=max_iter, op=op)
        except shapley.NotConverged as exc:
            partial_exc = exc
            break
        wall = time.perf_counter() - t0
        vs = float(vt.values[star])
        vbar = shapley.ValueTable(grid, vt.values - vs, a)
        gammas.append((1.0 - a) * vs)
        v_star.append(vs)
        tables.append(vbar)
        diags.append({"alpha": a, "iterations": iters, "residual": residual,
                      "sup_vbar": float(np.max(np.abs(vbar.values))), "wall_time": wall})
    if not gammas and partial_exc is not None:
        raise partial_exc
    run = VanishingDiscountRun(alphas[:len(gammas)], star, np.asarray(gammas),
                               np.asarray(v_star), tables, gammas[-1], diags)
    if partial_exc is not None:
        partial_exc.partial_run = run
        raise partial_exc
    return run


def acoe_residuals(model, grid, run: VanishingDiscountRun, alpha_index: int,
                   op: shapley.ShapleyOperator | None = None):
    """Residual of the average-payoff dynamic-programming equation at one
    schedule point: one-step max-min applied to the relative value, minus
    the relative value and gamma.  A diagnostic, not a proof: it measures
    how far the final relative table is from an exact solution."""
    if op is None:
        op = shapley.ShapleyOperator(model, grid)
    vbar = run.relative_tables[alpha_index].values
    gamma = run.gammas[alpha_index]
    A = op.stage_matrices(vbar, 1.0)
    bracket = np.array([matgame.solve_value(A[i]) for i in range(A.shape[0])])
    r = bracket - vbar - gamma
    summary = {"max_abs": float(np.max(np.abs(r))), "mean_abs": float(np.mean(np.abs(r)))}
    return r, summary


def write_gamma_table(path, model, grid, run: VanishingDiscountRun,
                      acoe_summaries=None, config_echo: dict | None = None,
                      include_timings: bool = False) -> None:
    """One CSV row per schedule point, for plotting.

    Wall times are emitted only on request so that repeated runs with the
    same seed produce bit-identical files.
    """
    with open(path, "w", encoding="utf-8") as f:
        for k, v in (config_echo or {}).items():
            f.write(f"# {k}={v}\n")
        f.write(f"# model={model.name} nx={grid.nx} m={grid.m} "
                f"gamma_estimate={run.gamma_estimate:.17g}\n")
        cols = "alpha,v_alpha_star,gamma,sup_vbar,max_acoe_residual,iterations"
        f.write(cols + (",wall_time\n" if include_timings else "\n"))
        for i, d in enumerate(run.diagnostics):
            max_r = "" if acoe_summaries is None else f"{acoe_summaries[i]['max_abs']:.17g}"
            line = (f"{d['alpha']:.17g},{run.v_star[i]:.17g},{run.gammas[i]:.17g},"
                    f"{d['sup_vbar']:.17g},{max_r},{d['iterations']}")
            if include_timings:
                line += f",{d['wall_time']:.3f}"
            f.write(line + "\n")
