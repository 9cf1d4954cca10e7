"""Shapley operator on the belief grid and discounted value iteration.

Each grid belief induces a one-shot matrix game: stage cost plus the
discounted expected continuation value, where the continuation belief is
the filtered update projected back onto the grid.  Value iteration runs
the operator to its fixed point (it is an alpha-contraction in sup norm);
saddle-point strategies are read off the converged stage matrices.
"""

from dataclasses import dataclass

import numpy as np

from . import filtering, grid as gridmod, matgame

OBS_SKIP = 1e-300
DEFAULT_MAX_ITER = 100_000


class NotConverged(RuntimeError):
    def __init__(self, table, residual, iterations):
        super().__init__(f"value iteration hit {iterations} sweeps, residual {residual:.3e}")
        self.table = table
        self.residual = residual
        self.iterations = iterations


@dataclass
class ValueTable:
    grid: gridmod.SimplexGrid
    values: np.ndarray
    alpha: float


@dataclass
class StrategyTable:
    grid: gridmod.SimplexGrid
    row: np.ndarray   # (n, nu) mixed action of the maximizer per grid point
    col: np.ndarray   # (n, nv) mixed action of the minimizer per grid point


def _values_of(values) -> np.ndarray:
    return values.values if isinstance(values, ValueTable) else np.asarray(values, dtype=float)


class ShapleyOperator:
    """Caches the alpha-independent transition structure of a (model, grid)
    pair: successor grid indices, observation weights, and stage costs."""

    def __init__(self, model, grid):
        self.model = model
        self.grid = grid
        n = len(grid)
        nu, nv, ny = model.nu, model.nv, model.ny
        succ = np.zeros((n, nu, nv, ny), dtype=np.int64)
        wobs = np.zeros((n, nu, nv, ny))
        for i in range(n):
            psi = grid.points[i]
            for u in range(nu):
                for v in range(nv):
                    w = filtering.obs_predictive(model, psi, u, v)
                    for y in range(ny):
                        if w[y] < OBS_SKIP:
                            continue   # zero-probability observation: skipped
                        nxt = filtering.filter_update(model, psi, u, v, y)
                        succ[i, u, v, y] = gridmod.project(grid, nxt)
                        wobs[i, u, v, y] = w[y]
        self.succ = succ
        self.wobs = wobs
        self.stage = np.einsum("ix,xuv->iuv", grid.points, model.cost)

    def stage_matrices(self, values, alpha: float) -> np.ndarray:
        """All grid stage matrices at once, shape (n, nu, nv)."""
        vals = _values_of(values)
        cont = np.einsum("iuvy,iuvy->iuv", self.wobs, vals[self.succ])
        return self.stage + alpha * cont

    def apply(self, values, alpha: float) -> np.ndarray:
        A = self.stage_matrices(values, alpha)
        return np.array([matgame.solve_value(A[i]) for i in range(A.shape[0])])


def stage_matrix(model, grid, values, alpha: float, grid_index: int, op: ShapleyOperator | None = None):
    """One-shot game matrix at a single grid point."""
    if op is None:
        op = ShapleyOperator(model, grid)
    return op.stage_matrices(values, alpha)[grid_index]


def apply_operator(model, grid, values, alpha: float, op: ShapleyOperator | None = None) -> ValueTable:
    if op is None:
        op = ShapleyOperator(model, grid)
    return ValueTable(grid, op.apply(values, alpha), alpha)


def value_iterate(model, grid, alpha: float, tol: float,
                  max_iter: int = DEFAULT_MAX_ITER, op: ShapleyOperator | None = None):
    """Iterate the operator from 0 until the contraction bound
    alpha*d/(1-alpha) falls below tol.  Returns (table, iterations, residual);
    the residual certifies sup-distance to the grid fixed point."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if op is None:
        op = ShapleyOperator(model, grid)
    values = np.zeros(len(grid))
    residual = np.inf
    for it in range(1, max_iter + 1):
        new = op.apply(values, alpha)
        d = float(np.max(np.abs(new - values)))
        values = new
        residual = alpha * d / (1.0 - alpha)
        if residual <= tol:
            return ValueTable(grid, values, alpha), it, residual
    raise NotConverged(ValueTable(grid, values, alpha), residual, max_iter)


def extract_strategies(model, grid, values, alpha: float, op: ShapleyOperator | None = None) -> StrategyTable:
    if op is None:
        op = ShapleyOperator(model, grid)
    A = op.stage_matrices(values, alpha)
    n = A.shape[0]
    row = np.zeros((n, model.nu))
    col = np.zeros((n, model.nv))
    for i in range(n):
        sol = matgame.solve(A[i])
        row[i] = sol.row_strategy
        col[i] = sol.col_strategy
    return StrategyTable(grid, row, col)


def save_tables(path, model_name: str, vtable: ValueTable, stable: StrategyTable,
                residual: float, extra_header: dict | None = None) -> None:
    """Serialize values and strategies: header lines, then one line per grid
    point with integer coordinates, value, row mix, column mix (17 sig digits)."""
    g = vtable.grid
    with open(path, "w", encoding="utf-8") as f:
        f.write("# posglab table v1\n")
        f.write(f"model {model_name}\n")
        f.write(f"nx {g.nx}\n")
        f.write(f"m {g.m}\n")
        f.write(f"nu {stable.row.shape[1]}\n")
        f.write(f"nv {stable.col.shape[1]}\n")
        f.write(f"alpha {vtable.alpha:.17g}\n")
        f.write(f"residual {residual:.17g}\n")
        for k, v in (extra_header or {}).items():
            f.write(f"# {k}={v}\n")
        for i in range(len(g)):
            cells = [str(int(c)) for c in g.coords[i]]
            cells.append(f"{vtable.values[i]:.17g}")
            cells.extend(f"{x:.17g}" for x in stable.row[i])
            cells.extend(f"{x:.17g}" for x in stable.col[i])
            f.write(" ".join(cells) + "\n")


def load_tables(path):
    """Parse a saved table file; returns (header dict, ValueTable, StrategyTable)."""
    header = {}
    rows = []
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        if not first.startswith("# posglab table"):
            raise ValueError(f"{path}: not a posglab table file")
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0].isalpha() and len(parts) == 2:
                header[parts[0]] = parts[1]
                continue
            rows.append([float(x) for x in parts])
    for key in ("model", "nx", "m", "nu", "nv", "alpha", "residual"):
        if key not in header:
            raise ValueError(f"{path}: missing header field {key!r}")
    nx, m = int(header["nx"]), int(header["m"])
    nu, nv = int(header["nu"]), int(header["nv"])
    g = gridmod.build(nx, m)
    if len(rows) != len(g):
        raise ValueError(f"{path}: expected {len(g)} grid rows, found {len(rows)}")
    values = np.zeros(len(g))
    row = np.zeros((len(g), nu))
    col = np.zeros((len(g), nv))
    for r in rows:
        coord = [int(round(c)) for c in r[:nx]]
        i = g.index_of(coord)
        values[i] = r[nx]
        row[i] = r[nx + 1:nx + 1 + nu]
        col[i] = r[nx + 1 + nu:nx + 1 + nu + nv]
    vt = ValueTable(g, values, float(header["alpha"]))
    st = StrategyTable(g, row, col)
    return header, vt, st
