import numpy as np
import pytest

from posglab import filtering, grid as gridmod, matgame, shapley
from posglab.shapley import (NotConverged, ShapleyOperator, ValueTable, apply_operator,
                             extract_strategies, load_tables, save_tables, stage_matrix,
                             value_iterate)


def _vertex_indices(grid):
    out = []
    for x in range(grid.nx):
        e = np.zeros(grid.nx)
        e[x] = 1.0
        out.append(gridmod.project(grid, e))
    return out


def test_stage_matrix_alpha_zero_is_stage_cost(canon2):
    g = gridmod.build(2, 8)
    op = ShapleyOperator(canon2, g)
    values = np.arange(len(g), dtype=float)
    for i in [0, 3, len(g) - 1]:
        A = stage_matrix(canon2, g, values, 0.0, i, op=op)
        for u in range(2):
            for v in range(2):
                assert A[u, v] == pytest.approx(
                    filtering.stage_cost(canon2, g.points[i], u, v), abs=1e-12)


def test_stage_matrix_vertex(canon2):
    g = gridmod.build(2, 4)
    for x in range(2):
        e = np.zeros(2)
        e[x] = 1.0
        i = gridmod.project(g, e)
        A = stage_matrix(canon2, g, np.zeros(len(g)), 0.0, i)
        assert A == pytest.approx(canon2.cost[x], abs=1e-12)


def test_unctrl_stage_matrix_is_scalar(unctrl2):
    g = gridmod.build(2, 4)
    A = stage_matrix(unctrl2, g, np.zeros(len(g)), 0.5, 0)
    assert A.shape == (1, 1)


def test_operator_on_zero_canon2(canon2):
    g = gridmod.build(2, 8)
    vt = apply_operator(canon2, g, np.zeros(len(g)), 0.9)
    assert np.max(np.abs(vt.values)) < 1e-12


def test_affine_shift(canon2, separable2):
    g = gridmod.build(2, 8)
    rng = np.random.default_rng(0)
    for m in (canon2, separable2):
        op = ShapleyOperator(m, g)
        for _ in range(10):
            V = rng.uniform(-3, 3, size=len(g))
            kappa = rng.uniform(-5, 5)
            alpha = rng.uniform(0.1, 0.95)
            lhs = op.apply(V + kappa, alpha)
            rhs = op.apply(V, alpha) + alpha * kappa
            assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_contraction(canon2):
    g = gridmod.build(2, 8)
    op = ShapleyOperator(canon2, g)
    rng = np.random.default_rng(1)
    for _ in range(20):
        V = rng.uniform(-2, 2, size=len(g))
        W = rng.uniform(-2, 2, size=len(g))
        alpha = rng.uniform(0.1, 0.95)
        lhs = np.max(np.abs(op.apply(V, alpha) - op.apply(W, alpha)))
        assert lhs <= alpha * np.max(np.abs(V - W)) + 1e-9


def test_monotonicity(separable2):
    g = gridmod.build(2, 8)
    op = ShapleyOperator(separable2, g)
    rng = np.random.default_rng(2)
    for _ in range(20):
        V = rng.uniform(-2, 2, size=len(g))
        W = V + rng.uniform(0, 2, size=len(g))
        assert np.all(op.apply(V, 0.8) <= op.apply(W, 0.8) + 1e-9)


def test_value_iterate_canon2_is_zero(canon2):
    g = gridmod.build(2, 16)
    vt, iters, residual = value_iterate(canon2, g, 0.7, 1e-6)
    assert np.max(np.abs(vt.values)) <= 1e-6
    assert residual <= 1e-6
    assert np.max(np.abs(vt.values)) <= canon2.c_max / (1 - 0.7) + 1e-6


def test_alpha_zero_converges_in_one_sweep(separable2):
    g = gridmod.build(2, 8)
    vt, iters, residual = value_iterate(separable2, g, 0.0, 1e-9)
    assert iters == 1
    assert residual == 0.0
    assert vt.values == pytest.approx(np.full(len(g), 1.5), abs=1e-9)


def test_not_converged_carries_table(separable2):
    g = gridmod.build(2, 4)
    with pytest.raises(NotConverged) as exc:
        value_iterate(separable2, g, 0.9, 1e-10, max_iter=2)
    assert exc.value.table.values.shape == (len(g),)
    assert exc.value.residual > 1e-10


def test_unctrl2_series_oracle(unctrl2):
    g = gridmod.build(2, 64)
    alpha = 0.9
    vt, _, _ = value_iterate(unctrl2, g, alpha, 1e-6)
    P = unctrl2.state_marginal()[:, 0, 0, :]
    c = unctrl2.cost[:, 0, 0]
    series = np.zeros(2)
    term = c.copy()
    Pt = np.eye(2)
    for t in range(200):
        series += (alpha ** t) * (Pt @ c)
        Pt = Pt @ P
    budget = 0.02 * unctrl2.c_max / (1 - alpha)
    for x, i in enumerate(_vertex_indices(g)):
        assert abs(vt.values[i] - series[x]) <= 1e-6 + budget


def _state_vi(model, alpha, tol):
    """Fully observed Shapley value iteration directly on states."""
    pm = model.state_marginal()
    V = np.zeros(model.nx)
    for _ in range(100_000):
        A = model.cost + alpha * np.einsum("xuvz,z->xuv", pm, V)
        newV = np.array([matgame.solve_value(A[x]) for x in range(model.nx)])
        d = np.max(np.abs(newV - V))
        V = newV
        if alpha * d / (1 - alpha) <= tol:
            sols = [matgame.solve(model.cost[x] + alpha * np.einsum("uvz,z->uv", pm[x], V))
                    for x in range(model.nx)]
            return V, sols
    raise AssertionError("oracle VI did not converge")


def test_fullobs_reduction(fullobs3):
    tol = 1e-6
    alpha = 0.8
    g = gridmod.build(3, 8)
    op = ShapleyOperator(fullobs3, g)
    vt, _, _ = value_iterate(fullobs3, g, alpha, tol, op=op)
    st = extract_strategies(fullobs3, g, vt, alpha, op=op)
    V_state, sols = _state_vi(fullobs3, alpha, tol)
    for x, i in enumerate(_vertex_indices(g)):
        assert abs(vt.values[i] - V_state[x]) <= 2 * tol
        assert st.row[i] == pytest.approx(sols[x].row_strategy, abs=1e-5)
        assert st.col[i] == pytest.approx(sols[x].col_strategy, abs=1e-5)


def test_saddle_certified_at_every_grid_point(separable2):
    g = gridmod.build(2, 8)
    op = ShapleyOperator(separable2, g)
    vt, _, _ = value_iterate(separable2, g, 0.85, 1e-7, op=op)
    A = op.stage_matrices(vt.values, 0.85)
    for i in range(len(g)):
        sol = matgame.solve(A[i])
        assert matgame.certify(A[i], sol, tol=1e-8)


def test_extract_strategies_examples(canon2, unctrl2):
    g = gridmod.build(2, 8)
    op = ShapleyOperator(canon2, g)
    vt, _, _ = value_iterate(canon2, g, 0.9, 1e-8, op=op)
    st = extract_strategies(canon2, g, vt, 0.9, op=op)
    assert np.allclose(st.row, 0.5, atol=1e-8)
    assert np.allclose(st.col, 0.5, atol=1e-8)
    op_u = ShapleyOperator(unctrl2, g)
    st_u = extract_strategies(unctrl2, g, np.zeros(len(g)), 0.9, op=op_u)
    assert np.all(st_u.row == 1.0) and np.all(st_u.col == 1.0)


def test_table_serialization_round_trip(tmp_path, separable2):
    g = gridmod.build(2, 8)
    op = ShapleyOperator(separable2, g)
    vt, _, residual = value_iterate(separable2, g, 0.9, 1e-6, op=op)
    st = extract_strategies(separable2, g, vt, 0.9, op=op)
    path = tmp_path / "table.txt"
    save_tables(path, separable2.name, vt, st, residual)
    header, vt2, st2 = load_tables(path)
    assert header["model"] == "SEPARABLE2"
    assert float(header["alpha"]) == 0.9
    assert np.array_equal(vt2.values, vt.values)
    assert np.array_equal(st2.row, st.row)
    assert np.array_equal(st2.col, st.col)


def test_value_iterate_rejects_bad_args(canon2):
    g = gridmod.build(2, 4)
    with pytest.raises(ValueError):
        value_iterate(canon2, g, 1.0, 1e-6)
    with pytest.raises(ValueError):
        value_iterate(canon2, g, 0.5, 0.0)
