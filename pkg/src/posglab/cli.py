"""Command-line front end.

Exit codes: 0 success/pass, 1 validation or assertion failure, 2 usage
error.  Every command logs its fully resolved configuration to stderr and
echoes it into the output file header, so outputs are self-describing and
re-parseable by the tool itself.
"""

import argparse
import sys

import numpy as np

from . import average, coupling, filtering, grid as gridmod, model as modelmod
from . import rollout, shapley, strategies as strat


def _resolve_model(spec: str) -> modelmod.GameModel:
    canon = modelmod.canonical_models()
    if spec in canon:
        return canon[spec]
    return modelmod.load(spec)


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _parse_strategy(spec: str, side: int, model) -> strat.Strategy:
    n = model.nu if side == strat.ROW else model.nv
    if spec == "uniform":
        return strat.UniformRandom(side)
    if spec.startswith("pure:"):
        return strat.pure(side, int(spec.split(":", 1)[1]), n)
    if spec.startswith("mixed:"):
        return strat.FixedMixed(side, _parse_floats(spec.split(":", 1)[1]))
    if spec.startswith("table:"):
        _, vt, st = shapley.load_tables(spec.split(":", 1)[1])
        table = st.row if side == strat.ROW else st.col
        return strat.GridTableStrategy(side, vt.grid, table)
    raise argparse.ArgumentTypeError(
        f"unknown strategy spec {spec!r} (use uniform | pure:K | mixed:p,... | table:PATH)")


def _log_config(args, keys) -> dict:
    cfg = {k: getattr(args, k) for k in keys}
    print("config: " + " ".join(f"{k}={v}" for k, v in cfg.items()), file=sys.stderr)
    return cfg


def cmd_validate(args) -> int:
    try:
        m = _resolve_model(args.model)
    except (modelmod.ModelFormatError, modelmod.ModelValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    report = modelmod.validate(m)
    print(report)
    return 0 if report.ok else 1


def cmd_solve_discounted(args) -> int:
    m = _resolve_model(args.model)
    cfg = _log_config(args, ["model", "m", "alpha", "tol", "out"])
    g = gridmod.build(m.nx, args.m)
    op = shapley.ShapleyOperator(m, g)
    vt, iters, residual = shapley.value_iterate(m, g, args.alpha, args.tol, op=op)
    st = shapley.extract_strategies(m, g, vt, args.alpha, op=op)
    shapley.save_tables(args.out, m.name, vt, st, residual,
                        extra_header={**cfg, "iterations": iters})
    print(f"converged in {iters} sweeps, residual {residual:.3e}, wrote {args.out}")
    return 0


def cmd_solve_average(args) -> int:
    m = _resolve_model(args.model)
    cfg = _log_config(args, ["model", "m", "alphas", "psi_star", "tol", "out"])
    g = gridmod.build(m.nx, args.m)
    alphas = _parse_floats(args.alphas) if args.alphas else average.default_schedule()
    psi_star = (np.asarray(_parse_floats(args.psi_star))
                if args.psi_star else m.initial_belief)
    run = average.run_vanishing_discount(m, g, alphas, psi_star, args.tol)
    op = shapley.ShapleyOperator(m, g)
    summaries = [average.acoe_residuals(m, g, run, i, op=op)[1]
                 for i in range(len(run.alphas))]
    average.write_gamma_table(args.out, m, g, run, acoe_summaries=summaries,
                              config_echo=cfg, include_timings=args.timings)
    print(f"gamma_estimate={run.gamma_estimate:.10g}, wrote {args.out}")
    return 0


def cmd_simulate(args) -> int:
    m = _resolve_model(args.model)
    cfg = _log_config(args, ["model", "s1", "s2", "episodes", "horizon", "seed", "out"])
    s1 = _parse_strategy(args.s1, strat.ROW, m)
    s2 = _parse_strategy(args.s2, strat.COL, m)
    res = rollout.simulate(m, s1, s2, args.episodes, args.horizon, args.seed,
                           workers=args.threads)
    eq = rollout.payoff_equivalence_test(m, s1, s2, args.episodes, args.horizon,
                                         args.seed, workers=args.threads)
    with open(args.out, "w", encoding="utf-8") as f:
        for k, v in cfg.items():
            f.write(f"# {k}={v}\n")
        f.write("metric,value\n")
        f.write(f"mean_avg_payoff,{res.mean_avg_payoff:.17g}\n")
        f.write(f"std_error,{res.std_error:.17g}\n")
        f.write(f"first_half_mean,{res.first_half_mean:.17g}\n")
        f.write(f"second_half_mean,{res.second_half_mean:.17g}\n")
        f.write(f"belief_payoff_mean,{eq['belief_mean']:.17g}\n")
        f.write(f"payoff_equivalence_diff,{eq['difference']:.17g}\n")
        f.write(f"payoff_equivalence_combined_se,{eq['combined_se']:.17g}\n")
        f.write(f"payoff_equivalence_pass,{int(eq['passed'])}\n")
    print(f"mean={res.mean_avg_payoff:.6g} (se {res.std_error:.2g}), "
          f"payoff-equivalence {'pass' if eq['passed'] else 'FAIL'}, wrote {args.out}")
    return 0 if eq["passed"] else 1


def cmd_saddle(args) -> int:
    m = _resolve_model(args.model)
    cfg = _log_config(args, ["model", "table", "gamma", "slack", "episodes",
                             "horizon", "seed", "out"])
    _, vt, st = shapley.load_tables(args.table)
    report = rollout.saddle_test(m, vt.grid, st, args.gamma, args.episodes,
                                 args.horizon, args.seed, args.slack,
                                 workers=args.threads)
    with open(args.out, "w", encoding="utf-8") as f:
        for k, v in cfg.items():
            f.write(f"# {k}={v}\n")
        f.write("adversary,side,mean,stderr,bound,pass\n")
        for r in report["rows"]:
            f.write(f"{r['adversary']},{r['side']},{r['mean']:.17g},"
                    f"{r['stderr']:.17g},{r['bound']:.17g},{int(r['passed'])}\n")
    print(("saddle PASS" if report["all_passed"] else "saddle FAIL") + f", wrote {args.out}")
    return 0 if report["all_passed"] else 1


def cmd_couple(args) -> int:
    m = _resolve_model(args.model)
    cfg = _log_config(args, ["model", "m", "alpha", "K", "psi1", "psi2", "n",
                             "seed", "out"])
    K = [int(k) for k in args.K.split(",")] if args.K else None
    try:
        config = coupling.build_split_config(m, K, alpha_for_bound=args.alpha)
    except (coupling.NoMinorization, coupling.InvalidResidual) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    psi1 = np.asarray(_parse_floats(args.psi1)) if args.psi1 else m.initial_belief
    psi2 = np.asarray(_parse_floats(args.psi2)) if args.psi2 else None
    if psi2 is None:
        psi2 = np.zeros(m.nx)
        psi2[0] = 1.0
    g = gridmod.build(m.nx, args.m)
    report = coupling.check_value_difference_bound(m, g, args.alpha, psi1, psi2,
                                                   config, args.n, seed=args.seed)
    lines = [f"# {k}={v}" for k, v in cfg.items()]
    lines.append("delta,n_samples,mean_tau,ci_low,ci_high,censored,bound_value,delta_v,pass")
    lines.append(f"{report['delta']:.17g},{report['n_samples']},{report['mean_tau']:.17g},"
                 f"{report['ci_low']:.17g},{report['ci_high']:.17g},{report['censored']},"
                 f"{report['bound']:.17g},{report['value_difference']:.17g},"
                 f"{int(report['passed'])}")
    if m.lyapunov is not None:
        lrep = coupling.validate_lyapunov(m, m.lyapunov)
        lines.append(f"# lyapunov: {lrep}")
        if not lrep.passed:
            report["passed"] = False
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    print(("coupling PASS" if report["passed"] else "coupling FAIL") + f", wrote {args.out}")
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posglab")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap for simulation fan-out (never affects results)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra):
        q = sub.add_parser(name)
        q.add_argument("model", help="model file path or canonical model name")
        q.set_defaults(fn=fn)
        return q

    add("validate", cmd_validate)

    q = add("solve-discounted", cmd_solve_discounted)
    q.add_argument("--m", type=int, default=32)
    q.add_argument("--alpha", type=float, default=0.9)
    q.add_argument("--tol", type=float, default=1e-6)
    q.add_argument("--out", required=True)

    q = add("solve-average", cmd_solve_average)
    q.add_argument("--m", type=int, default=32)
    q.add_argument("--alphas", default="", help="comma list; default 1-2^-k, k=1..7")
    q.add_argument("--psi-star", dest="psi_star", default="",
                   help="reference belief, comma list; default the initial belief")
    q.add_argument("--tol", type=float, default=1e-6)
    q.add_argument("--timings", action="store_true",
                   help="include wall times in the output table (non-reproducible)")
    q.add_argument("--out", required=True)

    q = add("simulate", cmd_simulate)
    q.add_argument("--s1", default="uniform")
    q.add_argument("--s2", default="uniform")
    q.add_argument("--episodes", type=int, default=200)
    q.add_argument("--horizon", type=int, default=10_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)

    q = add("saddle", cmd_saddle)
    q.add_argument("--table", required=True)
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--slack", type=float, default=0.05)
    q.add_argument("--episodes", type=int, default=200)
    q.add_argument("--horizon", type=int, default=10_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)

    q = add("couple", cmd_couple)
    q.add_argument("--m", type=int, default=32)
    q.add_argument("--alpha", type=float, default=0.9)
    q.add_argument("--K", default="", help="small-set state indices, comma list; default all")
    q.add_argument("--psi1", default="")
    q.add_argument("--psi2", default="")
    q.add_argument("--n", type=int, default=2000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (modelmod.ModelFormatError, modelmod.ModelValidationError,
            filtering.ZeroProbabilityObservation, coupling.NoMinorization,
            coupling.InvalidResidual, shapley.NotConverged, ValueError,
            argparse.ArgumentTypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
