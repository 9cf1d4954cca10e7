"""Coupled pair chain, pseudo-atom split chain, and coupling diagnostics.

Two copies of the hidden chain are driven by one shared action pair; on
the small set K x K the transition law dominates delta times the uniform
distribution, which lets the chain be split with an extra level bit.  The
level-1 slice is an atom: once both copies regenerate from it their future
laws agree, so the first hitting time of the atom bounds how much the
discounted value can differ between two initial beliefs.

Splitting is applied to the next-pair marginal (the 1/2 factor inside
delta guarantees that residual is nonnegative); observations are drawn
from their exact conditional law in the residual branch and uniformly in
the atom branch, so the pair process with the level bit discarded is
distributed exactly as the plain product chain.
"""

from dataclasses import dataclass

import numpy as np

from . import filtering, grid as gridmod, shapley


class NoMinorization(RuntimeError):
    """The minorization constant over K is zero; K is unusable."""


class InvalidResidual(RuntimeError):
    """The split residual kernel has negative mass."""


class AllCensored(RuntimeError):
    """Every sampled path hit the horizon cap before coupling."""


DEFAULT_HORIZON_CAP = 10**6


def compute_delta(model, K) -> float:
    """Minorization constant: half the squared (min restricted transition
    mass times |K|)."""
    K = np.asarray(sorted(set(int(k) for k in np.atleast_1d(K))), dtype=int)
    pm = model.state_marginal()
    restricted = pm[np.ix_(K, range(model.nu), range(model.nv), K)]
    lo = float(restricted.min())
    if lo <= 0.0:
        raise NoMinorization(f"min transition mass within K={K.tolist()} is zero")
    delta = 0.5 * (lo * K.size) ** 2
    return delta


@dataclass
class SplitChainConfig:
    K: np.ndarray
    delta: float
    alpha_for_bound: float
    # sampling tables, filled by build_split_config
    pm: np.ndarray = None          # (nx, nu, nv, nx)
    cum_pm: np.ndarray = None
    cum_joint: np.ndarray = None   # (nx, nu, nv, nx*ny)
    cum_obs: np.ndarray = None     # (nx, nu, nv, nx, ny)
    cum_res: np.ndarray = None     # (nK, nK, nu, nv, nK*nK)
    in_K: np.ndarray = None        # bool mask over states
    pos_in_K: np.ndarray = None    # state -> position within K (or -1)


def build_split_config(model, K=None, alpha_for_bound: float = 0.9) -> SplitChainConfig:
    if K is None:
        K = np.arange(model.nx)
    K = np.asarray(sorted(set(int(k) for k in np.atleast_1d(K))), dtype=int)
    delta = compute_delta(model, K)
    if not 0.0 < delta <= 0.5:
        raise NoMinorization(f"delta={delta} outside (0, 1/2]")
    pm = model.state_marginal()
    nK = K.size
    theta = 1.0 / (nK * nK)
    in_K = np.zeros(model.nx, dtype=bool)
    in_K[K] = True
    pos = -np.ones(model.nx, dtype=int)
    pos[K] = np.arange(nK)
    cfg = SplitChainConfig(K, delta, alpha_for_bound)
    cfg.pm = pm
    cfg.cum_pm = np.cumsum(pm, axis=3)
    cfg.cum_joint = np.cumsum(
        model.kernel.reshape(model.nx, model.nu, model.nv, model.nx * model.ny), axis=3)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = model.kernel / pm[..., None]
    cond = np.nan_to_num(cond)
    cfg.cum_obs = np.cumsum(cond, axis=4)
    cfg.in_K = in_K
    cfg.pos_in_K = pos
    # residual over all of X^2: the mass that exits K^2 stays in the residual
    nx = model.nx
    cum_res_full = np.zeros((nK, nK, model.nu, model.nv, nx * nx))
    theta_full = np.zeros((nx, nx))
    theta_full[np.ix_(K, K)] = theta
    for a, xh in enumerate(K):
        for b, xt in enumerate(K):
            for u in range(model.nu):
                for v in range(model.nv):
                    joint = np.outer(pm[xh, u, v], pm[xt, u, v])
                    res = (joint - delta * theta_full) / (1.0 - delta)
                    if res.min() < -1e-15:
                        raise InvalidResidual(
                            f"negative residual mass {res.min():.3e} at pair "
                            f"({xh},{xt}), actions ({u},{v})")
                    cum_res_full[a, b, u, v] = np.cumsum(np.maximum(res, 0.0).ravel())
    cfg.cum_res = cum_res_full
    return cfg


@dataclass
class SplitChainState:
    x_hat: int
    x_tilde: int
    level: int
    y_hat: int          # -1 before the first observation
    y_tilde: int
    psi_hat: np.ndarray
    psi_tilde: np.ndarray


def _pick(cum: np.ndarray, r: float) -> int:
    return int(np.searchsorted(cum, r * cum[-1], side="right").clip(0, cum.size - 1))


def initial_split_state(model, config, psi_hat, psi_tilde, rng) -> SplitChainState:
    ph = psi_hat.probs if hasattr(psi_hat, "probs") else np.asarray(psi_hat, float)
    pt = psi_tilde.probs if hasattr(psi_tilde, "probs") else np.asarray(psi_tilde, float)
    xh = _pick(np.cumsum(ph), rng.random())
    xt = _pick(np.cumsum(pt), rng.random())
    level = 0
    if config.in_K[xh] and config.in_K[xt] and rng.random() < config.delta:
        level = 1
    return SplitChainState(xh, xt, level, -1, -1, ph.copy(), pt.copy())


def step_split_chain(model, config, state: SplitChainState, u: int, v: int, rng) -> SplitChainState:
    """One transition of the split coupled chain under shared actions (u,v)."""
    K, delta = config.K, config.delta
    ny = model.ny
    in_pair = config.in_K[state.x_hat] and config.in_K[state.x_tilde]
    if state.level == 1:
        if not in_pair:
            raise RuntimeError("level-1 state outside K^2")
        zh = int(K[rng.integers(K.size)])
        zt = int(K[rng.integers(K.size)])
        yh = int(rng.integers(ny))
        yt = int(rng.integers(ny))
    elif not in_pair:
        jh = _pick(config.cum_joint[state.x_hat, u, v], rng.random())
        jt = _pick(config.cum_joint[state.x_tilde, u, v], rng.random())
        zh, yh = jh // ny, jh % ny
        zt, yt = jt // ny, jt % ny
    else:
        a = config.pos_in_K[state.x_hat]
        b = config.pos_in_K[state.x_tilde]
        pair = _pick(config.cum_res[a, b, u, v], rng.random())
        zh, zt = pair // model.nx, pair % model.nx
        yh = _pick(config.cum_obs[state.x_hat, u, v, zh], rng.random())
        yt = _pick(config.cum_obs[state.x_tilde, u, v, zt], rng.random())
    level = 0
    if config.in_K[zh] and config.in_K[zt] and rng.random() < delta:
        level = 1
    new_ph = filtering.filter_update(model, state.psi_hat, u, v, yh).probs
    new_pt = filtering.filter_update(model, state.psi_tilde, u, v, yt).probs
    out = SplitChainState(zh, zt, level, yh, yt, new_ph, new_pt)
    assert out.level == 0 or (config.in_K[out.x_hat] and config.in_K[out.x_tilde])
    return out


def _path_rng(seed: int, path: int) -> np.random.Generator:
    key = np.array([seed, path], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class CouplingEstimate:
    taus: np.ndarray
    mean: float
    ci_low: float
    ci_high: float
    censored: int
    n_samples: int


def estimate_coupling_time(model, config, psi_hat, psi_tilde, strategy1, strategy2,
                           n_samples: int, horizon_cap: int = DEFAULT_HORIZON_CAP,
                           seed: int = 0) -> CouplingEstimate:
    """Sample the atom hitting time tau over independent coupled paths.

    Player 1's actions are drawn from strategy1 fed the psi_hat-side belief,
    player 2's from strategy2 fed the psi_tilde-side belief; a single (u, v)
    drives both copies.
    """
    taus = []
    censored = 0
    for path in range(n_samples):
        rng = _path_rng(seed, path)
        state = initial_split_state(model, config, psi_hat, psi_tilde, rng)
        if state.level == 1:
            taus.append(0)
            continue
        tau = -1
        for n in range(1, horizon_cap + 1):
            mu = strategy1.mixed(model, state.psi_hat)
            nu = strategy2.mixed(model, state.psi_tilde)
            u = _pick(np.cumsum(mu), rng.random())
            v = _pick(np.cumsum(nu), rng.random())
            state = step_split_chain(model, config, state, u, v, rng)
            if state.level == 1:
                tau = n
                break
        if tau < 0:
            censored += 1
        else:
            taus.append(tau)
    if not taus:
        raise AllCensored(f"all {n_samples} paths exceeded horizon cap {horizon_cap}")
    taus = np.asarray(taus, dtype=float)
    mean = float(taus.mean())
    half = 1.96 * float(taus.std(ddof=1) / np.sqrt(taus.size)) if taus.size > 1 else 0.0
    return CouplingEstimate(taus, mean, mean - half, mean + half, censored, n_samples)


def check_value_difference_bound(model, grid, alpha: float, psi_hat, psi_tilde,
                                 config, n_samples: int, seed: int = 0,
                                 tol: float = 1e-6) -> dict:
    """Empirical form of the coupling bound: the discounted values at two
    beliefs differ by at most twice the cost bound times the expected
    coupling time, plus explicit grid/VI slack."""
    from . import strategies as strat

    op = shapley.ShapleyOperator(model, grid)
    vtable, _, residual = shapley.value_iterate(model, grid, alpha, tol, op=op)
    stable = shapley.extract_strategies(model, grid, vtable, alpha, op=op)
    i_hat = gridmod.project(grid, psi_hat)
    i_til = gridmod.project(grid, psi_tilde)
    dv = abs(float(vtable.values[i_hat] - vtable.values[i_til]))
    s1 = strat.GridTableStrategy(strat.ROW, grid, stable.row)
    s2 = strat.GridTableStrategy(strat.COL, grid, stable.col)
    est = estimate_coupling_time(model, config, psi_hat, psi_tilde, s1, s2,
                                 n_samples, seed=seed)
    grid_slack = 2.0 * residual + model.c_max * grid.nx / grid.m
    bound = 2.0 * model.c_max * est.ci_high + grid_slack
    return {
        "delta": config.delta,
        "n_samples": n_samples,
        "mean_tau": est.mean,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "censored": est.censored,
        "value_difference": dv,
        "bound": bound,
        "passed": dv <= bound,
    }


@dataclass
class LyapunovReport:
    passed: bool
    worst_slack: float
    slack_by_state: np.ndarray
    a2_bound: float

    def __str__(self):
        verdict = "pass" if self.passed else "FAIL"
        return (f"lyapunov drift {verdict}: worst slack {self.worst_slack:.6g}, "
                f"sup|V| = {self.a2_bound:.6g} (so E[V(X_n)]/n -> 0)")


def validate_lyapunov(model, cert) -> LyapunovReport:
    """Check the drift inequality for every (x,u,v): expected V gain plus
    h(x) minus the K-indicator allowance must be <= 0 (tolerance 1e-9)."""
    pm = model.state_marginal()
    drift = np.einsum("xuvz,z->xuv", pm, cert.V) - cert.V[:, None, None]
    allowance = np.where(np.isin(np.arange(model.nx), cert.K), cert.drift_c, 0.0)
    slack = drift + cert.h[:, None, None] - allowance[:, None, None]
    worst = slack.max(axis=(1, 2))
    return LyapunovReport(bool(np.all(worst <= 1e-9)), float(worst.max()),
                          worst, float(np.max(np.abs(cert.V))))


def exact_pair_distributions(model, psi_hat, psi_tilde, n_steps: int, u: int, v: int):
    """Exact pair-occupation laws of the plain product chain under fixed
    actions; the split chain's pair marginals must match these."""
    pm = model.state_marginal()[:, u, v, :]
    T = np.kron(pm, pm)
    ph = psi_hat.probs if hasattr(psi_hat, "probs") else np.asarray(psi_hat, float)
    pt = psi_tilde.probs if hasattr(psi_tilde, "probs") else np.asarray(psi_tilde, float)
    dist = np.outer(ph, pt).ravel()
    out = []
    for _ in range(n_steps):
        dist = dist @ T
        out.append(dist.reshape(model.nx, model.nx).copy())
    return out


def pair_occupation_counts(model, config, psi_hat, psi_tilde, n_runs: int,
                           n_steps: int, u: int, v: int, seed: int = 0) -> np.ndarray:
    """Vectorized split-chain sampler recording pair occupation counts at
    steps 1..n_steps (observations do not influence the pair/level law under
    fixed actions, so they are not sampled here)."""
    nx = model.nx
    draws = np.empty((n_runs, 3 + 3 * n_steps))
    for r in range(n_runs):
        draws[r] = _path_rng(seed, r).random(3 + 3 * n_steps)
    ph = psi_hat.probs if hasattr(psi_hat, "probs") else np.asarray(psi_hat, float)
    pt = psi_tilde.probs if hasattr(psi_tilde, "probs") else np.asarray(psi_tilde, float)
    xh = np.searchsorted(np.cumsum(ph), draws[:, 0], side="right").clip(0, nx - 1)
    xt = np.searchsorted(np.cumsum(pt), draws[:, 1], side="right").clip(0, nx - 1)
    in_pair = config.in_K[xh] & config.in_K[xt]
    level = in_pair & (draws[:, 2] < config.delta)

    cum_pm_uv = config.cum_pm[:, u, v, :]                   # (nx, nx)
    nK = config.K.size
    counts = np.zeros((n_steps, nx, nx), dtype=np.int64)
    for t in range(n_steps):
        r1 = draws[:, 3 + 3 * t]
        r2 = draws[:, 4 + 3 * t]
        r3 = draws[:, 5 + 3 * t]
        in_pair = config.in_K[xh] & config.in_K[xt]
        # plain product branch
        zh = (cum_pm_uv[xh] < r1[:, None]).sum(axis=1).clip(0, nx - 1)
        zt = (cum_pm_uv[xt] < r2[:, None]).sum(axis=1).clip(0, nx - 1)
        # atom branch: both coordinates uniform on K
        atom = level
        if np.any(atom):
            zh[atom] = config.K[np.minimum((r1[atom] * nK).astype(int), nK - 1)]
            zt[atom] = config.K[np.minimum((r2[atom] * nK).astype(int), nK - 1)]
        # residual branch: level 0 inside K^2
        resid = in_pair & ~level
        if np.any(resid):
            a = config.pos_in_K[xh[resid]]
            b = config.pos_in_K[xt[resid]]
            cums = config.cum_res[a, b, u, v]               # (k, nx*nx)
            total = cums[:, -1]
            pair = (cums < (r1[resid] * total)[:, None]).sum(axis=1).clip(0, nx * nx - 1)
            zh[resid] = pair // nx
            zt[resid] = pair % nx
        new_in = config.in_K[zh] & config.in_K[zt]
        level = new_in & (r3 < config.delta)
        xh, xt = zh, zt
        np.add.at(counts[t], (xh, xt), 1)
    return counts
