import itertools

import numpy as np
import pytest

from posglab import filtering, model as modelmod
from posglab.filtering import (Belief, ZeroProbabilityHistory, ZeroProbabilityObservation,
                               brute_force_posterior, filter_update, obs_predictive,
                               stage_cost)


def test_hand_bayes_update(canon2):
    # unnormalized masses: z0 = 0.5*(0.72+0.27) = 0.495, z1 = 0.5*(0.04+0.14) = 0.09
    for u in range(2):
        for v in range(2):
            b = filter_update(canon2, [0.5, 0.5], u, v, 0)
            assert b.probs == pytest.approx([0.495 / 0.585, 0.09 / 0.585], abs=1e-12)


def test_fullobs_collapses_to_point_mass(fullobs3):
    for x in range(3):
        psi = np.zeros(3)
        psi[x] = 1.0
        for y in range(3):
            b = filter_update(fullobs3, psi, 0, 1, y)
            expect = np.zeros(3)
            expect[y] = 1.0
            assert b.probs == pytest.approx(expect, abs=1e-15)


def test_out_of_range_observation_rejected(canon2):
    with pytest.raises(IndexError):
        filter_update(canon2, [0.5, 0.5], 0, 0, 2)


def test_obs_predictive_values(canon2):
    w = obs_predictive(canon2, [0.5, 0.5], 0, 0)
    assert w == pytest.approx([0.585, 0.415], abs=1e-12)


def test_obs_predictive_point_mass_is_row_marginal(canon2):
    for x in range(2):
        psi = np.zeros(2)
        psi[x] = 1.0
        w = obs_predictive(canon2, psi, 1, 0)
        assert w == pytest.approx(canon2.kernel[x, 1, 0].sum(axis=0), abs=1e-15)


def test_obs_predictive_sums_to_one(models):
    rng = np.random.default_rng(3)
    for m in models.values():
        for _ in range(20):
            psi = rng.dirichlet(np.ones(m.nx))
            for u in range(m.nu):
                for v in range(m.nv):
                    assert obs_predictive(m, psi, u, v).sum() == pytest.approx(1.0, abs=1e-12)


def test_stage_cost(canon2):
    assert stage_cost(canon2, [1.0, 0.0], 0, 1) == canon2.cost[0, 0, 1]
    assert stage_cost(canon2, [0.3, 0.7], 1, 0) == pytest.approx(canon2.cost[0, 1, 0])
    m = modelmod.build("dot", np.array(canon2.kernel),
                       np.broadcast_to(np.array([4.0, 0.0])[:, None, None], (2, 2, 2)).copy(),
                       [0.5, 0.5])
    assert stage_cost(m, [0.25, 0.75], 0, 0) == pytest.approx(1.0)


def test_brute_force_empty_history(canon2):
    assert brute_force_posterior(canon2, []).probs == pytest.approx(canon2.initial_belief)


def test_brute_force_matches_single_update(canon2):
    for u, v, y in itertools.product(range(2), range(2), range(2)):
        oracle = brute_force_posterior(canon2, [(u, v, y)])
        chained = filter_update(canon2, canon2.initial_belief, u, v, y)
        assert oracle.probs == pytest.approx(chained.probs, abs=1e-12)


def test_brute_force_matches_chained_updates(canon2):
    for hist in itertools.product(itertools.product(range(2), range(2), range(2)), repeat=3):
        psi = Belief(canon2.initial_belief)
        for u, v, y in hist:
            psi = filter_update(canon2, psi, u, v, y)
        oracle = brute_force_posterior(canon2, hist)
        assert oracle.probs == pytest.approx(psi.probs, abs=1e-10)


def test_brute_force_cap():
    m = modelmod.canonical_models()["CANON2"]
    with pytest.raises(ValueError):
        brute_force_posterior(m, [(0, 0, 0)] * 5)


def _deterministic_model():
    # identity chain with deterministic observation y = z
    kernel = np.zeros((2, 1, 1, 2, 2))
    kernel[0, 0, 0, 0, 0] = 1.0
    kernel[1, 0, 0, 1, 1] = 1.0
    return modelmod.build("DET", kernel, np.zeros((2, 1, 1)), [1.0, 0.0])


def test_zero_probability_observation_raises():
    m = _deterministic_model()
    with pytest.raises(ZeroProbabilityObservation):
        filter_update(m, [1.0, 0.0], 0, 0, 1)


def test_zero_probability_history_raises():
    m = _deterministic_model()
    with pytest.raises(ZeroProbabilityHistory):
        brute_force_posterior(m, [(0, 0, 1)])


def test_phi_representation_is_no_op(canon2):
    # the density form of the kernel is a constant ny rescaling; running the
    # Bayes update through it must not change the posterior
    phi = canon2.phi()
    psi = np.array([0.3, 0.7])
    for u, v, y in itertools.product(range(2), range(2), range(2)):
        unnorm = psi @ phi[:, u, v, :, y]
        via_phi = unnorm / unnorm.sum()
        direct = filter_update(canon2, psi, u, v, y).probs
        assert via_phi == pytest.approx(direct, abs=1e-12)


def test_belief_renormalizes_and_guards_underflow():
    b = Belief(np.array([2.0, 6.0]))
    assert b.probs == pytest.approx([0.25, 0.75])
    with pytest.raises(ZeroProbabilityObservation):
        Belief(np.zeros(2))
