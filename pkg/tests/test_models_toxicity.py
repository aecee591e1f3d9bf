"""Toxicity model: structure, coefficient learning, survival prediction."""
import math

import numpy as np
import pytest

from idmc.errors import DomainError, IdmcError
from idmc.models.toxicity import (
    ALIVE,
    DEAD,
    ToxicityParams,
    build_toxicity_model,
    conjugate_alpha_posterior,
    learn_alpha_posterior,
    predict_survival,
    survival_prob,
    toxicity_layout,
)


def small_params(**kw):
    return ToxicityParams(horizon=kw.pop("horizon", 3), **kw)


def synthetic_history(p: ToxicityParams, k: int, seed: int = 0):
    """Simulate dysfunction under a fixed true coefficient vector."""
    rng = np.random.default_rng(seed)
    alpha = np.array([0.2, 0.6, 0.2])
    r = [p.r0]
    d = []
    for i in range(k):
        dose = int(rng.integers(2))
        d.append(dose)
        nxt = alpha[0] + r[-1] * (alpha[1] + alpha[2] * dose) + rng.normal(0, p.sigma)
        r.append(float(np.clip(nxt, 0.05, p.upper - 0.05)))
    return d, r


# ---------------------------------------------------------------------------
# structure


def test_layout_and_edges():
    p = small_params(horizon=2)
    d = build_toxicity_model(p)
    lay = toxicity_layout(2)
    assert d.node(lay["R1"]).parents == (lay["alpha"], lay["R0"], lay["D1"])
    assert d.node(lay["X2"]).parents == (lay["X1"], lay["R1"])
    assert d.node(lay["X0"]).parents == ()
    assert d.validated


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        build_toxicity_model(small_params(), horizon=0)


# ---------------------------------------------------------------------------
# survival transition


def test_survival_prob_closed_form():
    # with s(r) = 0.5 at the queried level and k*T = 1, survival is e^{-1/2}
    p = ToxicityParams(
        s_knots_r=np.array([0.0, 10.0]),
        s_knots_p=np.array([0.5, 0.5]),
    )
    assert survival_prob(4.2, p) == pytest.approx(math.exp(-0.5))
    with pytest.raises(DomainError):
        survival_prob(0.0, p)
    with pytest.raises(DomainError):
        survival_prob(10.0, p)


def test_survival_prob_monotone_in_s():
    p = ToxicityParams()
    # s is non-increasing in r, so survival is non-increasing too
    levels = np.linspace(0.5, 9.5, 30)
    probs = [survival_prob(r, p) for r in levels]
    assert all(b <= a + 1e-12 for a, b in zip(probs, probs[1:]))
    assert all(0.0 < q <= 1.0 for q in probs)


# ---------------------------------------------------------------------------
# coefficient learning


def test_conjugate_posterior_flat_prior_recovers_least_squares():
    p = small_params(sigma=0.1)
    p.alpha_cov = np.diag([1e6, 1e6, 1e6])
    d_obs, r_obs = synthetic_history(p, 30, seed=3)
    mean, cov = conjugate_alpha_posterior(p, d_obs, r_obs)
    Z = np.array(
        [[1.0, r_obs[i], r_obs[i] * d_obs[i]] for i in range(30)]
    )
    y = np.array(r_obs[1:])
    ls, *_ = np.linalg.lstsq(Z, y, rcond=None)
    np.testing.assert_allclose(mean, ls, atol=1e-3)


def test_conjugate_posterior_single_observation_rank_one():
    p = small_params()
    d_obs, r_obs = [1], [1.0, 1.5]
    mean, cov = conjugate_alpha_posterior(p, d_obs, r_obs)
    # independent rank-one Bayes update
    z = np.array([1.0, 1.0, 1.0])
    V0 = np.asarray(p.alpha_cov, float)
    m0 = np.asarray(p.alpha_mean, float)
    s = p.sigma**2 + z @ V0 @ z
    k = V0 @ z / s
    np.testing.assert_allclose(mean, m0 + k * (1.5 - z @ m0), atol=1e-12)
    np.testing.assert_allclose(cov, V0 - np.outer(k, z @ V0), atol=1e-12)


def test_learn_alpha_matches_closed_form():
    p = small_params(sigma=0.25)
    d_obs, r_obs = synthetic_history(p, 8, seed=5)
    res = learn_alpha_posterior(p, d_obs, r_obs, m=3000, h=1, seed=11)
    se = np.sqrt(np.diag(res.closed_cov) / 3000)
    assert np.all(np.abs(res.sample_mean - res.closed_mean) < 4 * se)
    rel = np.linalg.norm(res.sample_cov - res.closed_cov) / np.linalg.norm(
        res.closed_cov
    )
    assert rel < 0.15


def test_learn_alpha_input_validation():
    p = small_params()
    with pytest.raises(ValueError):
        learn_alpha_posterior(p, [], [1.0])
    with pytest.raises(ValueError):
        learn_alpha_posterior(p, [1], [1.0])
    with pytest.raises(DomainError):
        learn_alpha_posterior(p, [1], [1.0, 20.0])
    with pytest.raises(IdmcError):
        learn_alpha_posterior(p, [1], [1.0, 1.2], x_obs=[ALIVE, DEAD])


# ---------------------------------------------------------------------------
# prediction


def test_predict_survival_monotone_and_bounded():
    p = small_params()
    pred = predict_survival(
        p, (np.asarray(p.alpha_mean), np.asarray(p.alpha_cov)), 1.0, [1, 1, 0, 1, 0]
    )
    means = pred.means()
    assert len(means) == 5
    assert all(0.0 <= q <= 1.0 for q in means)
    assert all(b <= a + 1e-12 for a, b in zip(means, means[1:]))


def test_predict_survival_accepts_draw_matrix():
    p = small_params()
    draws = np.tile(np.asarray(p.alpha_mean), (50, 1))
    pred = predict_survival(p, draws, 1.0, [1, 1], seed=4)
    assert len(pred.steps) == 2


def test_predict_survival_plans_differ():
    # strong dose effect: dosing raises dysfunction, lowering survival
    p = ToxicityParams(
        alpha_mean=np.array([0.2, 0.9, 0.8]),
        alpha_cov=np.diag([1e-6, 1e-6, 1e-6]),
        sigma=0.05,
    )
    post = (np.asarray(p.alpha_mean), np.asarray(p.alpha_cov))
    on = predict_survival(p, post, 2.0, [1] * 6, seed=9, rollouts=4000)
    off = predict_survival(p, post, 2.0, [0] * 6, seed=9, rollouts=4000)
    assert on.means()[-1] < off.means()[-1]


def test_predict_survival_dead_and_empty():
    p = small_params()
    post = (np.asarray(p.alpha_mean), np.asarray(p.alpha_cov))
    assert predict_survival(p, post, 1.0, []).steps == []
    dead = predict_survival(p, post, 1.0, [1, 1], alive=False)
    assert dead.means() == [0.0, 0.0]


def test_predict_survival_perfect_health_is_certain():
    # s identically one => survival probability one at every step
    p = ToxicityParams(
        s_knots_r=np.array([0.0, 10.0]), s_knots_p=np.array([1.0, 1.0])
    )
    post = (np.asarray(p.alpha_mean), np.asarray(p.alpha_cov))
    pred = predict_survival(p, post, 1.0, [1, 0, 1], rollouts=200)
    assert pred.means() == [1.0, 1.0, 1.0]
