"""Infection model: structure, observed-time density, exact posterior."""
import json
import math
import pathlib

import pytest
from scipy import integrate

from idmc.core import hypoexp_density
from idmc.errors import ContradictoryEvidenceError, DomainError
from idmc.models.infection import (
    InfectionParams,
    build_infection_model,
    default_infection_params,
    infection_posterior_oracle,
    tobs_density,
)

FIXTURE = pathlib.Path(__file__).parent / "fixtures" / "infection_posterior_t3.json"


def test_default_params_shape():
    p = default_infection_params()
    assert p.states == ["1", "2", "3", "4", "5", "*"]
    assert sum(p.prior.values()) == pytest.approx(1.0)
    for row in p.transitions.values():
        assert sum(row.values()) == pytest.approx(1.0)
    assert set(p.lam0) == set(p.a0)


def test_model_builds_and_validates():
    d = build_infection_model(default_infection_params())
    assert [n.var.name for n in d.nodes] == ["X0", "X1", "X2", "T_obs"]
    assert d.validated
    # deterministic no-virus path: 1 -> 5 only
    assert d.conditional_density(1, {0: "1", 1: "4"}) == 0.0
    assert d.conditional_density(1, {0: "1", 1: "5"}) == 1.0


def test_tobs_density_single_phase_branch():
    p = default_infection_params()
    lam = p.lam0[("1", "5")]
    t = 2.5
    assert tobs_density(p, t, "1", "5") == pytest.approx(lam * math.exp(-lam * t))


def test_tobs_density_two_phase_branch():
    p = default_infection_params()
    key = ("2", "4")
    lam0, lam1, a0 = p.lam0[key], p.lam1["4"], p.a0[key]
    t = 5.0
    assert tobs_density(p, t, "2", "4") == pytest.approx(
        hypoexp_density(t - a0, lam0, lam1)
    )
    # convolution quadrature of the two exponential phases
    x = t - a0
    conv, _ = integrate.quad(
        lambda u: lam0 * math.exp(-lam0 * u) * lam1 * math.exp(-lam1 * (x - u)),
        0.0,
        x,
    )
    assert tobs_density(p, t, "2", "4") == pytest.approx(conv, rel=1e-9)


def test_tobs_density_zero_below_shift_and_missing_pair():
    p = default_infection_params()
    assert tobs_density(p, 2.9, "2", "4") == 0.0  # shift is 3.0
    with pytest.raises(DomainError):
        tobs_density(p, 1.0, "1", "4")  # structurally impossible transition


def test_tobs_density_integrates_to_one_each_pair():
    p = default_infection_params()
    for (x0, x1) in p.lam0:
        val, _ = integrate.quad(
            lambda t: tobs_density(p, t, x0, x1), 0.0, 200.0, limit=200
        )
        assert val == pytest.approx(1.0, abs=1e-6), (x0, x1)


def test_oracle_normalizes_and_respects_support():
    p = default_infection_params()
    post = infection_posterior_oracle(p, 3.0)
    assert sum(post.values()) == pytest.approx(1.0)
    assert post["4"] == 0.0 and post["*"] == 0.0
    # at t=3 the incubation shifts exclude every replication path
    assert post["1"] > 0.5
    post5 = infection_posterior_oracle(p, 5.0)
    assert sum(post5.values()) == pytest.approx(1.0)
    assert post5["2"] > post["2"]  # replication paths become possible


def test_oracle_rejects_impossible_time():
    p = InfectionParams(
        states=["1", "5", "*"],
        prior={"1": 1.0, "5": 0.0, "*": 0.0},
        transitions={"1": {"5": 1.0}, "5": {"*": 1.0}, "*": {"*": 1.0}},
        lam0={("1", "5"): 1.0},
        a0={("1", "5"): 2.0},
        lam1={},
    )
    with pytest.raises(ContradictoryEvidenceError):
        infection_posterior_oracle(p, 1.0)


def test_frozen_fixture_matches_oracle():
    p = default_infection_params()
    frozen = json.loads(FIXTURE.read_text())
    live = infection_posterior_oracle(p, frozen["t_obs"])
    for lab, val in frozen["posterior_x0"].items():
        assert live[lab] == pytest.approx(val, abs=1e-12)
