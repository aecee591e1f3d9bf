"""Sampling engines and estimators."""
import numpy as np
import pytest

from idmc.core import Cpt, DiscreteDomain, InfluenceDiagram, Node, Variable
from idmc.errors import (
    ContradictoryEvidenceError,
    RejectionBudgetError,
    UnknownVariableError,
)
from idmc.models.infection import (
    build_infection_model,
    default_infection_params,
    infection_posterior_oracle,
)
from idmc.models.oracle import enumeration_oracle
from idmc.sampler import (
    SamplerConfig,
    composite_sample,
    forward_sample,
    gibbs_local_conditional,
    gibbs_sweep,
    kernel_estimate,
    mixture_estimate,
    posterior_table,
    query,
)

from conftest import random_discrete_diagram


def sprinkler():
    """Rain -> {Sprinkler, Wet}; Wet depends on both."""
    b = DiscreteDomain(("n", "y"))
    return InfluenceDiagram(
        [
            Node(Variable(0, "Rain"), b, (), Cpt(b.values, {(): [0.8, 0.2]})),
            Node(
                Variable(1, "Sprinkler"),
                b,
                (0,),
                Cpt(b.values, {("n",): [0.6, 0.4], ("y",): [0.99, 0.01]}),
            ),
            Node(
                Variable(2, "Wet"),
                b,
                (0, 1),
                Cpt(
                    b.values,
                    {
                        ("n", "n"): [1.0, 0.0],
                        ("n", "y"): [0.1, 0.9],
                        ("y", "n"): [0.2, 0.8],
                        ("y", "y"): [0.01, 0.99],
                    },
                ),
            ),
        ]
    )


# ---------------------------------------------------------------------------
# local conditional


def test_gibbs_local_conditional_matches_bayes():
    d = sprinkler()
    # p(Rain | Sprinkler=y, Wet=y) by hand
    cfg = {1: "y", 2: "y"}
    labels, probs = gibbs_local_conditional(d, 0, cfg)
    num_y = 0.2 * 0.01 * 0.99
    num_n = 0.8 * 0.4 * 0.9
    assert labels == ["n", "y"]
    assert probs[1] == pytest.approx(num_y / (num_y + num_n))
    ora = enumeration_oracle(d, {1: "y", 2: "y"}, [0])
    assert probs[1] == pytest.approx(ora[0]["y"])


def test_gibbs_local_conditional_requires_discrete():
    d = build_infection_model(default_infection_params())
    with pytest.raises(UnknownVariableError):
        gibbs_local_conditional(d, 3, {0: "1", 1: "5", 2: "*"})


def test_gibbs_sweep_leaves_evidence_untouched():
    d = sprinkler()
    rng = np.random.default_rng(3)
    cfg = {0: "n", 1: "y", 2: "y"}
    out = gibbs_sweep(d, {2: "y"}, cfg, rng)
    assert out[2] == "y"
    assert set(out) == {0, 1, 2}


# ---------------------------------------------------------------------------
# forward sampling


def test_forward_sample_no_evidence_never_rejects():
    d = sprinkler()
    cfg, attempts = forward_sample(d, {}, SamplerConfig(m=1, seed=5))
    assert attempts == 1
    assert set(cfg) == {0, 1, 2}


def test_forward_acceptance_rate_matches_evidence_probability():
    d = sprinkler()
    evidence = {2: "y"}
    p_ev = 0.0
    for r in ("n", "y"):
        for s in ("n", "y"):
            p_ev += (
                d.conditional_density(0, {0: r})
                * d.conditional_density(1, {0: r, 1: s})
                * d.conditional_density(2, {0: r, 1: s, 2: "y"})
            )
    m = 4000
    s = composite_sample(d, evidence, SamplerConfig(m=m, seed=9))
    total = int(s.attempts.sum())
    rate = m / total
    se = np.sqrt(p_ev * (1 - p_ev) / total)
    assert abs(rate - p_ev) < 4 * se


def test_rejection_budget_error():
    d = sprinkler()
    with pytest.raises(RejectionBudgetError):
        composite_sample(
            d, {2: "y"}, SamplerConfig(m=50, seed=1, max_rejections=3)
        )


def test_orphan_evidence_is_clamped_not_rejected():
    d = sprinkler()
    s = composite_sample(d, {0: "y"}, SamplerConfig(m=200, seed=2))
    assert int(s.attempts.sum()) == 200  # no rejection possible
    assert all(h[0] == "y" for h in s.iter_histories())


# ---------------------------------------------------------------------------
# composite correctness


def test_h0_equals_pure_rejection_posterior():
    d = sprinkler()
    evidence = {2: "y"}
    ora = enumeration_oracle(d, evidence, [0])
    s = composite_sample(d, evidence, SamplerConfig(m=20000, h=0, seed=4))
    est = kernel_estimate(s, 0, "y")
    se = np.sqrt(ora[0]["y"] * (1 - ora[0]["y"]) / 20000)
    assert abs(est - ora[0]["y"]) < 4 * se


def test_mixture_beats_or_ties_kernel_and_both_match_oracle():
    d = sprinkler()
    evidence = {2: "y"}
    ora = enumeration_oracle(d, evidence, [0, 1])
    s = composite_sample(d, evidence, SamplerConfig(m=20000, h=3, seed=8))
    for t in (0, 1):
        tab = posterior_table(d, s, evidence, t, "mixture")
        for lab, (est, se) in tab.items():
            assert abs(est - ora[t][lab]) < 4 * se + 1e-9
        kt = posterior_table(d, s, evidence, t, "kernel")
        assert sum(e for e, _ in kt.values()) == pytest.approx(1.0)
        assert sum(e for e, _ in tab.values()) == pytest.approx(1.0, abs=1e-9)


def test_generic_and_table_paths_agree_exactly():
    d = sprinkler()
    evidence = {2: "y"}
    cfgs = dict(m=300, h=2, seed=77)
    a = composite_sample(d, evidence, SamplerConfig(**cfgs))
    b = composite_sample(d, evidence, SamplerConfig(**cfgs, force_generic=True))
    assert a.engine in ("compiled", "pure-python") and b.engine == "generic"
    np.testing.assert_array_equal(a.attempts, b.attempts)
    for i in range(300):
        assert a.history(i) == b.history(i)


def test_same_seed_reproducible_different_seed_not():
    d = sprinkler()
    s1 = composite_sample(d, {2: "y"}, SamplerConfig(m=100, h=1, seed=5))
    s2 = composite_sample(d, {2: "y"}, SamplerConfig(m=100, h=1, seed=5))
    s3 = composite_sample(d, {2: "y"}, SamplerConfig(m=100, h=1, seed=6))
    np.testing.assert_array_equal(s1.states, s2.states)
    assert not np.array_equal(s1.states, s3.states)


def test_retain_all_keeps_intermediate_sweeps():
    d = sprinkler()
    s = composite_sample(
        d, {2: "y"}, SamplerConfig(m=10, h=4, seed=1, retain="all")
    )
    assert s.retained.shape == (10, 5, 2)
    np.testing.assert_array_equal(s.retained[:, -1, :], s.states)


def test_random_scan_order_still_matches_oracle():
    d = sprinkler()
    evidence = {2: "y"}
    ora = enumeration_oracle(d, evidence, [0])
    s = composite_sample(
        d, evidence, SamplerConfig(m=10000, h=3, seed=12, scan_order="random")
    )
    est = mixture_estimate(d, s, evidence, 0, "y")
    assert abs(est - ora[0]["y"]) < 0.02


def test_estimators_reject_evidence_targets():
    d = sprinkler()
    s = composite_sample(d, {2: "y"}, SamplerConfig(m=10, seed=0))
    with pytest.raises(UnknownVariableError):
        kernel_estimate(s, 2, "y")
    with pytest.raises(UnknownVariableError):
        mixture_estimate(d, s, {2: "y"}, 2, "y")


def test_unknown_estimator_name():
    d = sprinkler()
    s = composite_sample(d, {2: "y"}, SamplerConfig(m=10, seed=0))
    with pytest.raises(ValueError):
        posterior_table(d, s, {2: "y"}, 0, "nope")


# ---------------------------------------------------------------------------
# randomized agreement with the enumeration oracle


def test_mixture_estimate_random_diagrams():
    rng = np.random.default_rng(99)
    done = 0
    while done < 25:
        d = random_discrete_diagram(rng)
        d.validate()
        nodes = [n.var.index for n in d.nodes]
        ev_var = nodes[-1]
        ev_val = d.node(ev_var).domain.values[0]
        evidence = {ev_var: ev_val}
        try:
            ora = enumeration_oracle(d, evidence, None)
            s = composite_sample(
                d, evidence, SamplerConfig(m=4000, h=4, seed=int(rng.integers(1 << 30)))
            )
        except (ContradictoryEvidenceError, RejectionBudgetError):
            continue
        if not ora:
            continue
        for t, table in ora.items():
            tab = posterior_table(d, s, evidence, t, "mixture")
            for lab, (est, se) in tab.items():
                assert abs(est - table[lab]) < 5 * se + 5e-3, (t, lab)
        done += 1


# ---------------------------------------------------------------------------
# infection end to end


def test_infection_query_matches_oracle():
    p = default_infection_params()
    d = build_infection_model(p)
    ora = infection_posterior_oracle(p, 3.0)
    res = query(
        d,
        {3: 3.0},
        SamplerConfig(m=5000, h=5, seed=31),
        targets=[0],
        estimator="mixture",
    )
    for lab, (est, se) in res.posteriors["X0"].items():
        assert abs(est - ora[lab]) < 3 * se + 1e-9
    assert res.diagnostics["engine"] in ("compiled", "pure-python")
    assert res.diagnostics["forward_attempts"] >= 5000


def test_query_rejects_evidence_target():
    d = sprinkler()
    with pytest.raises(UnknownVariableError):
        query(d, {2: "y"}, SamplerConfig(m=10, seed=0), targets=[2])


def test_reachability_warning_fires_on_frozen_chain():
    d = build_infection_model(default_infection_params())
    s = composite_sample(d, {3: 3.0}, SamplerConfig(m=10, h=1, seed=0))
    assert any("completely connected" in w for w in s.warnings)
    s0 = composite_sample(d, {3: 3.0}, SamplerConfig(m=10, h=0, seed=0))
    assert not s0.warnings
