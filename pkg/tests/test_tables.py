"""Table compilation: factor layout, evidence baking, local conditionals."""
import numpy as np
import pytest

from idmc.core import DiscreteDomain, Cpt, InfluenceDiagram, Node, Variable
from idmc.errors import ContradictoryEvidenceError
from idmc.models.infection import build_infection_model, default_infection_params
from idmc.models.toxicity import ToxicityParams, build_toxicity_model
from idmc.sampler import gibbs_local_conditional
from idmc.tables import compile_program, local_conditional_matrix

from conftest import random_discrete_diagram


def infection():
    return build_infection_model(default_infection_params())


def test_free_vars_in_topological_order():
    d = infection()
    prog = compile_program(d, {3: 3.0})
    assert prog.free_vars == [0, 1, 2]
    assert prog.labels[0] == ["1", "2", "3", "4", "5", "*"]
    assert prog.cont_leaves == []


def test_continuous_evidence_becomes_acceptance_check():
    d = infection()
    prog = compile_program(d, {3: 3.0})
    # the density factor of the continuous observation is checked after the
    # forward pass; no sampling or check step refers to it
    assert len(prog.acceptance) == 1
    fac = prog.factors[prog.acceptance[0]]
    assert fac.node == 3
    assert all(kind == 0 for kind, _ in prog.steps)
    # its table holds the observation density over the free parents
    p = default_infection_params()
    from idmc.models.infection import tobs_density

    i0 = prog.labels[0].index("2")
    i1 = prog.labels[1].index("4")
    assert fac.table[i0, i1] == pytest.approx(tobs_density(p, 3.0, "2", "4"))


def test_discrete_evidence_with_parents_becomes_check_step():
    d = infection()
    prog = compile_program(d, {2: "*", 3: 3.0})
    kinds = [k for k, _ in prog.steps]
    assert kinds.count(1) == 1
    _, fid = prog.steps[kinds.index(1)]
    assert prog.factors[fid].node == 2
    assert fid not in prog.acceptance


def test_orphan_discrete_evidence_never_checked():
    d = infection()
    prog = compile_program(d, {0: "2", 3: 3.0})
    assert prog.free_vars == [1, 2]
    assert all(kind == 0 for kind, _ in prog.steps)
    assert [prog.factors[fid].node for fid in prog.acceptance] == [3]


def test_zero_probability_evidence_rejected_at_compile_time():
    d = infection()
    with pytest.raises(ContradictoryEvidenceError):
        compile_program(d, {0: "4", 3: 3.0})  # prior mass of "4" is zero


def test_restricted_domains_shrink_tables():
    d = infection()
    prog = compile_program(d, {3: 3.0}, restricted={0: ["1", "2"]})
    assert prog.labels[0] == ["1", "2"]
    assert prog.forward[0].table.shape == (2,)
    with pytest.raises(ContradictoryEvidenceError):
        compile_program(d, {3: 3.0}, restricted={0: []})


def test_continuous_internal_variable_defeats_compilation():
    d = build_toxicity_model(ToxicityParams(horizon=2))
    assert compile_program(d, {}) is None  # R_i are continuous with children


def test_free_continuous_leaf_is_deferred():
    d = infection()
    prog = compile_program(d, {0: "1"})  # T_obs free, leaf
    assert prog.cont_leaves == [3]
    assert prog.free_vars == [1, 2]


def test_local_conditional_matrix_matches_generic_blanket():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 40:
        d = random_discrete_diagram(rng)
        nodes = [n.var.index for n in d.nodes]
        ev_var = nodes[int(rng.integers(len(nodes)))]
        ev_val = d.node(ev_var).domain.values[0]
        evidence = {ev_var: ev_val}
        try:
            d.validate()
            prog = compile_program(d, evidence)
        except ContradictoryEvidenceError:
            continue
        if prog is None or not prog.free_vars:
            continue
        # random joint states over restricted domains
        m = 8
        states = np.empty((m, prog.p), dtype=np.int32)
        for j in range(prog.p):
            states[:, j] = rng.integers(len(prog.labels[j]), size=m)
        for q in range(prog.p):
            probs, totals = local_conditional_matrix(prog, states, q)
            v = prog.free_vars[q]
            for i in range(m):
                cfg = dict(evidence)
                for j, fv in enumerate(prog.free_vars):
                    cfg[fv] = prog.labels[j][states[i, j]]
                if totals[i] <= 0.0:
                    continue  # zero-mass blanket: matrix row left at zero
                labels, ref = gibbs_local_conditional(d, v, cfg, prog.labels[q])
                assert labels == prog.labels[q]
                np.testing.assert_allclose(probs[i], ref, atol=1e-12)
                checked += 1


def test_flat_layout_round_trips():
    d = infection()
    prog = compile_program(d, {3: 3.0})
    flat = prog.flat
    assert flat.step_kind.tolist() == [k for k, _ in prog.steps]
    assert flat.step_idx.tolist() == [i for _, i in prog.steps]
    # forward table of X1 recoverable from the flat arrays
    f = prog.forward[1]
    lo, hi = flat.fwd_off[1], flat.fwd_off[2]
    np.testing.assert_array_equal(flat.fwd_data[lo:hi], f.table.ravel())
    assert flat.fwd_scope[flat.fwd_scope_off[1] : flat.fwd_scope_off[2]].tolist() == [0]
