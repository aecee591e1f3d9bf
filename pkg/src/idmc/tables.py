"""Compilation of a diagram plus evidence into dense factor tables.

The compiled program covers the common case where every free variable is
discrete (free continuous leaves are allowed and drawn in a post-pass).
Evidence values are baked into the tables, so the sampling kernels only
ever manipulate an integer state vector over the free discrete variables.

The forward pass is a topologically ordered step list.  A sampling step
draws a free variable from p(value | parents); a check step accepts a
discrete evidence node with probability p(observed | parents) — the
draw-and-compare rejection of classic logic sampling — so the overall
acceptance rate equals the probability of the evidence.  Continuous
evidence contributes a density-positivity check instead (a density value
cannot be matched by a draw), evaluated after the pass.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from idmc.core import InfluenceDiagram, is_discrete
from idmc.errors import ContradictoryEvidenceError


@dataclass
class Factor:
    """Dense table over a subset of the free discrete variables.

    scope holds positions into the free-variable list; the table axes
    follow scope order and index the restricted domains.
    """

    node: int
    scope: tuple[int, ...]
    table: np.ndarray


@dataclass
class DiscreteProgram:
    free_vars: list[int]               # diagram indices, topological order
    labels: list[list[str]]            # restricted domain labels per free var
    dom_sizes: np.ndarray              # int32[p]
    forward: list[Factor]              # per var: p(value | free discrete parents)
    factors: list[Factor]              # local factors driving single-site updates
    var_factors: list[list[int]]       # factor ids touching each free var
    acceptance: list[int]              # factor ids checked > 0 after a forward pass
    steps: list[tuple[int, int]]       # (0, free var position) | (1, factor id)
    cont_leaves: list[int]             # free continuous leaf node indices
    flat: "FlatProgram" = None

    @property
    def p(self) -> int:
        return len(self.free_vars)

    def position(self, var_index: int) -> int:
        return self.free_vars.index(var_index)


@dataclass
class FlatProgram:
    """The same program as contiguous arrays, consumable by the kernels."""

    dom_sizes: np.ndarray      # int32[p]
    step_kind: np.ndarray      # int32[n_steps]  0 = sample, 1 = evidence check
    step_idx: np.ndarray       # int32[n_steps]  free var position | factor id
    fwd_scope_off: np.ndarray  # int32[p+1]
    fwd_scope: np.ndarray      # int32[]
    fwd_off: np.ndarray        # int64[p+1]
    fwd_data: np.ndarray       # float64[]
    fac_scope_off: np.ndarray  # int32[nf+1]
    fac_scope: np.ndarray      # int32[]
    fac_off: np.ndarray        # int64[nf+1]
    fac_data: np.ndarray       # float64[]
    vf_off: np.ndarray         # int32[p+1]
    vf_fac: np.ndarray         # int32[]  factor id
    vf_pos: np.ndarray         # int32[]  position of the var inside the factor scope
    acc: np.ndarray            # int32[]  acceptance factor ids


def compile_program(
    d: InfluenceDiagram,
    evidence: dict,
    restricted: dict[int, list[str]] | None = None,
) -> DiscreteProgram | None:
    """Build the table program, or return None when the model needs the
    generic evaluator (free continuous non-leaf variables)."""
    restricted = restricted or {}
    order = d.topological_order()
    free = [i for i in order if i not in evidence]
    free_discrete = []
    cont_leaves = []
    for i in free:
        if is_discrete(d.node(i).domain):
            free_discrete.append(i)
        elif not d.children(i):
            cont_leaves.append(i)
        else:
            return None

    pos = {v: j for j, v in enumerate(free_discrete)}
    labels = []
    for v in free_discrete:
        full = list(d.node(v).domain.values)
        allowed = restricted.get(v)
        if allowed is None:
            labels.append(full)
        else:
            kept = [x for x in full if x in set(allowed)]
            if not kept:
                raise ContradictoryEvidenceError(
                    f"restricted domain of {d.node(v).var.name} is empty"
                )
            labels.append(kept)
    dom_sizes = np.array([len(x) for x in labels], dtype=np.int32)

    def value_grid(scope_vars):
        return itertools.product(*(labels[pos[v]] for v in scope_vars))

    # local factors: one per node whose conditional touches a free discrete
    # var, plus a scalar factor per fully-determined discrete evidence node
    # (its constant acceptance probability)
    factors: list[Factor] = []
    acceptance: list[int] = []
    factor_by_node: dict[int, int] = {}
    cont_leaf_set = set(cont_leaves)
    for n in d.nodes:
        i = n.var.index
        if i in cont_leaf_set:
            continue  # integrates to one over the unobserved leaf
        scope_vars = [v for v in (i,) + n.parents if v in pos]
        scope_vars = list(dict.fromkeys(scope_vars))
        checkable = i in evidence and is_discrete(n.domain) and n.parents
        if not scope_vars and not checkable:
            if i in evidence:
                base = {k: v for k, v in evidence.items()}
                if d.conditional_density(i, base) <= 0.0:
                    raise ContradictoryEvidenceError(
                        f"evidence on {n.var.name} has zero probability"
                    )
            continue
        shape = tuple(dom_sizes[pos[v]] for v in scope_vars)
        table = np.empty(shape, dtype=np.float64)
        for combo in value_grid(scope_vars):
            cfg = dict(evidence)
            cfg.update(dict(zip(scope_vars, combo)))
            idx = tuple(labels[pos[v]].index(val) for v, val in zip(scope_vars, combo))
            table[idx] = d.conditional_density(i, cfg)
        if not scope_vars and table[()] <= 0.0:
            raise ContradictoryEvidenceError(
                f"evidence on {n.var.name} has zero probability"
            )
        fid = len(factors)
        factors.append(Factor(i, tuple(pos[v] for v in scope_vars), table))
        factor_by_node[i] = fid
        if i in evidence and not checkable:
            acceptance.append(fid)

    var_factors: list[list[int]] = [[] for _ in free_discrete]
    for fid, f in enumerate(factors):
        for q in f.scope:
            var_factors[q].append(fid)

    # forward-sampling rows: p(value | free discrete parents), evidence baked;
    # row mass on excluded labels is simply absent and triggers rejection
    forward: list[Factor] = []
    for v in free_discrete:
        n = d.node(v)
        par = [q for q in n.parents if q in pos]
        shape = tuple(dom_sizes[pos[q]] for q in par) + (dom_sizes[pos[v]],)
        table = np.empty(shape, dtype=np.float64)
        for combo in value_grid(par):
            cfg = dict(evidence)
            cfg.update(dict(zip(par, combo)))
            base = tuple(labels[pos[q]].index(val) for q, val in zip(par, combo))
            for vi, vlabel in enumerate(labels[pos[v]]):
                cfg[v] = vlabel
                table[base + (vi,)] = d.conditional_density(v, cfg)
        forward.append(Factor(v, tuple(pos[q] for q in par), table))

    # forward pass: sample free vars and check discrete evidence, both in
    # diagram topological order so every kernel consumes draws identically
    steps: list[tuple[int, int]] = []
    for i in order:
        if i in pos:
            steps.append((0, pos[i]))
        elif (
            i in evidence
            and is_discrete(d.node(i).domain)
            and d.node(i).parents
            and i in factor_by_node
        ):
            steps.append((1, factor_by_node[i]))

    prog = DiscreteProgram(
        free_vars=free_discrete,
        labels=labels,
        dom_sizes=dom_sizes,
        forward=forward,
        factors=factors,
        var_factors=var_factors,
        acceptance=acceptance,
        steps=steps,
        cont_leaves=cont_leaves,
    )
    prog.flat = _flatten(prog)
    return prog


def _flatten(prog: DiscreteProgram) -> FlatProgram:
    p = prog.p

    fwd_scope, fwd_scope_off = [], [0]
    fwd_data, fwd_off = [], [0]
    for f in prog.forward:
        fwd_scope.extend(f.scope)
        fwd_scope_off.append(len(fwd_scope))
        fwd_data.append(np.ascontiguousarray(f.table, dtype=np.float64).ravel())
        fwd_off.append(fwd_off[-1] + f.table.size)

    fac_scope, fac_scope_off = [], [0]
    fac_data, fac_off = [], [0]
    for f in prog.factors:
        fac_scope.extend(f.scope)
        fac_scope_off.append(len(fac_scope))
        fac_data.append(np.ascontiguousarray(f.table, dtype=np.float64).ravel())
        fac_off.append(fac_off[-1] + f.table.size)

    vf_fac, vf_pos, vf_off = [], [], [0]
    for q in range(p):
        for fid in prog.var_factors[q]:
            vf_fac.append(fid)
            vf_pos.append(prog.factors[fid].scope.index(q))
        vf_off.append(len(vf_fac))

    def cat(chunks):
        if not chunks:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate(chunks)

    return FlatProgram(
        dom_sizes=prog.dom_sizes.astype(np.int32),
        step_kind=np.array([k for k, _ in prog.steps], dtype=np.int32),
        step_idx=np.array([i for _, i in prog.steps], dtype=np.int32),
        fwd_scope_off=np.array(fwd_scope_off, dtype=np.int32),
        fwd_scope=np.array(fwd_scope, dtype=np.int32),
        fwd_off=np.array(fwd_off, dtype=np.int64),
        fwd_data=cat(fwd_data),
        fac_scope_off=np.array(fac_scope_off, dtype=np.int32),
        fac_scope=np.array(fac_scope, dtype=np.int32),
        fac_off=np.array(fac_off, dtype=np.int64),
        fac_data=cat(fac_data),
        vf_off=np.array(vf_off, dtype=np.int32),
        vf_fac=np.array(vf_fac, dtype=np.int32),
        vf_pos=np.array(vf_pos, dtype=np.int32),
        acc=np.array(prog.acceptance, dtype=np.int32),
    )


def local_conditional_matrix(prog: DiscreteProgram, states: np.ndarray, q: int):
    """Vectorized local conditionals for free var position q.

    states is int32 (m, p); returns (m, dom_q) of normalized probabilities.
    Rows that are identically zero are left as zero (caller decides).
    """
    m = states.shape[0]
    nv = int(prog.dom_sizes[q])
    out = np.ones((m, nv), dtype=np.float64)
    for fid in prog.var_factors[q]:
        f = prog.factors[fid]
        axis_q = f.scope.index(q)
        tab = np.moveaxis(f.table, axis_q, -1)
        sel = tuple(states[:, var] for var in f.scope if var != q)
        out *= tab[sel] if sel else tab
    totals = out.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(totals > 0.0, out / totals, 0.0)
    return norm, totals[:, 0]
