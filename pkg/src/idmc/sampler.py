"""Forward, single-site, and composite Monte Carlo engines plus estimators.

The composite scheme seeds m chains by forward sampling with rejection
against the evidence, refines each seed with h single-site sweeps, and
keeps the final configuration of every chain.  Posteriors are estimated
either by counting matching histories (kernel estimator) or by averaging
exact local conditionals across histories (finite mixture estimator).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

from idmc import emc as emc_mod
from idmc.core import InfluenceDiagram, check_evidence, is_discrete
from idmc.engine import kernel_name, kernels
from idmc.errors import (
    BlanketInconsistencyError,
    InvalidModelError,
    RejectionBudgetError,
    UnknownVariableError,
)
from idmc.tables import DiscreteProgram, compile_program, local_conditional_matrix


@dataclass
class SamplerConfig:
    m: int = 1000
    h: int = 0
    seed: int | None = None
    max_rejections: int = 1_000_000
    scan_order: str = "fixed"      # "fixed" | "random"
    retain: str = "last"           # "last" | "all"
    force_generic: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.h < 0:
            raise ValueError("h must be >= 0")
        if self.max_rejections < 1:
            raise ValueError("max_rejections must be >= 1")
        if self.scan_order not in ("fixed", "random"):
            raise ValueError("scan_order must be 'fixed' or 'random'")
        if self.retain not in ("last", "all"):
            raise ValueError("retain must be 'last' or 'all'")


@dataclass
class SampleSet:
    """m sampled histories plus run diagnostics.

    Discrete free variables are stored as integer codes into per-variable
    label lists; other variables as plain object/float columns.
    """

    diagram: InfluenceDiagram
    evidence: dict
    m: int
    h: int
    seed: int
    columns: dict = field(default_factory=dict)        # var index -> array
    labels: dict = field(default_factory=dict)         # var index -> label list
    attempts: np.ndarray | None = None                 # per-chain forward attempts
    gibbs_changes: dict = field(default_factory=dict)  # var name -> move count
    warnings: list = field(default_factory=list)
    program: DiscreteProgram | None = None
    states: np.ndarray | None = None                   # int32 (m, p) final states
    retained: np.ndarray | None = None                 # int32 (m, h+1, p) if kept
    engine: str = ""

    @property
    def rejection_rate(self) -> float:
        total = int(self.attempts.sum())
        return 1.0 - self.m / total if total else 0.0

    def value(self, i: int, var: int):
        if var in self.evidence:
            return self.evidence[var]
        col = self.columns[var]
        if var in self.labels:
            return self.labels[var][int(col[i])]
        return col[i]

    def history(self, i: int) -> dict:
        return {n.var.index: self.value(i, n.var.index) for n in self.diagram.nodes}

    def iter_histories(self):
        for i in range(self.m):
            yield self.history(i)


# ---------------------------------------------------------------------------
# local conditionals


def gibbs_local_conditional(
    d: InfluenceDiagram,
    node: int,
    cfg: Mapping,
    domain: list[str] | None = None,
):
    """Normalized single-site conditional of a discrete node given its blanket.

    Proportional to p(y | parents) times the product of the node's
    children's conditionals evaluated at the configuration with the node
    set to y.  Returns (labels, probabilities).
    """
    n = d.node(node)
    if not is_discrete(n.domain):
        raise UnknownVariableError(f"node {n.var.name} is not discrete")
    labels = list(domain) if domain is not None else list(n.domain.values)
    children = d.children(node)
    cfg2 = dict(cfg)
    weights = np.empty(len(labels))
    for k, y in enumerate(labels):
        cfg2[node] = y
        w = d.conditional_density(node, cfg2)
        for c in children:
            if w == 0.0:
                break
            w *= d.conditional_density(c, cfg2)
        weights[k] = w
    total = weights.sum()
    if total <= 0.0:
        raise BlanketInconsistencyError(n.var.name)
    return labels, weights / total


def _draw_from(labels, probs, rng) -> str:
    u = rng.random()
    acc = 0.0
    for lab, p in zip(labels, probs):
        acc += p
        if u < acc:
            return lab
    return labels[-1]


def gibbs_sweep(
    d: InfluenceDiagram,
    evidence: Mapping,
    cfg: Mapping,
    rng: Generator,
    scan_order: str = "fixed",
    restricted: Mapping | None = None,
    conditionals: Mapping[int, Callable] | None = None,
) -> dict:
    """Resample every free variable once; evidence variables are untouched.

    Discrete free variables draw from their exact local conditional.
    Continuous free variables are redrawn from a registered closed-form
    conditional when one is supplied, or from p(value | parents) when
    they have no children; otherwise they keep their value.
    """
    restricted = restricted or {}
    conditionals = conditionals or {}
    out = dict(cfg)
    free = [v for v in d.topological_order() if v not in evidence]
    if scan_order == "random":
        free = [free[i] for i in rng.permutation(len(free))]
    for v in free:
        n = d.node(v)
        if is_discrete(n.domain):
            labels, probs = gibbs_local_conditional(d, v, out, restricted.get(v))
            out[v] = _draw_from(labels, probs, rng)
        elif v in conditionals:
            out[v] = conditionals[v](out, rng)
        elif not d.children(v):
            parents = tuple(out[p] for p in n.parents)
            out[v] = n.dist.sample(parents, rng)
    return out


# ---------------------------------------------------------------------------
# forward sampling (generic path)


def _generic_forward_once(d, evidence, rng, restricted):
    cfg = {}
    for v in d.topological_order():
        n = d.node(v)
        parents = tuple(cfg[p] for p in n.parents)
        if v in evidence:
            cfg[v] = evidence[v]
            if is_discrete(n.domain) and n.parents:
                # classic logic sampling: accept with the observed value's
                # conditional mass (drawing the node and comparing)
                if rng.random() >= n.dist.mass(evidence[v], parents):
                    return None
            elif n.dist.mass(evidence[v], parents) <= 0.0:
                return None
        else:
            val = n.dist.sample(parents, rng)
            allowed = restricted.get(v) if restricted else None
            if allowed is not None and val not in allowed:
                return None
            cfg[v] = val
    return cfg


def forward_sample(
    d: InfluenceDiagram,
    evidence: Mapping,
    config: SamplerConfig | None = None,
    restricted_domains: Mapping | None = None,
):
    """One evidence-consistent configuration by ancestral sampling with
    rejection.  Returns (configuration, attempts)."""
    config = config or SamplerConfig(m=1)
    s = composite_sample(
        d,
        evidence,
        SamplerConfig(
            m=1,
            h=0,
            seed=config.seed,
            max_rejections=config.max_rejections,
            force_generic=config.force_generic,
        ),
        restricted_domains=restricted_domains,
    )
    return s.history(0), int(s.attempts[0])


# ---------------------------------------------------------------------------
# composite sampling


def _require_valid(d: InfluenceDiagram) -> None:
    if not d.validated:
        rep = d.validate()
        if not rep.ok:
            raise InvalidModelError(rep)


def _reachability_warning(d, evidence, restricted):
    chain = emc_mod.detect_chain(d)
    if not chain:
        return None
    try:
        e = emc_mod.extract_emc(d, chain)
    except Exception:
        return None
    for pos, v in enumerate(chain):
        if v in evidence:
            e.domains[pos] = [evidence[v]]
        elif restricted and v in restricted:
            e.domains[pos] = [x for x in e.full_domains[pos] if x in set(restricted[v])]
    if not emc_mod.gibbs_reachability_ok(e):
        return (
            "embedded chain is not completely connected over the current "
            "domains; single-site moves may not cross compatibility "
            "components (forward seeds mitigate)"
        )
    return None


def _resolve_seed(seed):
    if seed is not None:
        return int(seed)
    drawn = int(SeedSequence().entropy)
    return drawn


def composite_sample(
    d: InfluenceDiagram,
    evidence: Mapping,
    config: SamplerConfig | None = None,
    restricted_domains: Mapping | None = None,
    conditionals: Mapping[int, Callable] | None = None,
) -> SampleSet:
    """m forward-accepted seeds, each refined by h single-site sweeps.

    h = 0 degenerates to pure rejection sampling.  A non-fatal warning is
    attached when the embedded chain fails the complete-connectivity
    condition and h > 0.
    """
    config = config or SamplerConfig()
    _require_valid(d)
    evidence = dict(evidence)
    check_evidence(d, evidence)
    seed = _resolve_seed(config.seed)
    warnings = []
    if config.h > 0:
        w = _reachability_warning(d, evidence, restricted_domains)
        if w:
            warnings.append(w)

    program = None
    if not config.force_generic and not conditionals:
        program = compile_program(d, evidence, restricted_domains)

    root = SeedSequence(seed)
    chain_seeds = root.spawn(config.m)

    if program is not None:
        s = _run_table_path(d, evidence, config, program, root, chain_seeds, seed)
    else:
        s = _run_generic_path(
            d, evidence, config, restricted_domains, conditionals, chain_seeds, seed
        )
    s.warnings.extend(warnings)
    return s


def _run_table_path(d, evidence, config, program, root, chain_seeds, seed):
    bitgens = [PCG64(c) for c in chain_seeds]
    res = kernels.run_composite(
        program.flat,
        config.m,
        config.h,
        bitgens,
        config.max_rejections,
        config.scan_order == "random",
        config.retain == "all",
    )
    if res["status"] == 1:
        raise RejectionBudgetError(
            res["done"], int(res["attempts"].sum()), config.max_rejections
        )
    if res["status"] == 2:
        name = d.node(program.free_vars[res["fail_var"]]).var.name
        raise BlanketInconsistencyError(name)
    states = res["states"]
    retained = None
    if config.retain == "all":
        retained = states
        last = states[:, -1, :]
    else:
        last = states
    columns = {}
    labels = {}
    for j, v in enumerate(program.free_vars):
        columns[v] = last[:, j].copy()
        labels[v] = program.labels[j]
    s = SampleSet(
        diagram=d,
        evidence=evidence,
        m=config.m,
        h=config.h,
        seed=seed,
        columns=columns,
        labels=labels,
        attempts=res["attempts"],
        gibbs_changes={
            d.node(v).var.name: int(res["changes"][j])
            for j, v in enumerate(program.free_vars)
        },
        program=program,
        states=np.ascontiguousarray(last),
        retained=retained,
        engine=kernel_name(),
    )
    if program.cont_leaves:
        leaf_seeds = root.spawn(config.m)
        for v in program.cont_leaves:
            s.columns[v] = np.empty(config.m, dtype=object)
        for i in range(config.m):
            rng = Generator(PCG64(leaf_seeds[i]))
            base = s.history(i)
            for v in program.cont_leaves:
                n = d.node(v)
                parents = tuple(base[p] for p in n.parents)
                val = n.dist.sample(parents, rng)
                s.columns[v][i] = val
                base[v] = val
    return s


def _run_generic_path(d, evidence, config, restricted, conditionals, chain_seeds, seed):
    restricted = restricted or {}
    free = [v for v in d.topological_order() if v not in evidence]
    columns = {v: np.empty(config.m, dtype=object) for v in free}
    attempts = np.zeros(config.m, dtype=np.int64)
    changes = {d.node(v).var.name: 0 for v in free}
    for i in range(config.m):
        rng = Generator(PCG64(chain_seeds[i]))
        cfg = None
        for _ in range(config.max_rejections):
            attempts[i] += 1
            cfg = _generic_forward_once(d, evidence, rng, restricted)
            if cfg is not None:
                break
        if cfg is None:
            raise RejectionBudgetError(i, int(attempts.sum()), config.max_rejections)
        for _ in range(config.h):
            new = gibbs_sweep(
                d, evidence, cfg, rng, config.scan_order, restricted, conditionals
            )
            for v in free:
                if not _same_value(new[v], cfg[v]):
                    changes[d.node(v).var.name] += 1
            cfg = new
        for v in free:
            columns[v][i] = cfg[v]
    return SampleSet(
        diagram=d,
        evidence=dict(evidence),
        m=config.m,
        h=config.h,
        seed=seed,
        columns=columns,
        labels={},
        attempts=attempts,
        gibbs_changes=changes,
        program=None,
        engine="generic",
    )


def _same_value(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return bool(np.array_equal(a, b))
    return a == b


# ---------------------------------------------------------------------------
# estimators


def _target_labels(s: SampleSet, target: int) -> list[str]:
    if target in s.labels:
        return list(s.labels[target])
    n = s.diagram.node(target)
    if not is_discrete(n.domain):
        raise UnknownVariableError(f"estimation target {n.var.name} is not discrete")
    return list(n.domain.values)


def kernel_estimate(s: SampleSet, target: int, value) -> float:
    """Fraction of the m final histories in which target takes value."""
    if target in s.evidence:
        raise UnknownVariableError("estimation target must be a free variable")
    col = s.columns[target]
    if target in s.labels:
        labels = s.labels[target]
        if value not in labels:
            return 0.0
        return float(np.count_nonzero(col == labels.index(value)) / s.m)
    return float(sum(1 for x in col if x == value) / s.m)


def mixture_columns(d, s: SampleSet, evidence, target: int):
    """Per-history exact local conditionals of target: (labels, (m, nv))."""
    if target in s.evidence:
        raise UnknownVariableError("estimation target must be a free variable")
    if s.program is not None and target in s.program.free_vars:
        q = s.program.position(target)
        probs, totals = local_conditional_matrix(s.program, s.states, q)
        if np.any(totals <= 0.0):
            raise BlanketInconsistencyError(d.node(target).var.name)
        return s.program.labels[q], probs
    labels = _target_labels(s, target)
    probs = np.empty((s.m, len(labels)))
    for i in range(s.m):
        lab, row = gibbs_local_conditional(d, target, s.history(i), labels)
        probs[i, :] = row
    return labels, probs


def mixture_estimate(d, s: SampleSet, evidence, target: int, value) -> float:
    """Rao-Blackwellized average of exact local conditionals of target."""
    labels, probs = mixture_columns(d, s, evidence, target)
    if value not in labels:
        return 0.0
    return float(probs[:, labels.index(value)].mean())


def posterior_table(d, s: SampleSet, evidence, target: int, estimator: str):
    """Posterior estimate with standard errors over the target's domain.

    Returns {label: (estimate, standard_error)}.
    """
    if estimator == "kernel":
        labels = _target_labels(s, target)
        out = {}
        for lab in labels:
            p = kernel_estimate(s, target, lab)
            out[lab] = (p, math.sqrt(max(p * (1.0 - p), 0.0) / s.m))
        return out
    if estimator == "mixture":
        labels, probs = mixture_columns(d, s, evidence, target)
        out = {}
        for k, lab in enumerate(labels):
            col = probs[:, k]
            out[lab] = (float(col.mean()), float(col.std(ddof=1) / math.sqrt(s.m)))
        return out
    raise ValueError(f"unknown estimator {estimator!r}")


@dataclass
class QueryResult:
    posteriors: dict            # variable name -> {label: (estimate, se)}
    diagnostics: dict
    warnings: list
    sample_set: SampleSet


def query(
    d: InfluenceDiagram,
    evidence: Mapping,
    config: SamplerConfig | None = None,
    targets: list[int] | None = None,
    estimator: str = "mixture",
    restricted_domains: Mapping | None = None,
    conditionals: Mapping[int, Callable] | None = None,
) -> QueryResult:
    """Run one composite-sampling pass and estimate per-target posteriors."""
    config = config or SamplerConfig()
    s = composite_sample(d, evidence, config, restricted_domains, conditionals)
    if targets is None:
        targets = [
            n.var.index
            for n in d.nodes
            if n.var.index not in s.evidence and is_discrete(n.domain)
        ]
    posteriors = {}
    for t in targets:
        if t in s.evidence:
            raise UnknownVariableError(
                f"query target {d.node(t).var.name} is an evidence variable"
            )
        posteriors[d.node(t).var.name] = posterior_table(d, s, evidence, t, estimator)
    diagnostics = {
        "m": s.m,
        "h": s.h,
        "seed": s.seed,
        "engine": s.engine,
        "estimator": estimator,
        "forward_attempts": int(s.attempts.sum()),
        "rejection_rate": s.rejection_rate,
        "gibbs_changes": s.gibbs_changes,
    }
    return QueryResult(posteriors, diagnostics, list(s.warnings), s)
