"""Shared builders for randomized model and chain tests."""
from __future__ import annotations

import numpy as np

from idmc.core import Cpt, DiscreteDomain, InfluenceDiagram, Node, Variable
from idmc.emc import Emc


def random_chain(rng: np.random.Generator, max_vars: int = 6, max_vals: int = 6) -> Emc:
    """A random stand-alone chain with sparse random link matrices."""
    n = int(rng.integers(2, max_vars + 1))
    sizes = [int(rng.integers(1, max_vals + 1)) for _ in range(n)]
    domains = [tuple(f"v{k}" for k in range(sz)) for sz in sizes]
    links = []
    for a, b in zip(sizes, sizes[1:]):
        mask = rng.random((a, b)) < 0.45
        mat = np.where(mask, rng.random((a, b)) + 0.05, 0.0)
        row_sums = mat.sum(axis=1, keepdims=True)
        np.divide(mat, row_sums, out=mat, where=row_sums > 0)
        links.append(mat)
    return Emc(
        var_indices=list(range(n)),
        names=[f"X{i}" for i in range(n)],
        full_domains=domains,
        domains=[list(dom) for dom in domains],
        links=links,
    )


def restrict_randomly(e: Emc, rng: np.random.Generator) -> None:
    """Drop a random (possibly empty) subset of values from each domain."""
    for pos in range(len(e.domains)):
        keep = [v for v in e.domains[pos] if rng.random() > 0.25]
        if keep:
            e.domains[pos] = keep


def suffix_supportable(e: Emc) -> list[set[str]]:
    """Per position, the values from which a full path to the chain end
    exists inside the current domains — the independent pruning oracle."""
    n = len(e.domains)
    alive = [set(e.domains[n - 1])]
    for pos in range(n - 2, -1, -1):
        mat = e.links[pos]
        nxt = alive[0]
        nxt_idx = [e.full_domains[pos + 1].index(v) for v in nxt]
        cur = set()
        for val in e.domains[pos]:
            h = e.full_domains[pos].index(val)
            if any(mat[h, k] > 0.0 for k in nxt_idx):
                cur.add(val)
        alive.insert(0, cur)
    return alive


def random_row(rng: np.random.Generator, n: int, allow_zero: bool = True):
    """A random probability row, occasionally with structural zeros."""
    w = rng.random(n) + 0.02
    if allow_zero and n > 1 and rng.random() < 0.3:
        w[rng.integers(n)] = 0.0
    return (w / w.sum()).tolist()


def random_discrete_diagram(
    rng: np.random.Generator, max_nodes: int = 5, max_vals: int = 4
) -> InfluenceDiagram:
    """A random fully-discrete DAG with at most two parents per node."""
    n = int(rng.integers(2, max_nodes + 1))
    sizes = [int(rng.integers(2, max_vals + 1)) for _ in range(n)]
    nodes = []
    for i in range(n):
        dom = DiscreteDomain(tuple(f"s{k}" for k in range(sizes[i])))
        n_par = int(rng.integers(0, min(i, 2) + 1))
        parents = tuple(
            sorted(rng.choice(i, size=n_par, replace=False).tolist())
        ) if n_par else ()
        rows = {}
        for combo in _combos([sizes[p] for p in parents]):
            key = tuple(f"s{k}" for k in combo)
            rows[key] = random_row(rng, sizes[i])
        nodes.append(Node(Variable(i, f"N{i}"), dom, parents, Cpt(dom.values, rows)))
    return InfluenceDiagram(nodes)


def _combos(sizes):
    out = [()]
    for sz in sizes:
        out = [c + (k,) for c in out for k in range(sz)]
    return out
