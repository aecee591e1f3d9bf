"""Embedded Markov chain extraction and domain revision.

The chain is treated as a sequence of binary compatibility constraints:
value h of X_{i-1} is compatible with value k of X_i iff the stored
transition probability is strictly positive.  Revision deletes values that
have lost all compatible successors, shrinking domains monotonically.
"""
from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from idmc.core import Cpt, InfluenceDiagram, is_discrete
from idmc.errors import ChainStructureError, DomainError


@dataclass
class Emc:
    """Mutable chain state: variable list, shrinking domains, link matrices."""

    var_indices: list[int]
    names: list[str]
    full_domains: list[tuple[str, ...]]
    domains: list[list[str]]
    links: list[np.ndarray]  # links[i-1][h, k] = p(X_i = k-th | X_{i-1} = h-th)
    infeasible: bool = False

    @property
    def n_links(self) -> int:
        return len(self.links)

    def position(self, var_index: int) -> int:
        return self.var_indices.index(var_index)

    def copy(self) -> "Emc":
        return Emc(
            list(self.var_indices),
            list(self.names),
            list(self.full_domains),
            [list(dom) for dom in self.domains],
            [m.copy() for m in self.links],
            self.infeasible,
        )

    def domain_table(self) -> dict[str, list[str]]:
        return {name: list(dom) for name, dom in zip(self.names, self.domains)}


def extract_emc(d: InfluenceDiagram, chain_vars: list[int]) -> Emc:
    """Pull the chain variables and their transition CPTs out of a diagram."""
    if not chain_vars:
        raise ChainStructureError("empty chain")
    nodes = [d.node(i) for i in chain_vars]
    for n in nodes:
        if not is_discrete(n.domain):
            raise ChainStructureError(f"chain variable {n.var.name} is not discrete")
        if not isinstance(n.dist, Cpt):
            raise ChainStructureError(f"chain variable {n.var.name} has no CPT")
    links = []
    for prev, node in zip(nodes, nodes[1:]):
        if node.parents != (prev.var.index,):
            raise ChainStructureError(
                f"{node.var.name} must have exactly {prev.var.name} as parent "
                f"(found parent indices {list(node.parents)})"
            )
        mat = np.zeros((len(prev.domain.values), len(node.domain.values)))
        for h, hval in enumerate(prev.domain.values):
            mat[h, :] = node.dist.row((hval,))
        links.append(mat)
    return Emc(
        var_indices=list(chain_vars),
        names=[n.var.name for n in nodes],
        full_domains=[n.domain.values for n in nodes],
        domains=[list(n.domain.values) for n in nodes],
        links=links,
    )


def detect_chain(d: InfluenceDiagram) -> list[int] | None:
    """Best-effort detection of the embedded chain inside a diagram.

    Follows discrete nodes whose CPT has exactly one discrete parent.
    Returns None when no unambiguous chain of length >= 2 exists.
    """
    succ: dict[int, list[int]] = {}
    for n in d.nodes:
        if not (is_discrete(n.domain) and isinstance(n.dist, Cpt)):
            continue
        if len(n.parents) == 1:
            p = n.parents[0]
            if is_discrete(d.node(p).domain):
                succ.setdefault(p, []).append(n.var.index)
    heads = [
        n.var.index
        for n in d.nodes
        if is_discrete(n.domain)
        and isinstance(n.dist, Cpt)
        and not n.parents
        and n.var.index in succ
    ]
    best: list[int] | None = None
    for head in heads:
        chain = [head]
        cur = head
        while cur in succ:
            nxt = succ[cur]
            if len(nxt) != 1:
                break
            cur = nxt[0]
            chain.append(cur)
        if len(chain) >= 2 and (best is None or len(chain) > len(best)):
            best = chain
    return best


# ---------------------------------------------------------------------------
# compatibility and revision


def _check_value(e: Emc, pos: int, label: str) -> int:
    if label not in e.domains[pos]:
        raise DomainError(
            f"value {label!r} not in current domain of {e.names[pos]}: {e.domains[pos]}"
        )
    return e.full_domains[pos].index(label)


def compatible(e: Emc, link: int, h_label: str, k_label: str) -> bool:
    """True iff the transition probability from h to k on the link is > 0."""
    if not 1 <= link <= e.n_links:
        raise DomainError(f"link {link} out of range 1..{e.n_links}")
    h = _check_value(e, link - 1, h_label)
    k = _check_value(e, link, k_label)
    return bool(e.links[link - 1][h, k] > 0.0)


def _mark_infeasible(e: Emc) -> None:
    e.infeasible = e.infeasible or any(not dom for dom in e.domains)


def revise_l(e: Emc, link: int) -> list[str]:
    """Delete predecessor values with no compatible successor on one link.

    Only the domain of X_{link-1} is touched.  Returns the deleted values.
    """
    if not 1 <= link <= e.n_links:
        raise DomainError(f"link {link} out of range 1..{e.n_links}")
    mat = e.links[link - 1]
    succ = [e.full_domains[link].index(v) for v in e.domains[link]]
    deleted = []
    for hval in list(e.domains[link - 1]):
        h = e.full_domains[link - 1].index(hval)
        if not any(mat[h, k] > 0.0 for k in succ):
            e.domains[link - 1].remove(hval)
            deleted.append(hval)
    _mark_infeasible(e)
    return deleted


def revise_g(e: Emc, order: list[int] | None = None) -> dict[str, list[str]]:
    """Sweep revise_l over every link until a fixed point is reached.

    order optionally permutes the link-visit sequence within each sweep;
    the fixed point does not depend on it.
    """
    links = order if order is not None else list(range(1, e.n_links + 1))
    deletions: dict[str, list[str]] = {name: [] for name in e.names}
    cap = 1 + sum(len(dom) for dom in e.full_domains)
    for _ in range(cap):
        changed = False
        for link in links:
            gone = revise_l(e, link)
            if gone:
                deletions[e.names[link - 1]].extend(gone)
                changed = True
        if not changed:
            return deletions
    raise AssertionError("revise_g failed to reach a fixed point within its bound")


def _ac3_bidirectional(e: Emc) -> dict[str, list[str]]:
    """Arc-consistency over both directions of every link (AC-3)."""
    deletions: dict[str, list[str]] = {name: [] for name in e.names}
    queue = deque()
    for link in range(1, e.n_links + 1):
        queue.append((link - 1, link))
        queue.append((link, link - 1))
    while queue:
        tgt, other = queue.popleft()
        link = max(tgt, other)
        mat = e.links[link - 1]
        other_idx = [e.full_domains[other].index(v) for v in e.domains[other]]
        removed = False
        for val in list(e.domains[tgt]):
            i = e.full_domains[tgt].index(val)
            if tgt < other:
                ok = any(mat[i, k] > 0.0 for k in other_idx)
            else:
                ok = any(mat[h, i] > 0.0 for h in other_idx)
            if not ok:
                e.domains[tgt].remove(val)
                deletions[e.names[tgt]].append(val)
                removed = True
        if removed:
            for nb in (tgt - 1, tgt + 1):
                if 0 <= nb < len(e.domains) and nb != other:
                    queue.append((nb, tgt))
    _mark_infeasible(e)
    return deletions


def global_revise(
    e: Emc,
    exclusions: dict[int, list[str]] | None = None,
    bidirectional: bool = False,
) -> Emc:
    """Apply a-priori exclusions, then revise; returns a new revised chain.

    exclusions is keyed by diagram variable index.  The default mode runs
    the predecessor-pruning sweep only; bidirectional=True additionally
    prunes forward (full arc consistency over both edge directions).
    """
    out = e.copy()
    for var_index, values in (exclusions or {}).items():
        pos = out.position(var_index)
        for val in values:
            if val not in out.full_domains[pos]:
                raise DomainError(
                    f"excluded value {val!r} not in the full domain of {out.names[pos]}"
                )
            if val in out.domains[pos]:
                out.domains[pos].remove(val)
    _mark_infeasible(out)
    if bidirectional:
        _ac3_bidirectional(out)
    else:
        revise_g(out)
    return out


# ---------------------------------------------------------------------------
# connectivity checks


def is_completely_connected(e: Emc, link: int) -> bool:
    """True iff every surviving value pair on the link is compatible."""
    if not 1 <= link <= e.n_links:
        raise DomainError(f"link {link} out of range 1..{e.n_links}")
    mat = e.links[link - 1]
    for hval in e.domains[link - 1]:
        h = e.full_domains[link - 1].index(hval)
        for kval in e.domains[link]:
            k = e.full_domains[link].index(kval)
            if not mat[h, k] > 0.0:
                return False
    return True


def gibbs_reachability_ok(e: Emc) -> bool:
    """Single-site resampling reaches every configuration iff all links are
    complete bipartite over the current domains (vacuously true without links)."""
    return all(is_completely_connected(e, i) for i in range(1, e.n_links + 1))


def compatibility_dot(e: Emc) -> str:
    """Render the per-link compatibility graphs as a dot document."""
    lines = ["graph compatibility {", "  rankdir=LR;"]
    for pos, (name, dom) in enumerate(zip(e.names, e.domains)):
        lines.append(f"  subgraph cluster_{pos} {{")
        lines.append(f'    label="{name}";')
        for val in dom:
            lines.append(f'    "{name}={val}";')
        lines.append("  }")
    for link in range(1, e.n_links + 1):
        mat = e.links[link - 1]
        for hval in e.domains[link - 1]:
            h = e.full_domains[link - 1].index(hval)
            for kval in e.domains[link]:
                k = e.full_domains[link].index(kval)
                if mat[h, k] > 0.0:
                    lines.append(
                        f'  "{e.names[link - 1]}={hval}" -- "{e.names[link]}={kval}";'
                    )
    lines.append("}")
    return "\n".join(lines) + "\n"
