"""Brute-force posterior oracle by full joint enumeration.

Stands in for exact propagation in tests and in the CLI's --check mode.
All free variables must be discrete; continuous variables may appear only
as evidence (their densities enter the path weights).
"""
from __future__ import annotations

import itertools

from idmc.core import InfluenceDiagram, is_discrete
from idmc.errors import ContradictoryEvidenceError, IdmcError

SIZE_CAP = 1_000_000


class EnumerationCapError(IdmcError):
    """The joint configuration count exceeds the enumeration cap."""


def enumeration_oracle(
    d: InfluenceDiagram,
    evidence: dict,
    targets: list[int] | None = None,
) -> dict[int, dict[str, float]]:
    """Exact posteriors of the free discrete variables given the evidence.

    Returns {variable index: {label: probability}}.
    """
    free = [i for i in d.topological_order() if i not in evidence]
    for i in free:
        if not is_discrete(d.node(i).domain):
            raise EnumerationCapError(
                f"free variable {d.node(i).var.name} is not discrete"
            )
    domains = [list(d.node(i).domain.values) for i in free]
    count = 1
    for dom in domains:
        count *= len(dom)
        if count > SIZE_CAP:
            raise EnumerationCapError(
                f"joint configuration count exceeds {SIZE_CAP}"
            )
    if targets is None:
        targets = list(free)
    marg = {
        t: {lab: 0.0 for lab in d.node(t).domain.values} for t in targets
    }
    total = 0.0
    for combo in itertools.product(*domains):
        cfg = dict(evidence)
        cfg.update(dict(zip(free, combo)))
        w = d.joint_density(cfg)
        if w == 0.0:
            continue
        total += w
        for t in targets:
            marg[t][cfg[t]] += w
    if total <= 0.0:
        raise ContradictoryEvidenceError("evidence has zero probability")
    return {t: {lab: w / total for lab, w in row.items()} for t, row in marg.items()}
