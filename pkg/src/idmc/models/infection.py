"""Post-transplant infection model: a 3-step state chain plus the observed
time to fever.

States: 1 no virus/no fever, 2 virus A incubating, 3 virus B incubating,
4 a virus replicating, 5 fever detected; '*' pads the chain once fever is
reached.  The observed time is the elapsed time from the initial state to
fever: a single exponential phase when the first jump lands on fever, and
the sum of two phases (incubation then replication) otherwise.

Note on the two-phase density: the normalizing constant used here is
lam0*lam1/(lam1-lam0), the value that makes the density integrate to one
over its support.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from idmc.core import (
    Cpt,
    ContinuousPositive,
    DiscreteDomain,
    InfluenceDiagram,
    Node,
    TwoPhase,
    TwoPhaseRow,
    Variable,
    hypoexp_density,
)
from idmc.errors import ContradictoryEvidenceError, DomainError

import math

FEVER = "5"
PAD = "*"

NORMALIZATION_NOTE = (
    "two-phase elapsed-time density uses the normalizing constant "
    "lam0*lam1/(lam1-lam0) so that it integrates to one"
)


@dataclass
class InfectionParams:
    states: list[str]
    prior: dict[str, float]
    transitions: dict[str, dict[str, float]]       # row label -> {next: prob}
    lam0: dict[tuple[str, str], float]             # first-phase rate per (x0, x1)
    a0: dict[tuple[str, str], float]               # incubation shift per (x0, x1)
    lam1: dict[str, float]                         # second-phase rate per x1


def default_infection_params() -> InfectionParams:
    """Default parameterization, loaded from the packaged fixtures file."""
    raw = json.loads(
        resources.files("idmc.models").joinpath("infection_defaults.json").read_text()
    )
    return InfectionParams(
        states=list(raw["states"]),
        prior=dict(raw["prior"]),
        transitions={k: dict(v) for k, v in raw["transitions"].items()},
        lam0={(x0, x1): v for x0, row in raw["lam0"].items() for x1, v in row.items()},
        a0={(x0, x1): v for x0, row in raw["a0"].items() for x1, v in row.items()},
        lam1=dict(raw["lam1"]),
    )


def _gated(x1: str) -> bool:
    # second phase present iff the first jump did not land on fever
    return x1 != FEVER


def tobs_density(p: InfectionParams, t: float, x0: str, x1: str) -> float:
    """Density of the observed time to fever given the first two states."""
    key = (x0, x1)
    if key not in p.lam0:
        raise DomainError(f"transition {x0}->{x1} carries no observed-time density")
    a0 = p.a0.get(key, 0.0)
    x = float(t) - a0
    if x <= 0.0:
        return 0.0
    lam0 = p.lam0[key]
    if _gated(x1):
        return hypoexp_density(x, lam0, p.lam1[x1])
    return lam0 * math.exp(-lam0 * x)


def _transition_cpt(p: InfectionParams) -> dict[tuple, list[float]]:
    rows = {}
    for x in p.states:
        row = p.transitions.get(x, {})
        rows[(x,)] = [row.get(y, 0.0) for y in p.states]
    return rows


def build_infection_model(p: InfectionParams | None = None) -> InfluenceDiagram:
    """Diagram with chain X0 -> X1 -> X2 and the observed fever time T_obs."""
    p = p or default_infection_params()
    dom = DiscreteDomain(tuple(p.states))
    prior = Cpt(p.states, {(): [p.prior.get(x, 0.0) for x in p.states]})
    trans = _transition_cpt(p)
    tobs_rows = {}
    for (x0, x1), lam0 in p.lam0.items():
        gated = _gated(x1)
        tobs_rows[(x0, x1)] = TwoPhaseRow(
            lam0=lam0,
            lam1=p.lam1[x1] if gated else None,
            a0=p.a0.get((x0, x1), 0.0),
            gated=gated,
        )
    nodes = [
        Node(Variable(0, "X0"), dom, (), prior),
        Node(Variable(1, "X1"), dom, (0,), Cpt(p.states, trans)),
        Node(Variable(2, "X2"), dom, (1,), Cpt(p.states, trans)),
        Node(Variable(3, "T_obs"), ContinuousPositive(0.0), (0, 1), TwoPhase(tobs_rows)),
    ]
    d = InfluenceDiagram(nodes)
    d.validate()
    return d


def infection_posterior_oracle(
    p: InfectionParams, t_obs: float
) -> dict[str, float]:
    """Exact posterior over the initial state given the observed fever time.

    Explicit sum over every (x0, x1, x2) path; no sampling involved.
    """
    weights = {x0: 0.0 for x0 in p.states}
    for x0 in p.states:
        px0 = p.prior.get(x0, 0.0)
        if px0 == 0.0:
            continue
        for x1 in p.states:
            px1 = p.transitions.get(x0, {}).get(x1, 0.0)
            if px1 == 0.0 or (x0, x1) not in p.lam0:
                continue
            dens = tobs_density(p, t_obs, x0, x1)
            if dens == 0.0:
                continue
            for x2 in p.states:
                px2 = p.transitions.get(x1, {}).get(x2, 0.0)
                weights[x0] += px0 * px1 * px2 * dens
    total = sum(weights.values())
    if total <= 0.0:
        raise ContradictoryEvidenceError(
            f"observed time {t_obs} has zero density under every path"
        )
    return {x0: w / total for x0, w in weights.items()}
