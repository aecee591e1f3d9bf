"""Influence diagrams over mixed discrete/continuous variables.

A diagram is a DAG of nodes; each node carries a domain and a conditional
distribution given its parents.  Discrete values are represented by their
string labels throughout the public API; continuous values are floats
(or small float vectors for the multivariate Gaussian prior family).
"""
from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from idmc.errors import (
    DomainError,
    InvalidModelError,
    MissingAssignmentError,
    UnknownVariableError,
)

PAD = "*"

# ---------------------------------------------------------------------------
# variables and domains


@dataclass(frozen=True)
class Variable:
    """A diagram variable: dense non-negative index plus a display name."""

    index: int
    name: str


@dataclass(frozen=True)
class DiscreteDomain:
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {v: i for i, v in enumerate(self.values)})

    def index_of(self, label) -> int:
        try:
            return self._lookup[label]
        except (KeyError, TypeError):
            raise DomainError(f"value {label!r} not in domain {list(self.values)}")

    def __contains__(self, label) -> bool:
        return label in self._lookup

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ContinuousPositive:
    """Scalar continuous domain on (lower, inf); used for sojourn times."""

    lower: float = 0.0


@dataclass(frozen=True)
class ContinuousReal:
    """Unbounded continuous domain; dim > 1 for vector-valued nodes."""

    dim: int = 1


def is_discrete(domain) -> bool:
    return isinstance(domain, DiscreteDomain)


# ---------------------------------------------------------------------------
# conditional distribution families
#
# Every family implements:
#   mass(value, parents)  -> probability mass (discrete) or density (continuous)
#   sample(parents, rng)  -> a value drawn from the conditional
#   payload()             -> canonical bytes for structural hashing


class Cpt:
    """Tabular conditional: one probability row per parent-label tuple."""

    def __init__(self, values: Iterable[str], rows: Mapping[tuple, Iterable[float]]):
        self.values = tuple(values)
        self.rows = {tuple(k): np.asarray(v, dtype=float) for k, v in rows.items()}
        self._index = {v: i for i, v in enumerate(self.values)}

    def row(self, parents: tuple) -> np.ndarray:
        try:
            return self.rows[tuple(parents)]
        except KeyError:
            raise MissingAssignmentError(f"no CPT row for parent values {parents!r}")

    def mass(self, value, parents) -> float:
        if value not in self._index:
            raise DomainError(f"value {value!r} not among CPT values {self.values}")
        return float(self.row(parents)[self._index[value]])

    def sample(self, parents, rng):
        row = self.row(parents)
        u = rng.random()
        acc = 0.0
        for i, p in enumerate(row):
            acc += p
            if u < acc:
                return self.values[i]
        return self.values[len(row) - 1]

    def payload(self) -> bytes:
        out = [repr(self.values).encode()]
        for key in sorted(self.rows, key=repr):
            out.append(repr(key).encode())
            out.append(self.rows[key].tobytes())
        return b"".join(out)


class ShiftedExponential:
    """Density lam * exp(-lam * (t - a0)) for t > a0, per parent tuple.

    Parent tuples missing from the table are structurally forbidden and
    evaluate to density 0.
    """

    def __init__(self, rate: Mapping[tuple, float], shift: Mapping[tuple, float]):
        self.rate = {tuple(k): float(v) for k, v in rate.items()}
        self.shift = {tuple(k): float(v) for k, v in shift.items()}

    def mass(self, value, parents) -> float:
        key = tuple(parents)
        if key not in self.rate:
            return 0.0
        lam = self.rate[key]
        a0 = self.shift.get(key, 0.0)
        t = float(value)
        if t <= a0:
            return 0.0
        return lam * math.exp(-lam * (t - a0))

    def sample(self, parents, rng):
        key = tuple(parents)
        if key not in self.rate:
            raise DomainError(f"no rate parameter for parent values {parents!r}")
        a0 = self.shift.get(key, 0.0)
        return a0 - math.log1p(-rng.random()) / self.rate[key]

    def payload(self) -> bytes:
        items = sorted((repr(k), self.rate[k], self.shift.get(k, 0.0)) for k in self.rate)
        return repr(items).encode()


@dataclass(frozen=True)
class TwoPhaseRow:
    lam0: float
    lam1: float | None
    a0: float
    gated: bool  # True: convolution of two exponential phases; False: single phase


def hypoexp_density(x: float, lam0: float, lam1: float) -> float:
    """Density at x > 0 of the sum of two independent exponentials."""
    if x <= 0.0:
        return 0.0
    if abs(lam0 - lam1) <= 1e-12 * max(lam0, lam1):
        lam = 0.5 * (lam0 + lam1)
        return lam * lam * x * math.exp(-lam * x)
    c = lam0 * lam1 / (lam1 - lam0)
    return c * (math.exp(-lam0 * x) - math.exp(-lam1 * x))


class TwoPhase:
    """Elapsed-time family with an optional second exponential phase.

    Per parent tuple: when the row is gated the value is the sum of two
    exponential phases shifted by a0 (hypoexponential density); otherwise
    it is a plain shifted exponential.  Missing tuples evaluate to 0.
    """

    def __init__(self, rows: Mapping[tuple, TwoPhaseRow]):
        self.rows = {tuple(k): v for k, v in rows.items()}

    def mass(self, value, parents) -> float:
        row = self.rows.get(tuple(parents))
        if row is None:
            return 0.0
        x = float(value) - row.a0
        if x <= 0.0:
            return 0.0
        if row.gated:
            return hypoexp_density(x, row.lam0, row.lam1)
        return row.lam0 * math.exp(-row.lam0 * x)

    def sample(self, parents, rng):
        row = self.rows.get(tuple(parents))
        if row is None:
            raise DomainError(f"no elapsed-time parameters for parent values {parents!r}")
        t = row.a0 - math.log1p(-rng.random()) / row.lam0
        if row.gated:
            t -= math.log1p(-rng.random()) / row.lam1
        return t

    def payload(self) -> bytes:
        items = sorted((repr(k), repr(v)) for k, v in self.rows.items())
        return repr(items).encode()


class LinearMean:
    """Serializable affine design: intercept + sum(coeff_i * parent_i)."""

    def __init__(self, intercept: float, coeffs: Iterable[float]):
        self.intercept = float(intercept)
        self.coeffs = tuple(float(c) for c in coeffs)

    def __call__(self, parents) -> float:
        return self.intercept + sum(c * float(p) for c, p in zip(self.coeffs, parents))

    def __repr__(self):
        return f"LinearMean({self.intercept}, {self.coeffs})"


class GaussianLinear:
    """Scalar Gaussian whose mean is a function of the parent values."""

    def __init__(self, mean_fn: Callable, sigma: float, descriptor: str = ""):
        self.mean_fn = mean_fn
        self.sigma = float(sigma)
        self.descriptor = descriptor or repr(mean_fn)

    def mass(self, value, parents) -> float:
        mu = self.mean_fn(parents)
        z = (float(value) - mu) / self.sigma
        return math.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def sample(self, parents, rng):
        return self.mean_fn(parents) + self.sigma * rng.standard_normal()

    def payload(self) -> bytes:
        return f"GaussianLinear({self.descriptor}, {self.sigma})".encode()


class GaussianVectorPrior:
    """Multivariate Gaussian prior for a vector-valued orphan node."""

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        self.chol = np.linalg.cholesky(self.cov)
        k = len(self.mean)
        self._lognorm = -0.5 * (
            k * math.log(2.0 * math.pi) + 2.0 * np.sum(np.log(np.diag(self.chol)))
        )

    def mass(self, value, parents) -> float:
        dev = np.asarray(value, dtype=float) - self.mean
        z = np.linalg.solve(self.chol, dev)
        return math.exp(self._lognorm - 0.5 * float(z @ z))

    def sample(self, parents, rng):
        return self.mean + self.chol @ rng.standard_normal(len(self.mean))

    def payload(self) -> bytes:
        return b"GaussianVectorPrior" + self.mean.tobytes() + self.cov.tobytes()


class SurvivalTransition:
    """Binary alive/dead transition modulated by a continuous parent.

    Parents are (previous state, dysfunction level r).  Death is absorbing;
    from the alive state the survival probability over one step of length
    step_len is exp(-bout_rate * step_len * (1 - s(r))) with s interpolated
    from a monotone table.
    """

    def __init__(self, bout_rate, step_len, s_knots_r, s_knots_p, upper,
                 alive="alive", dead="dead"):
        self.bout_rate = float(bout_rate)
        self.step_len = float(step_len)
        self.s_knots_r = np.asarray(s_knots_r, dtype=float)
        self.s_knots_p = np.asarray(s_knots_p, dtype=float)
        self.upper = float(upper)
        self.alive = alive
        self.dead = dead

    def s_of(self, r: float) -> float:
        return float(np.interp(r, self.s_knots_r, self.s_knots_p))

    def p_alive(self, prev, r) -> float:
        if prev != self.alive:
            return 0.0
        r = min(max(float(r), 0.0), self.upper)
        return math.exp(-self.bout_rate * self.step_len * (1.0 - self.s_of(r)))

    def mass(self, value, parents) -> float:
        prev, r = parents
        p = self.p_alive(prev, r)
        if value == self.alive:
            return p
        if value == self.dead:
            return 1.0 - p
        raise DomainError(f"value {value!r} not in {{{self.alive!r}, {self.dead!r}}}")

    def sample(self, parents, rng):
        return self.alive if rng.random() < self.p_alive(*parents) else self.dead

    def payload(self) -> bytes:
        return (
            f"SurvivalTransition({self.bout_rate},{self.step_len},{self.upper})".encode()
            + self.s_knots_r.tobytes()
            + self.s_knots_p.tobytes()
        )


# ---------------------------------------------------------------------------
# nodes and diagrams


@dataclass(frozen=True)
class Node:
    var: Variable
    domain: object
    parents: tuple[int, ...]
    dist: object


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


PROB_TOL = 1e-9


class InfluenceDiagram:
    """An immutable DAG of nodes; validate() must pass before sampling."""

    def __init__(self, nodes: Iterable[Node]):
        nodes = sorted(nodes, key=lambda n: n.var.index)
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self._by_name = {n.var.name: n.var.index for n in nodes}
        self._children: dict[int, list[int]] = {n.var.index: [] for n in nodes}
        for n in nodes:
            for p in n.parents:
                if p in self._children:
                    self._children[p].append(n.var.index)
        self._validated = False

    # -- lookup ------------------------------------------------------------

    def node(self, index: int) -> Node:
        for n in self.nodes:
            if n.var.index == index:
                return n
        raise UnknownVariableError(f"no variable with index {index}")

    def index_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownVariableError(f"no variable named {name!r}")

    def children(self, index: int) -> tuple[int, ...]:
        self.node(index)
        return tuple(sorted(self._children.get(index, ())))

    @property
    def validated(self) -> bool:
        return self._validated

    # -- validation --------------------------------------------------------

    def validate(self) -> ValidationReport:
        rep = ValidationReport()
        indices = [n.var.index for n in self.nodes]
        if indices != list(range(len(self.nodes))):
            rep.violations.append(f"variable indices not dense 0..n-1: {indices}")
        known = set(indices)
        for n in self.nodes:
            for p in n.parents:
                if p not in known:
                    rep.violations.append(
                        f"node {n.var.name}: dangling parent index {p}"
                    )
        if self._has_cycle():
            rep.violations.append("directed graph contains a cycle")
        for n in self.nodes:
            self._check_node(n, rep)
        self._validated = rep.ok
        return rep

    def _has_cycle(self) -> bool:
        known = {n.var.index for n in self.nodes}
        indeg = {i: 0 for i in known}
        for n in self.nodes:
            for p in n.parents:
                if p in known:
                    indeg[n.var.index] += 1
        queue = [i for i, d in indeg.items() if d == 0]
        seen = 0
        while queue:
            i = queue.pop()
            seen += 1
            for c in self._children.get(i, ()):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen != len(known)

    def _check_node(self, n: Node, rep: ValidationReport) -> None:
        name = n.var.name
        if is_discrete(n.domain):
            vals = n.domain.values
            if not vals:
                rep.violations.append(f"node {name}: empty discrete domain")
            if len(set(vals)) != len(vals):
                rep.violations.append(f"node {name}: duplicate domain values")
            if PAD in vals and vals[-1] != PAD:
                rep.violations.append(f"node {name}: pad value {PAD!r} must be last")
        dist = n.dist
        if isinstance(dist, Cpt):
            self._check_cpt(n, rep)
        elif isinstance(dist, ShiftedExponential):
            for key, lam in dist.rate.items():
                if lam <= 0:
                    rep.violations.append(f"node {name}: non-positive rate for {key}")
                if dist.shift.get(key, 0.0) < 0:
                    rep.violations.append(f"node {name}: negative shift for {key}")
        elif isinstance(dist, TwoPhase):
            for key, row in dist.rows.items():
                if row.lam0 <= 0 or (row.gated and (row.lam1 is None or row.lam1 <= 0)):
                    rep.violations.append(f"node {name}: non-positive rate for {key}")
                if row.a0 < 0:
                    rep.violations.append(f"node {name}: negative shift for {key}")
        elif isinstance(dist, GaussianLinear):
            if dist.sigma <= 0:
                rep.violations.append(f"node {name}: non-positive sigma")
        elif isinstance(dist, GaussianVectorPrior):
            try:
                np.linalg.cholesky(dist.cov)
            except np.linalg.LinAlgError:
                rep.violations.append(f"node {name}: covariance not positive definite")
        elif isinstance(dist, SurvivalTransition):
            if dist.bout_rate <= 0 or dist.step_len <= 0 or dist.upper <= 0:
                rep.violations.append(f"node {name}: non-positive survival parameter")
            if np.any(np.diff(dist.s_knots_p) > 0):
                rep.violations.append(f"node {name}: survival table not non-increasing")

    def _check_cpt(self, n: Node, rep: ValidationReport) -> None:
        name = n.var.name
        dist: Cpt = n.dist
        if not is_discrete(n.domain):
            rep.violations.append(f"node {name}: CPT on a non-discrete node")
            return
        if dist.values != n.domain.values:
            rep.violations.append(f"node {name}: CPT values disagree with domain")
        known = {m.var.index for m in self.nodes}
        pdoms = []
        for p in n.parents:
            if p not in known:
                return
            pd = self.node(p).domain
            if not is_discrete(pd):
                rep.violations.append(f"node {name}: CPT parent {p} is not discrete")
                return
            pdoms.append(pd.values)
        expected = set(_product(pdoms))
        got = set(dist.rows)
        if expected != got:
            rep.violations.append(
                f"node {name}: CPT rows do not cover the parent product exactly "
                f"(missing {sorted(expected - got)!r}, extra {sorted(got - expected)!r})"
            )
        nval = len(n.domain.values)
        for key, row in dist.rows.items():
            if len(row) != nval:
                rep.violations.append(f"node {name}: row {key!r} has wrong length")
                continue
            if np.any(row < -PROB_TOL) or np.any(row > 1 + PROB_TOL):
                rep.violations.append(f"node {name}: row {key!r} has entries outside [0,1]")
            s = float(row.sum())
            if abs(s - 1.0) > PROB_TOL:
                rep.violations.append(
                    f"node {name}: row {key!r} sums to {s!r}, expected 1"
                )
            hit = dist.values[int(np.argmax(row))]
            absorbing = len(key) == 1 and key[0] == hit
            if (
                self._children.get(n.var.index)
                and np.max(row) >= 1.0 - PROB_TOL
                and not absorbing
            ):
                rep.warnings.append(
                    f"node {name}: row {key!r} is a point mass on {hit!r}; "
                    "functional dependencies can trap single-site resampling"
                )

    # -- queries -----------------------------------------------------------

    def _parent_values(self, n: Node, cfg: Mapping) -> tuple:
        vals = []
        for p in n.parents:
            if p not in cfg:
                raise MissingAssignmentError(
                    f"node {n.var.name}: parent {self.node(p).var.name} unassigned"
                )
            vals.append(cfg[p])
        return tuple(vals)

    def conditional_density(self, index: int, cfg: Mapping) -> float:
        n = self.node(index)
        if index not in cfg:
            raise MissingAssignmentError(f"node {n.var.name} unassigned")
        return float(n.dist.mass(cfg[index], self._parent_values(n, cfg)))

    def markov_blanket(self, index: int):
        n = self.node(index)
        parents = tuple(sorted(set(n.parents)))
        children = self.children(index)
        co = set()
        for c in children:
            co.update(self.node(c).parents)
        co.discard(index)
        return parents, children, tuple(sorted(co))

    def topological_order(self) -> list[int]:
        known = {n.var.index for n in self.nodes}
        indeg = {i: 0 for i in known}
        for n in self.nodes:
            for p in n.parents:
                indeg[n.var.index] += 1
        heap = [i for i, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            i = heapq.heappop(heap)
            order.append(i)
            for c in self._children.get(i, ()):
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, c)
        if len(order) != len(known):
            raise InvalidModelError(ValidationReport(["directed graph contains a cycle"]))
        return order

    def joint_density(self, cfg: Mapping) -> float:
        out = 1.0
        for n in self.nodes:
            out *= self.conditional_density(n.var.index, cfg)
            if out == 0.0:
                return 0.0
        return out

    def structural_hash(self) -> str:
        h = hashlib.sha256()
        for n in self.nodes:
            h.update(repr((n.var.index, n.var.name, n.parents)).encode())
            h.update(repr(n.domain).encode())
            h.update(n.dist.payload())
        return h.hexdigest()


def _product(domains):
    if not domains:
        return [()]
    out = [()]
    for dom in domains:
        out = [key + (v,) for key in out for v in dom]
    return out


# ---------------------------------------------------------------------------
# evidence helpers


def check_evidence(d: InfluenceDiagram, evidence: Mapping) -> None:
    """Raise if an evidence value lies outside its variable's domain."""
    for idx, val in evidence.items():
        n = d.node(idx)
        if is_discrete(n.domain):
            if val not in n.domain:
                raise DomainError(
                    f"evidence {n.var.name}={val!r} outside domain {list(n.domain.values)}"
                )
        elif isinstance(n.domain, ContinuousPositive):
            if float(val) < n.domain.lower:
                raise DomainError(
                    f"evidence {n.var.name}={val!r} below lower bound {n.domain.lower}"
                )


def evidence_from_names(d: InfluenceDiagram, named: Mapping[str, object]) -> dict:
    """Translate a name-keyed assignment into an index-keyed evidence dict."""
    ev = {d.index_of(name): val for name, val in named.items()}
    check_evidence(d, ev)
    return ev
