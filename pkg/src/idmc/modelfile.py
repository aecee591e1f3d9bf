"""Strict JSON model-file schema: load and dump influence diagrams.

The format is documented in docs/model-format.md.  Unknown keys are hard
errors at every level; probability rows are plain arrays of decimals and
discrete values are serialized by label.
"""
from __future__ import annotations

import json
from typing import Any

from idmc.core import (
    ContinuousPositive,
    ContinuousReal,
    Cpt,
    DiscreteDomain,
    GaussianLinear,
    InfluenceDiagram,
    LinearMean,
    Node,
    ShiftedExponential,
    TwoPhase,
    TwoPhaseRow,
    Variable,
)
from idmc.errors import ModelFileError


def _require_keys(obj: dict, required: set[str], optional: set[str], where: str):
    if not isinstance(obj, dict):
        raise ModelFileError(f"{where}: expected an object")
    unknown = set(obj) - required - optional
    if unknown:
        raise ModelFileError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ModelFileError(f"{where}: missing keys {sorted(missing)}")


def _parse_domain(obj: dict, where: str):
    _require_keys(obj, {"kind"}, {"values", "lower", "dim"}, where)
    kind = obj["kind"]
    if kind == "discrete":
        _require_keys(obj, {"kind", "values"}, set(), where)
        return DiscreteDomain(tuple(str(v) for v in obj["values"]))
    if kind == "continuous_positive":
        _require_keys(obj, {"kind"}, {"lower"}, where)
        return ContinuousPositive(float(obj.get("lower", 0.0)))
    if kind == "continuous_real":
        _require_keys(obj, {"kind"}, {"dim"}, where)
        return ContinuousReal(int(obj.get("dim", 1)))
    raise ModelFileError(f"{where}: unknown domain kind {kind!r}")


def _given(row: dict, where: str) -> tuple:
    given = row.get("given", [])
    if not isinstance(given, list):
        raise ModelFileError(f"{where}: 'given' must be an array")
    return tuple(str(g) for g in given)


def _parse_dist(obj: dict, domain, where: str):
    _require_keys(
        obj, {"kind"}, {"rows", "intercept", "coeffs", "sigma"}, where
    )
    kind = obj["kind"]
    if kind == "cpt":
        _require_keys(obj, {"kind", "rows"}, set(), where)
        if not isinstance(domain, DiscreteDomain):
            raise ModelFileError(f"{where}: cpt requires a discrete domain")
        rows = {}
        for k, row in enumerate(obj["rows"]):
            _require_keys(row, {"probs"}, {"given"}, f"{where}.rows[{k}]")
            rows[_given(row, where)] = [float(x) for x in row["probs"]]
        return Cpt(domain.values, rows)
    if kind == "shifted_exponential":
        _require_keys(obj, {"kind", "rows"}, set(), where)
        rate, shift = {}, {}
        for k, row in enumerate(obj["rows"]):
            _require_keys(row, {"rate"}, {"given", "shift"}, f"{where}.rows[{k}]")
            key = _given(row, where)
            rate[key] = float(row["rate"])
            shift[key] = float(row.get("shift", 0.0))
        return ShiftedExponential(rate, shift)
    if kind == "two_phase":
        _require_keys(obj, {"kind", "rows"}, set(), where)
        rows = {}
        for k, row in enumerate(obj["rows"]):
            _require_keys(
                row, {"lam0", "gated"}, {"given", "lam1", "a0"}, f"{where}.rows[{k}]"
            )
            gated = bool(row["gated"])
            lam1 = row.get("lam1")
            if gated and lam1 is None:
                raise ModelFileError(f"{where}.rows[{k}]: gated row needs lam1")
            rows[_given(row, where)] = TwoPhaseRow(
                lam0=float(row["lam0"]),
                lam1=float(lam1) if lam1 is not None else None,
                a0=float(row.get("a0", 0.0)),
                gated=gated,
            )
        return TwoPhase(rows)
    if kind == "gaussian_linear":
        _require_keys(obj, {"kind", "intercept", "coeffs", "sigma"}, set(), where)
        coeffs = [float(c) for c in obj["coeffs"]]
        mean = LinearMean(float(obj["intercept"]), coeffs)
        return GaussianLinear(mean, float(obj["sigma"]), descriptor=repr(mean))
    raise ModelFileError(f"{where}: unknown dist kind {kind!r}")


def load_dict(doc: dict) -> tuple[InfluenceDiagram, dict]:
    """Parse a model document; returns (diagram, evidence by index)."""
    _require_keys(doc, {"variables", "nodes"}, {"evidence"}, "model")
    variables = {}
    domains = {}
    for k, v in enumerate(doc["variables"]):
        _require_keys(v, {"id", "name", "domain"}, set(), f"variables[{k}]")
        idx = int(v["id"])
        if idx in variables:
            raise ModelFileError(f"variables[{k}]: duplicate id {idx}")
        name = str(v["name"])
        variables[idx] = Variable(idx, name)
        domains[idx] = _parse_domain(v["domain"], f"variables[{k}].domain")
    by_name = {v.name: v.index for v in variables.values()}
    if len(by_name) != len(variables):
        raise ModelFileError("variable names are not unique")

    nodes = []
    seen = set()
    for k, nd in enumerate(doc["nodes"]):
        _require_keys(nd, {"var", "parents", "dist"}, set(), f"nodes[{k}]")
        name = str(nd["var"])
        if name not in by_name:
            raise ModelFileError(f"nodes[{k}]: unknown variable {name!r}")
        idx = by_name[name]
        if idx in seen:
            raise ModelFileError(f"nodes[{k}]: duplicate node for {name!r}")
        seen.add(idx)
        parents = []
        for pname in nd["parents"]:
            if str(pname) not in by_name:
                raise ModelFileError(f"nodes[{k}]: unknown parent {pname!r}")
            parents.append(by_name[str(pname)])
        dist = _parse_dist(nd["dist"], domains[idx], f"nodes[{k}].dist")
        nodes.append(Node(variables[idx], domains[idx], tuple(parents), dist))
    if seen != set(variables):
        missing = [variables[i].name for i in set(variables) - seen]
        raise ModelFileError(f"variables without a node: {sorted(missing)}")

    d = InfluenceDiagram(nodes)
    evidence = {}
    for name, val in (doc.get("evidence") or {}).items():
        if name not in by_name:
            raise ModelFileError(f"evidence: unknown variable {name!r}")
        idx = by_name[name]
        if isinstance(domains[idx], DiscreteDomain):
            evidence[idx] = str(val)
        else:
            evidence[idx] = float(val)
    return d, evidence


def load(path: str) -> tuple[InfluenceDiagram, dict]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"{path}: invalid JSON ({exc})")
    return load_dict(doc)


# ---------------------------------------------------------------------------
# serialization


def _dump_domain(domain) -> dict:
    if isinstance(domain, DiscreteDomain):
        return {"kind": "discrete", "values": list(domain.values)}
    if isinstance(domain, ContinuousPositive):
        return {"kind": "continuous_positive", "lower": domain.lower}
    if isinstance(domain, ContinuousReal):
        return {"kind": "continuous_real", "dim": domain.dim}
    raise ModelFileError(f"cannot serialize domain {domain!r}")


def _dump_dist(dist) -> dict:
    if isinstance(dist, Cpt):
        rows = [
            {"given": list(key), "probs": [float(x) for x in row]}
            for key, row in sorted(dist.rows.items(), key=lambda kv: repr(kv[0]))
        ]
        return {"kind": "cpt", "rows": rows}
    if isinstance(dist, ShiftedExponential):
        rows = [
            {"given": list(key), "rate": dist.rate[key], "shift": dist.shift.get(key, 0.0)}
            for key in sorted(dist.rate, key=repr)
        ]
        return {"kind": "shifted_exponential", "rows": rows}
    if isinstance(dist, TwoPhase):
        rows = []
        for key in sorted(dist.rows, key=repr):
            r = dist.rows[key]
            rows.append(
                {
                    "given": list(key),
                    "lam0": r.lam0,
                    "lam1": r.lam1,
                    "a0": r.a0,
                    "gated": r.gated,
                }
            )
        return {"kind": "two_phase", "rows": rows}
    if isinstance(dist, GaussianLinear) and isinstance(dist.mean_fn, LinearMean):
        return {
            "kind": "gaussian_linear",
            "intercept": dist.mean_fn.intercept,
            "coeffs": list(dist.mean_fn.coeffs),
            "sigma": dist.sigma,
        }
    raise ModelFileError(f"cannot serialize distribution {type(dist).__name__}")


def dump_dict(d: InfluenceDiagram, evidence: dict | None = None) -> dict:
    doc: dict[str, Any] = {
        "variables": [
            {
                "id": n.var.index,
                "name": n.var.name,
                "domain": _dump_domain(n.domain),
            }
            for n in d.nodes
        ],
        "nodes": [
            {
                "var": n.var.name,
                "parents": [d.node(p).var.name for p in n.parents],
                "dist": _dump_dist(n.dist),
            }
            for n in d.nodes
        ],
    }
    if evidence:
        doc["evidence"] = {d.node(i).var.name: v for i, v in evidence.items()}
    return doc


def dump(d: InfluenceDiagram, path: str, evidence: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(dump_dict(d, evidence), fh, indent=2, sort_keys=True)
        fh.write("\n")
