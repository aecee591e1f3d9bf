"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 model validation failure,
3 contradictory evidence / infeasible chain, 4 rejection budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from idmc import emc as emc_mod
from idmc import modelfile
from idmc.core import DiscreteDomain, is_discrete
from idmc.errors import (
    ContradictoryEvidenceError,
    DomainError,
    IdmcError,
    InfeasibleEmcError,
    InvalidModelError,
    ModelFileError,
    RejectionBudgetError,
    UnknownVariableError,
)
from idmc.models import infection as infection_mod
from idmc.models import toxicity as toxicity_mod
from idmc.models.oracle import enumeration_oracle
from idmc.sampler import SamplerConfig, composite_sample, query

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_CONTRADICTORY = 3
EXIT_BUDGET = 4


class _UsageError(IdmcError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="idmc", description=__doc__)
    p.add_argument("--output", choices=["text", "json"], default="text")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("model")

    r = sub.add_parser("revise", help="apply exclusions and revise the chain")
    r.add_argument("model")
    r.add_argument("--exclude", action="append", default=[],
                   help="Var:val1,val2 (repeatable)")
    r.add_argument("--chain", default=None, help="comma-separated chain variables")
    r.add_argument("--bidirectional", action="store_true")
    r.add_argument("--dot", default=None, help="write compatibility graphs to FILE")

    s = sub.add_parser("sample", help="draw histories by composite sampling")
    _sampling_flags(s)
    s.add_argument("--histories", default=None, help="dump one history per line")

    q = sub.add_parser("query", help="estimate posteriors for target variables")
    _sampling_flags(q)
    q.add_argument("--target", action="append", default=[])
    q.add_argument("--estimator", choices=["kernel", "mixture"], default="mixture")

    demo = sub.add_parser("demo", help="run a built-in model")
    dsub = demo.add_subparsers(dest="demo", required=True)

    di = dsub.add_parser("infection", help="explanation query on the infection model")
    di.add_argument("--t-obs", type=float, default=3.0)
    di.add_argument("--params", default=None)
    di.add_argument("--m", type=int, default=10000)
    di.add_argument("--h", type=int, default=5)
    di.add_argument("--estimator", choices=["kernel", "mixture"], default="mixture")
    di.add_argument("--check", action="store_true")

    dt = dsub.add_parser("toxicity", help="coefficient learning and survival prediction")
    dt.add_argument("--history", required=True)
    dt.add_argument("--plan", required=True)
    dt.add_argument("--horizon", type=int, default=None)
    dt.add_argument("--m", type=int, default=2000)
    dt.add_argument("--check", action="store_true")
    return p


def _sampling_flags(p):
    p.add_argument("model")
    p.add_argument("--evidence", default=None, help="Var=value,Var=value")
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--h", type=int, default=0)
    p.add_argument("--max-rejections", type=int, default=1_000_000)
    p.add_argument("--scan", choices=["fixed", "random"], default="fixed")
    p.add_argument("--retain", choices=["last", "all"], default="last")


def _parse_evidence(d, text):
    if not text:
        return {}
    out = {}
    for token in text.split(","):
        token = token.strip()
        if not token or "=" not in token:
            raise _UsageError(f"bad evidence token {token!r} (expected Var=value)")
        name, raw = token.split("=", 1)
        try:
            idx = d.index_of(name.strip())
        except UnknownVariableError:
            raise _UsageError(f"bad evidence token {token!r}: unknown variable")
        if is_discrete(d.node(idx).domain):
            out[idx] = raw.strip()
        else:
            try:
                out[idx] = float(raw)
            except ValueError:
                raise _UsageError(f"bad evidence token {token!r}: expected a number")
    return out


def _load_validated(path):
    d, evidence = modelfile.load(path)
    rep = d.validate()
    if not rep.ok:
        raise InvalidModelError(rep)
    return d, evidence, rep


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [float(x) for x in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _emit(args, payload, out):
    if args.output == "json":
        out.write(json.dumps(payload, sort_keys=True, indent=2, default=_jsonable))
        out.write("\n")
    else:
        _emit_text(payload, out)


def _emit_text(payload, out, indent=0):
    pad = "  " * indent
    if isinstance(payload, dict):
        for k, v in payload.items():
            if isinstance(v, (dict, list)):
                out.write(f"{pad}{k}:\n")
                _emit_text(v, out, indent + 1)
            else:
                out.write(f"{pad}{k}: {v}\n")
    elif isinstance(payload, list):
        for v in payload:
            _emit_text(v, out, indent)
    else:
        out.write(f"{pad}{payload}\n")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args, out, err):
    d, _, rep = _load_validated(args.model)
    payload = {"status": "ok", "warnings": rep.warnings}
    _emit(args, payload, out)
    return EXIT_OK


def _cmd_revise(args, out, err):
    d, _, rep = _load_validated(args.model)
    if args.chain:
        chain = [d.index_of(n.strip()) for n in args.chain.split(",")]
    else:
        chain = emc_mod.detect_chain(d)
        if not chain:
            raise _UsageError("no embedded chain detected; pass --chain")
    e = emc_mod.extract_emc(d, chain)
    exclusions = {}
    for spec in args.exclude:
        if ":" not in spec:
            raise _UsageError(f"bad exclusion {spec!r} (expected Var:val1,val2)")
        name, vals = spec.split(":", 1)
        exclusions[d.index_of(name.strip())] = [v.strip() for v in vals.split(",")]
    before = e.domain_table()
    revised = emc_mod.global_revise(e, exclusions, bidirectional=args.bidirectional)
    payload = {
        "before": before,
        "after": revised.domain_table(),
        "infeasible": revised.infeasible,
        "completely_connected": [
            emc_mod.is_completely_connected(revised, i)
            for i in range(1, revised.n_links + 1)
        ]
        if not revised.infeasible
        else [],
    }
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(emc_mod.compatibility_dot(revised))
    _emit(args, payload, out)
    if revised.infeasible:
        raise InfeasibleEmcError("revision emptied a domain")
    return EXIT_OK


def _sampler_config(args):
    return SamplerConfig(
        m=args.m,
        h=args.h,
        seed=args.seed,
        max_rejections=args.max_rejections,
        scan_order=args.scan,
        retain=args.retain,
    )


def _announce_seed(s, err):
    err.write(f"seed: {s.seed}\n")


def _cmd_sample(args, out, err):
    d, file_evidence, _ = _load_validated(args.model)
    evidence = dict(file_evidence)
    evidence.update(_parse_evidence(d, args.evidence))
    s = composite_sample(d, evidence, _sampler_config(args))
    _announce_seed(s, err)
    if args.histories:
        with open(args.histories, "w") as fh:
            for i in range(s.m):
                row = {
                    d.node(v).var.name: _jsonable(s.value(i, v))
                    for v in sorted(n.var.index for n in d.nodes)
                }
                fh.write(json.dumps(row, sort_keys=True))
                fh.write("\n")
    payload = {
        "m": s.m,
        "h": s.h,
        "seed": s.seed,
        "engine": s.engine,
        "forward_attempts": int(s.attempts.sum()),
        "rejection_rate": s.rejection_rate,
        "gibbs_changes": s.gibbs_changes,
        "warnings": s.warnings,
    }
    _emit(args, payload, out)
    return EXIT_OK


def _posterior_payload(res):
    return {
        "posteriors": {
            name: {
                lab: {"estimate": est, "se": se}
                for lab, (est, se) in table.items()
            }
            for name, table in res.posteriors.items()
        },
        "diagnostics": res.diagnostics,
        "warnings": res.warnings,
    }


def _cmd_query(args, out, err):
    d, file_evidence, _ = _load_validated(args.model)
    evidence = dict(file_evidence)
    evidence.update(_parse_evidence(d, args.evidence))
    targets = [d.index_of(t) for t in args.target] or None
    res = query(
        d,
        evidence,
        _sampler_config(args),
        targets=targets,
        estimator=args.estimator,
    )
    _announce_seed(res.sample_set, err)
    _emit(args, _posterior_payload(res), out)
    return EXIT_OK


def _cmd_demo_infection(args, out, err):
    if args.params:
        with open(args.params) as fh:
            raw = json.load(fh)
        params = infection_mod.InfectionParams(
            states=list(raw["states"]),
            prior=dict(raw["prior"]),
            transitions={k: dict(v) for k, v in raw["transitions"].items()},
            lam0={(a, b): v for a, r in raw["lam0"].items() for b, v in r.items()},
            a0={(a, b): v for a, r in raw["a0"].items() for b, v in r.items()},
            lam1=dict(raw["lam1"]),
        )
    else:
        params = infection_mod.default_infection_params()
    err.write("note: " + infection_mod.NORMALIZATION_NOTE + "\n")
    d = infection_mod.build_infection_model(params)
    evidence = {d.index_of("T_obs"): args.t_obs}
    res = query(
        d,
        evidence,
        SamplerConfig(m=args.m, h=args.h, seed=args.seed),
        targets=[d.index_of("X0")],
        estimator=args.estimator,
    )
    _announce_seed(res.sample_set, err)
    payload = _posterior_payload(res)
    payload["query"] = f"p(X0 = state | T_obs = {args.t_obs})"
    if args.check:
        oracle = infection_mod.infection_posterior_oracle(params, args.t_obs)
        table = res.posteriors["X0"]
        payload["oracle"] = {k: v for k, v in oracle.items()}
        payload["max_abs_error"] = max(
            abs(table.get(k, (0.0, 0.0))[0] - v) for k, v in oracle.items()
        )
    _emit(args, payload, out)
    return EXIT_OK


def _cmd_demo_toxicity(args, out, err):
    with open(args.history) as fh:
        hist = json.load(fh)
    with open(args.plan) as fh:
        plan_doc = json.load(fh)
    plan = plan_doc["d"] if isinstance(plan_doc, dict) else list(plan_doc)
    params = toxicity_mod.ToxicityParams()
    if args.horizon is not None:
        params.horizon = args.horizon
    result = toxicity_mod.learn_alpha_posterior(
        params,
        hist["d"],
        hist["r"],
        hist.get("x"),
        m=args.m,
        seed=args.seed if args.seed is not None else 0,
    )
    pred = toxicity_mod.predict_survival(
        params,
        result.samples,
        r_current=float(hist["r"][-1]),
        plan=plan,
        seed=args.seed if args.seed is not None else 0,
    )
    payload = {
        "alpha_posterior": {
            "mean": _jsonable(result.sample_mean),
            "cov": [_jsonable(row) for row in result.sample_cov],
        },
        "survival": [
            {"step": i + 1, "p_alive": mu, "se": se}
            for i, (mu, se) in enumerate(pred.steps)
        ],
        "clamped": pred.clamped,
    }
    if args.check:
        payload["closed_form"] = {
            "mean": _jsonable(result.closed_mean),
            "cov": [_jsonable(row) for row in result.closed_cov],
        }
        payload["mean_abs_discrepancy"] = float(
            np.abs(result.sample_mean - result.closed_mean).mean()
        )
    _emit(args, payload, out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def run(argv, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "validate":
            return _cmd_validate(args, out, err)
        if args.command == "revise":
            return _cmd_revise(args, out, err)
        if args.command == "sample":
            return _cmd_sample(args, out, err)
        if args.command == "query":
            return _cmd_query(args, out, err)
        if args.command == "demo":
            if args.demo == "infection":
                return _cmd_demo_infection(args, out, err)
            return _cmd_demo_toxicity(args, out, err)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (DomainError, UnknownVariableError) as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ModelFileError, InvalidModelError) as exc:
        err.write(f"model error: {exc}\n")
        if isinstance(exc, InvalidModelError):
            for v in exc.report.violations:
                err.write(f"  - {v}\n")
        return EXIT_INVALID
    except (ContradictoryEvidenceError, InfeasibleEmcError) as exc:
        err.write(f"contradictory evidence: {exc}\n")
        return EXIT_CONTRADICTORY
    except RejectionBudgetError as exc:
        err.write(f"sampling failed: {exc}\n")
        return EXIT_BUDGET
    except FileNotFoundError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
