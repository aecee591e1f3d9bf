"""Drug-toxicity survival model: autoregressive marrow dysfunction and an
alive/dead chain modulated by it.

The dysfunction level follows r_i = a0 + r_{i-1} * (a1 + a2 * d_i) + eps_i
with Gaussian disturbances and a Gaussian prior on the coefficient vector
(a0, a1, a2); d_i is the administered dose (0/1).  One-step survival from
the alive state is exp(-k * T * (1 - s(r_{i-1}))) with s interpolated
from a known non-increasing table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import PCG64, Generator

from idmc.core import (
    ContinuousReal,
    Cpt,
    DiscreteDomain,
    GaussianLinear,
    GaussianVectorPrior,
    InfluenceDiagram,
    Node,
    SurvivalTransition,
    Variable,
)
from idmc.errors import DomainError, IdmcError
from idmc.sampler import SamplerConfig, composite_sample

ALIVE = "alive"
DEAD = "dead"


@dataclass
class ToxicityParams:
    alpha_mean: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.8, 0.3]))
    alpha_cov: np.ndarray = field(
        default_factory=lambda: np.diag([0.25, 0.04, 0.04])
    )
    sigma: float = 0.3            # disturbance std-dev (dysfunction units)
    bout_rate: float = 1.0        # infection-bout rate k (1/month)
    step_len: float = 1.0         # Markov step length T (months)
    upper: float = 10.0           # dysfunction upper bound w
    s_knots_r: np.ndarray = field(default_factory=lambda: np.array([0.0, 5.0, 10.0]))
    s_knots_p: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.7, 0.1]))
    horizon: int = 10
    r0: float = 1.0
    clamp_eps: float = 1e-6


def survival_prob(r: float, p: ToxicityParams) -> float:
    """One-step survival from the alive state at dysfunction level r."""
    if not 0.0 < r < p.upper:
        raise DomainError(f"dysfunction level {r} outside (0, {p.upper})")
    s = float(np.interp(r, p.s_knots_r, p.s_knots_p))
    return math.exp(-p.bout_rate * p.step_len * (1.0 - s))


class _ArMean:
    """Mean of R_i given (alpha, R_{i-1}, D_i)."""

    def __call__(self, parents):
        a, r, d = parents
        return float(a[0] + float(r) * (a[1] + a[2] * float(d)))

    def __repr__(self):
        return "a0 + r*(a1 + a2*d)"


def toxicity_layout(horizon: int) -> dict[str, int]:
    """Variable name -> index map for a model with the given horizon."""
    names = {"alpha": 0}
    idx = 1
    for i in range(horizon + 1):
        names[f"R{i}"] = idx
        idx += 1
    for i in range(1, horizon + 1):
        names[f"D{i}"] = idx
        idx += 1
    for i in range(horizon + 1):
        names[f"X{i}"] = idx
        idx += 1
    return names


def build_toxicity_model(
    p: ToxicityParams | None = None, horizon: int | None = None
) -> InfluenceDiagram:
    """Diagram alpha -> R-chain -> alive/dead chain, doses instantiated."""
    p = p or ToxicityParams()
    n = p.horizon if horizon is None else horizon
    if n < 1:
        raise ValueError("horizon must be >= 1")
    lay = toxicity_layout(n)
    binary = DiscreteDomain(("0", "1"))
    state = DiscreteDomain((DEAD, ALIVE))
    nodes = [
        Node(
            Variable(lay["alpha"], "alpha"),
            ContinuousReal(3),
            (),
            GaussianVectorPrior(p.alpha_mean, p.alpha_cov),
        ),
        Node(
            Variable(lay["R0"], "R0"),
            ContinuousReal(),
            (),
            GaussianLinear(lambda parents: p.r0, p.sigma, descriptor=f"const {p.r0}"),
        ),
        Node(
            Variable(lay["X0"], "X0"),
            state,
            (),
            Cpt((DEAD, ALIVE), {(): [0.0, 1.0]}),
        ),
    ]
    for i in range(1, n + 1):
        nodes.append(
            Node(
                Variable(lay[f"D{i}"], f"D{i}"),
                binary,
                (),
                Cpt(("0", "1"), {(): [0.5, 0.5]}),
            )
        )
        nodes.append(
            Node(
                Variable(lay[f"R{i}"], f"R{i}"),
                ContinuousReal(),
                (lay["alpha"], lay[f"R{i - 1}"], lay[f"D{i}"]),
                GaussianLinear(_ArMean(), p.sigma, descriptor="ar1"),
            )
        )
        nodes.append(
            Node(
                Variable(lay[f"X{i}"], f"X{i}"),
                state,
                (lay[f"X{i - 1}"], lay[f"R{i - 1}"]),
                SurvivalTransition(
                    p.bout_rate,
                    p.step_len,
                    p.s_knots_r,
                    p.s_knots_p,
                    p.upper,
                    alive=ALIVE,
                    dead=DEAD,
                ),
            )
        )
    d = InfluenceDiagram(nodes)
    d.validate()
    return d


# ---------------------------------------------------------------------------
# coefficient learning


def _design(d_obs, r_obs) -> tuple[np.ndarray, np.ndarray]:
    k = len(d_obs)
    Z = np.empty((k, 3))
    y = np.empty(k)
    for i in range(1, k + 1):
        Z[i - 1] = (1.0, r_obs[i - 1], r_obs[i - 1] * float(d_obs[i - 1]))
        y[i - 1] = r_obs[i]
    return Z, y


def conjugate_alpha_posterior(p: ToxicityParams, d_obs, r_obs):
    """Closed-form Gaussian posterior of the coefficient vector.

    Uses the Woodbury form (data-space solve), deliberately a different
    route than the precision-space update used inside the sampler.
    """
    Z, y = _design(d_obs, r_obs)
    V0 = np.asarray(p.alpha_cov, dtype=float)
    m0 = np.asarray(p.alpha_mean, dtype=float)
    S = p.sigma**2 * np.eye(len(y)) + Z @ V0 @ Z.T
    K = V0 @ Z.T @ np.linalg.inv(S)
    mean = m0 + K @ (y - Z @ m0)
    cov = V0 - K @ Z @ V0
    return mean, cov


def _alpha_full_conditional(p: ToxicityParams, d_obs, r_obs):
    """Sampler-side conditional of alpha given the observed dysfunction
    sequence, in precision form."""
    Z, y = _design(d_obs, r_obs)
    prior_prec = np.linalg.inv(np.asarray(p.alpha_cov, dtype=float))
    prec = prior_prec + Z.T @ Z / p.sigma**2
    cov = np.linalg.inv(prec)
    mean = cov @ (prior_prec @ np.asarray(p.alpha_mean, dtype=float) + Z.T @ y / p.sigma**2)
    chol = np.linalg.cholesky(cov)

    def draw(cfg, rng):
        return mean + chol @ rng.standard_normal(3)

    return draw


@dataclass
class AlphaLearnResult:
    closed_mean: np.ndarray
    closed_cov: np.ndarray
    sample_mean: np.ndarray
    sample_cov: np.ndarray
    samples: np.ndarray
    sample_set: object


def learn_alpha_posterior(
    p: ToxicityParams,
    d_obs,
    r_obs,
    x_obs=None,
    m: int = 2000,
    h: int = 1,
    seed: int = 0,
) -> AlphaLearnResult:
    """Posterior of the coefficient vector from an observed alive history.

    d_obs has length k, r_obs length k+1, and the patient is alive through
    step k.  Returns the conjugate closed form and the generic-sampler
    estimate side by side.
    """
    k = len(d_obs)
    if k < 1:
        raise ValueError("need at least one observed step (k >= 1)")
    if len(r_obs) != k + 1:
        raise ValueError("r_obs must have length len(d_obs) + 1")
    for r in r_obs:
        if not 0.0 < float(r) < p.upper:
            raise DomainError(f"observed dysfunction {r} outside (0, {p.upper})")
    if x_obs is None:
        x_obs = [ALIVE] * (k + 1)
    if any(x != ALIVE for x in x_obs):
        raise IdmcError("coefficient learning requires an alive-through-k history")

    closed_mean, closed_cov = conjugate_alpha_posterior(p, d_obs, r_obs)

    d = build_toxicity_model(p, horizon=k)
    lay = toxicity_layout(k)
    evidence = {}
    for i in range(k + 1):
        evidence[lay[f"R{i}"]] = float(r_obs[i])
        evidence[lay[f"X{i}"]] = x_obs[i]
    for i in range(1, k + 1):
        evidence[lay[f"D{i}"]] = str(int(d_obs[i - 1]))
    cond = {lay["alpha"]: _alpha_full_conditional(p, d_obs, r_obs)}
    s = composite_sample(
        d,
        evidence,
        SamplerConfig(m=m, h=max(h, 1), seed=seed),
        conditionals=cond,
    )
    samples = np.stack([np.asarray(v, dtype=float) for v in s.columns[lay["alpha"]]])
    return AlphaLearnResult(
        closed_mean=closed_mean,
        closed_cov=closed_cov,
        sample_mean=samples.mean(axis=0),
        sample_cov=np.cov(samples, rowvar=False),
        samples=samples,
        sample_set=s,
    )


# ---------------------------------------------------------------------------
# prospective prediction


@dataclass
class SurvivalPrediction:
    steps: list            # (mean P(alive), standard error) per future step
    clamped: int           # dysfunction values clipped back into (0, w)

    def means(self):
        return [mu for mu, _ in self.steps]


def predict_survival(
    p: ToxicityParams,
    posterior,
    r_current: float,
    plan,
    seed: int = 0,
    rollouts: int = 2000,
    alive: bool = True,
) -> SurvivalPrediction:
    """Monte Carlo survival curve under a future dose plan.

    posterior is either (mean, cov) of the coefficient vector or an array
    of posterior draws with shape (n, 3).  Survival probabilities are
    multiplied along each rollout (the alive/dead chain is never sampled),
    so each curve is non-increasing by construction.
    """
    steps = len(plan)
    if steps == 0:
        return SurvivalPrediction(steps=[], clamped=0)
    rng = Generator(PCG64(seed))
    if isinstance(posterior, tuple):
        mean, cov = posterior
        chol = np.linalg.cholesky(np.asarray(cov, dtype=float) + 0.0)
        alphas = np.asarray(mean, dtype=float) + rng.standard_normal((rollouts, 3)) @ chol.T
    else:
        draws = np.asarray(posterior, dtype=float)
        alphas = draws[rng.integers(len(draws), size=rollouts)]
    if not alive:
        return SurvivalPrediction(steps=[(0.0, 0.0)] * steps, clamped=0)

    lo = p.clamp_eps
    hi = p.upper - p.clamp_eps
    r = np.clip(np.full(rollouts, float(r_current)), lo, hi)
    surv = np.ones(rollouts)
    out = []
    clamped = 0
    for dose in plan:
        dval = float(dose)
        s_r = np.interp(r, p.s_knots_r, p.s_knots_p)
        surv = surv * np.exp(-p.bout_rate * p.step_len * (1.0 - s_r))
        out.append(
            (float(surv.mean()), float(surv.std(ddof=1) / math.sqrt(rollouts)))
        )
        eps = rng.standard_normal(rollouts) * p.sigma
        r_new = alphas[:, 0] + r * (alphas[:, 1] + alphas[:, 2] * dval) + eps
        clamped += int(np.count_nonzero((r_new <= lo) | (r_new >= hi)))
        r = np.clip(r_new, lo, hi)
    return SurvivalPrediction(steps=out, clamped=clamped)
