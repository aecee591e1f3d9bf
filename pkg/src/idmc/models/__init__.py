"""Built-in demonstration models and their exact oracles."""

from idmc.models.infection import (
    InfectionParams,
    build_infection_model,
    default_infection_params,
    infection_posterior_oracle,
    tobs_density,
)
from idmc.models.oracle import enumeration_oracle
from idmc.models.toxicity import (
    ToxicityParams,
    build_toxicity_model,
    learn_alpha_posterior,
    predict_survival,
    survival_prob,
)

__all__ = [
    "InfectionParams",
    "build_infection_model",
    "default_infection_params",
    "infection_posterior_oracle",
    "tobs_density",
    "enumeration_oracle",
    "ToxicityParams",
    "build_toxicity_model",
    "learn_alpha_posterior",
    "predict_survival",
    "survival_prob",
]
