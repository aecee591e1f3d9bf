"""Monte Carlo inference on influence diagrams over semi-Markov processes.

Main entry points:

- :mod:`idmc.core` — diagram data model and conditional families
- :mod:`idmc.emc` — embedded-chain extraction and domain revision
- :mod:`idmc.sampler` — forward / single-site / composite sampling and the
  kernel and finite-mixture posterior estimators
- :mod:`idmc.models` — the infection and toxicity demonstration models
- :mod:`idmc.modelfile` — JSON model files
- :mod:`idmc.cli` — the ``idmc`` command line front end

The hot sampling loop runs in a compiled extension when available; set
``IDMC_PURE_PYTHON=1`` to force the pure-Python twin.  Both produce
bit-identical output for the same seed.
"""

from idmc.engine import kernel_name

__version__ = "0.1.0"

__all__ = ["kernel_name", "__version__"]
