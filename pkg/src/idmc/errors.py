"""Exception hierarchy shared across the package."""


class IdmcError(Exception):
    """Base class for all package errors."""


class DomainError(IdmcError):
    """A value lies outside the domain of its variable."""


class UnknownVariableError(IdmcError):
    """A variable id or name does not resolve within the diagram."""


class MissingAssignmentError(IdmcError):
    """A configuration lacks a value required to evaluate a conditional."""


class InvalidModelError(IdmcError):
    """A diagram failed validation; carries the report."""

    def __init__(self, report):
        self.report = report
        super().__init__("invalid model: " + "; ".join(report.violations))


class ModelFileError(IdmcError):
    """A model file does not conform to the documented schema."""


class ChainStructureError(IdmcError):
    """The requested variables do not form an embedded Markov chain."""


class InfeasibleEmcError(IdmcError):
    """An embedded chain has an empty domain after revision."""


class ContradictoryEvidenceError(IdmcError):
    """The supplied evidence has zero probability under the model."""


class RejectionBudgetError(IdmcError):
    """Forward sampling exhausted its rejection budget."""

    def __init__(self, accepted, attempts, budget):
        self.accepted = accepted
        self.attempts = attempts
        self.budget = budget
        rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"rejection budget exhausted: {accepted} accepted in {attempts} "
            f"attempts (budget {budget} per sample, acceptance rate {rate:.3g})"
        )


class BlanketInconsistencyError(IdmcError):
    """Every candidate value of a node is incompatible with its blanket."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"all-zero local conditional for node {name!r}")
