"""Exception types shared across the package."""


class PredictivityError(Exception):
    """Base class for all package errors."""


class DomainError(PredictivityError, ValueError):
    """An argument lies outside the domain of a numeric function."""


class DegenerateModelError(PredictivityError, ValueError):
    """One outcome class has probability zero, or the outcome is constant."""


class ContractError(PredictivityError, ValueError):
    """Input violates a structural precondition (e.g. unbalanced classes)."""


class DataError(PredictivityError, ValueError):
    """Malformed dataset, model-spec or configuration file."""
