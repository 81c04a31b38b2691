"""Shared exception types."""


class BudgetExceededError(ValueError):
    """An exact oracle was asked for an instance beyond its stated budget."""
