"""Semantic exceptions shared by all modules."""


class DomainError(ValueError):
    """A precondition on parameters or arguments is violated."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class ConvexityWarning(UserWarning):
    """A function assumed convex/monotone failed a sampled check."""
