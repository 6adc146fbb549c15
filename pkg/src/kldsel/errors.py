"""Exception types; the CLI maps them onto exit codes."""


class KldselError(Exception):
    pass


class ParameterError(KldselError, ValueError):
    """Invalid argument: bad bandwidth, too-small sample, mismatched partitions."""


class DomainError(KldselError, ValueError):
    """Input outside the mathematical domain: non-finite values, invalid support."""


class NumericError(KldselError, ArithmeticError):
    """A numerical procedure failed (non-convergence, all-degenerate replicates)."""
