"""Exception hierarchy shared across the engine."""


class RebalancingError(Exception):
    """Base class for all engine errors."""


class ConfigurationError(RebalancingError, ValueError):
    """Invalid parameters, grids or config files."""


class DimensionError(RebalancingError, ValueError):
    """Vector arguments whose lengths do not agree."""


class DomainError(RebalancingError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ParseError(RebalancingError, ValueError):
    """Malformed input data. Carries the source name and line number."""

    def __init__(self, message, source=None, line=None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NumericalError(RebalancingError, ArithmeticError):
    """Iterative fee resolution failed to converge."""

    def __init__(self, message, step=None, run=None):
        self.step = step
        self.run = run
        super().__init__(_locate(message, step, run))


class BankruptcyError(RebalancingError, ArithmeticError):
    """Wealth left after paying fees is not positive."""

    def __init__(self, message, step=None, run=None):
        self.step = step
        self.run = run
        super().__init__(_locate(message, step, run))


def _locate(message, step, run):
    parts = []
    if run is not None:
        parts.append(f"run {run}")
    if step is not None:
        parts.append(f"step {step}")
    if parts:
        return f"{message} ({', '.join(parts)})"
    return message
