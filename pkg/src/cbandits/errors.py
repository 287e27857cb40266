"""Exception types that map onto the CLI's exit codes."""


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


class SlaterViolationError(ValueError):
    """Instance admits no strictly feasible strategy (exit code 3)."""


class InfeasibleError(ValueError):
    """Constraint set of the offline problem is empty (exit code 3)."""


class ConvergenceError(RuntimeError):
    """Inner solver failed to certify its solution (exit code 4)."""

    def __init__(self, message, round_index=None):
        if round_index is not None:
            message = f"{message} (round {round_index})"
        super().__init__(message)
        self.round_index = round_index
