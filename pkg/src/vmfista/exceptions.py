"""Exception hierarchy shared by the solver, the prox engine and the CLI."""


class VmfistaError(Exception):
    """Base class for all library errors."""


class ConfigError(VmfistaError):
    """Invalid configuration or parameter-constraint violation."""


class SolverError(VmfistaError):
    """Failure inside the outer solver loop."""


class BacktrackingError(SolverError):
    """Backtracking cap exceeded without an accepted step."""

    def __init__(self, message, k=None, trials=None, tau=None, bregman=None, rhs=None):
        super().__init__(message)
        self.k = k
        self.trials = trials
        self.tau = tau
        self.bregman = bregman
        self.rhs = rhs


class InnerSolverError(SolverError):
    """Inner dual solver hit its iteration cap before certifying the gap."""

    def __init__(self, message, best_gap=None, iterations=None):
        super().__init__(message)
        self.best_gap = best_gap
        self.iterations = iterations


class NonFiniteObjectiveError(SolverError):
    """The composite objective value became NaN or infinite."""
