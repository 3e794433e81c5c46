"""Exception hierarchy shared across the package.

Every failure mode the pipeline can hit maps to one of these classes so the
command line layer can translate them into stable exit codes:
config problems -> 2, data validation -> 3, numerical/positivity -> 4.
"""


class SepadhError(Exception):
    """Base class for all package errors."""


class ConfigError(SepadhError):
    """Bad configuration: unknown keys, out-of-range values, invalid
    estimator requests (e.g. simplified weights on an incompatible layout)."""


class DomainError(ConfigError):
    """Arguments outside the supported domain (k out of range, scale <= 0,
    structural probabilities outside [0, 1], enumeration horizon too large)."""


class DataError(SepadhError):
    """Problems with input data files (panels, graphs): parse failures and
    invariant violations."""


class PanelParseError(DataError):
    """CSV could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PanelValidationError(DataError):
    """One or more panel invariants failed.

    ``violations`` is a list of (rule, id, detail) tuples; ``report()``
    renders them in the line-oriented RULE<TAB>id<TAB>detail format.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        first = self.violations[0] if self.violations else ("?", "?", "?")
        super().__init__(
            f"{len(self.violations)} validation failure(s); first: "
            f"{first[0]} for id {first[1]} ({first[2]})"
        )

    def report(self):
        return "\n".join(f"{rule}\t{ident}\t{detail}"
                         for rule, ident, detail in self.violations)


class GraphError(DataError):
    """Graph text could not be parsed or the DAG is malformed."""


class GraphConstructionError(GraphError):
    """Component split produced an invalid graph (cycle, unrouted edge)."""


class NumericalError(SepadhError):
    """Estimation-layer numerical failures."""


class PositivityError(NumericalError):
    """A required conditional probability is unavailable or zero: empty
    saturated cell, zero predicted density inside a weight factor, or a
    state reachable only under the counterfactual component assignment."""

    def __init__(self, message, state=None):
        self.state = state
        if state:
            message = f"{message} [state: {state}]"
        super().__init__(message)


class WeightError(NumericalError):
    """A weight factor could not be evaluated (zero denominator or zero
    predicted density), naming the record and factor."""


class FitError(NumericalError):
    """Model fitting failed (non-convergence, separation, singular design,
    degenerate all-one-class target). Carries solver diagnostics."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class BootstrapError(NumericalError):
    """Too many bootstrap replicates failed to produce estimates."""
