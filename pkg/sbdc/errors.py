"""
Exception hierarchy for the sbdc toolkit.
"""


class SbdcError(Exception):
    """Root of every error raised by the toolkit."""


# Graph construction
class GraphError(SbdcError):
    pass


class DisconnectedGraph(GraphError):
    pass


class NonPositiveWeight(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class UnknownEdge(GraphError):
    pass


class EdgeOutOfRange(GraphError):
    pass


class SingularTreeGram(GraphError):
    """Tree Gram matrix not invertible: the partition is not a spanning tree."""


# Objective coding
class CodingError(SbdcError):
    pass


class NonPositiveGain(CodingError):
    pass


class WeightOutOfImage(CodingError):
    pass


class DomainViolation(CodingError):
    """A (perturbed) codeword fragment left the decoder's admissible domain.

    Agents receiving such a fragment can raise an alert instead of decoding it.
    """
    def __init__(self, message, edge=None, value=None):
        super().__init__(message)
        self.edge = edge
        self.value = value


class EmptyAttackSet(CodingError):
    pass


class NonPositiveLipschitz(CodingError):
    pass


class UnknownFamily(CodingError):
    pass


# Attacks
class AttackError(SbdcError):
    pass


class UnknownVariant(AttackError):
    pass


class EmptySupport(AttackError):
    pass


class BudgetExceeded(AttackError):
    pass


# Analysis and simulation
class AnalysisError(SbdcError):
    pass


class EpsilonTooLarge(AnalysisError):
    pass


class SimulationError(SbdcError):
    pass


class NonFiniteState(SimulationError):
    pass


# Scenario files
class ScenarioError(SbdcError):
    pass


class ParseError(ScenarioError):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(ScenarioError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
