"""Exception types raised across the package.

Domain errors derive from :class:`TagPhysError`; the CLI maps them to exit
status 1. Plain ``OSError`` is left alone and becomes exit status 2.
"""


class TagPhysError(Exception):
    """Base class for every domain error in this package."""


# tag parsing
class ParseError(TagPhysError, ValueError):
    pass


class UnrecognizedFiber(ParseError):
    def __init__(self, name):
        super().__init__(f"unrecognized fiber: {name!r}")
        self.name = name


class MalformedPercentage(ParseError):
    pass


class SumViolation(ParseError):
    def __init__(self, total):
        super().__init__(f"fiber percentages sum to {total:g}, expected 100 +/- 0.5")
        self.total = total


class TooManyFibers(ParseError):
    pass


class UnknownFamily(ParseError):
    def __init__(self, name):
        super().__init__(f"unknown fabric family: {name!r}")
        self.name = name


class UnknownStructure(ParseError):
    def __init__(self, name):
        super().__init__(f"unknown structure type: {name!r}")
        self.name = name


# dataset
class SchemaError(TagPhysError):
    pass


class ValidationError(TagPhysError):
    def __init__(self, row, violations):
        self.row = row
        self.violations = list(violations)
        super().__init__(f"row {row}: " + "; ".join(self.violations))


class MissingScalar(TagPhysError, ValueError):
    pass


class EmptyDataset(TagPhysError, ValueError):
    pass


# forest
class EmptyTraining(TagPhysError, ValueError):
    pass


class NonFiniteInput(TagPhysError, ValueError):
    pass


class DimensionMismatch(TagPhysError, ValueError):
    pass


class EmptySpace(TagPhysError, ValueError):
    pass


class ModelVocabMismatch(TagPhysError):
    pass


# physics parameters
class InvalidParams(TagPhysError, ValueError):
    pass


class InvalidBounds(TagPhysError, ValueError):
    pass


# metrics
class LengthMismatch(TagPhysError, ValueError):
    pass


class UnknownLabel(TagPhysError, ValueError):
    pass


class ZeroRange(TagPhysError, ValueError):
    pass


class EmptyCloud(TagPhysError, ValueError):
    pass


class EmptyMesh(TagPhysError, ValueError):
    pass


class ZeroProbability(TagPhysError, ValueError):
    pass


class ZeroCount(TagPhysError, ValueError):
    pass


# simulation
class InvalidSpec(TagPhysError, ValueError):
    pass


class UnstableConfig(TagPhysError):
    pass


class NumericalBlowup(TagPhysError):
    def __init__(self, step):
        super().__init__(f"non-finite particle position at step {step}")
        self.step = step
