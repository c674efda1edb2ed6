"""Exception hierarchy.

Errors are grouped by the CLI exit code they map to: configuration
problems (2), data problems (3) and numeric failures (4).
"""


class CrowdlocError(Exception):
    exit_code = 1


class ConfigError(CrowdlocError, ValueError):
    exit_code = 2


class DataError(CrowdlocError, ValueError):
    exit_code = 3


class NumericError(CrowdlocError, ArithmeticError):
    exit_code = 4


# walk logs
class MalformedLine(DataError):
    def __init__(self, line_no, line, reason=""):
        self.line_no = line_no
        self.line = line
        msg = f"malformed line {line_no}: {line!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class EmptyLog(DataError):
    pass


# floor plan
class DuplicateId(DataError):
    pass


class DanglingEdge(DataError):
    pass


class NegativeCoordinate(DataError):
    pass


class EmptyGrid(DataError):
    pass


class DisconnectedGrid(DataError):
    pass


class InvalidDims(ConfigError):
    pass


# dataset
class EmptyVocabulary(DataError):
    pass


class EmptyDataset(DataError):
    pass


# models
class InvalidParams(ConfigError):
    pass


class KTooLarge(ConfigError):
    pass


class ZeroWeightSum(ConfigError):
    pass


class NonFiniteLoss(NumericError):
    pass


class VersionMismatch(DataError):
    pass


class CorruptFile(DataError):
    pass


# evaluation
class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class TooFewPaths(DataError):
    pass


class TooFewFolds(ConfigError):
    pass


class TooFewCheckpoints(DataError):
    pass
