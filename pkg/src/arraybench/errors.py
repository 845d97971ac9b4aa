"""Exception types raised across the package."""


class ArrayBenchError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(ArrayBenchError, ValueError):
    pass


class DegenerateEncodingError(ArrayBenchError, ValueError):
    pass


class InfeasibleRT60Error(ArrayBenchError, ValueError):
    pass


class PlacementError(ArrayBenchError, ValueError):
    pass


class SamplingExhaustedError(ArrayBenchError, RuntimeError):
    pass


class DegenerateSourceError(ArrayBenchError, ValueError):
    pass


class TooShortError(ArrayBenchError, ValueError):
    pass


class DegenerateSignalError(ArrayBenchError, ValueError):
    pass


class SingularGeometryError(ArrayBenchError, ValueError):
    pass


class SolverError(ArrayBenchError, ArithmeticError):
    def __init__(self, message, freq_index=None):
        super().__init__(message)
        self.freq_index = freq_index


class AlignmentError(ArrayBenchError, ValueError):
    pass


class UndefinedMetricError(ArrayBenchError, ValueError):
    pass


class OutOfRangeError(ArrayBenchError, ValueError):
    pass


class CorpusError(ArrayBenchError, RuntimeError):
    pass
