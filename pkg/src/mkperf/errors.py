"""Exception types shared across the package."""


class MkperfError(Exception):
    """Base class for every error raised by this package."""


class DataError(MkperfError):
    """Invalid or inconsistent input data."""


class ParseError(DataError):
    """Text input that does not conform to the expected format."""


class KernelError(MkperfError):
    """A kernel computation produced an invalid matrix."""


class SolverError(MkperfError):
    """Training failed to make progress or violated an internal contract."""


class QPError(SolverError):
    """The dual quadratic program could not be solved to tolerance."""


class OracleExhausted(MkperfError):
    """Every admissible labeling is excluded.

    The training loop treats this as convergence: there is no new
    constraint left to generate.
    """


class ModelFormatError(DataError):
    """A persisted model document has a wrong version, a missing or
    malformed field, or non-finite numbers."""
