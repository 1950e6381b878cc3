"""Exception hierarchy shared by all divprune modules.

Every error raised by the library derives from :class:`DivPruneError` so
callers (and the CLI's exit-code mapping) can rely on a closed set of
failure classes.
"""

from __future__ import annotations


class DivPruneError(Exception):
    """Base class for all divprune errors."""


# --- input / data errors -------------------------------------------------

class MalformedHeader(DivPruneError):
    """Binary embedding file has a bad magic, version, or size mismatch."""


class NonFiniteValue(DivPruneError):
    """An embedding element is NaN or infinite."""

    def __init__(self, row: int, col: int, value: float):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"non-finite value {value!r} at row {row}, col {col}")


class DimensionError(DivPruneError):
    """Shapes disagree: ragged CSV rows, mismatched vector lengths, etc."""


class EmptyInput(DivPruneError):
    """An operation that needs at least one element received none."""


class IoError(DivPruneError):
    """Reading or writing a file failed."""


class ZeroNormVector(DivPruneError):
    """Cosine distance requested for a vector with (near-)zero norm."""

    def __init__(self, index: int | None = None):
        self.index = index
        where = f" at row {index}" if index is not None else ""
        super().__init__(f"zero-norm vector{where} under cosine metric "
                         "(use zero_policy='clamp' to tolerate)")


class NonPositiveFactor(DivPruneError):
    """A row scale factor is zero or negative."""


# --- selection errors ----------------------------------------------------

class IndexOutOfRange(DivPruneError):
    """A subset index falls outside [0, n)."""


class DuplicateIndex(DivPruneError):
    """A subset contains a repeated index."""


class BudgetTooLarge(DivPruneError):
    """Requested retention count exceeds the number of tokens."""


# --- computational-limit errors -------------------------------------------

class CombinatorialLimitExceeded(DivPruneError):
    """Exhaustive search would enumerate more subsets than allowed."""

    def __init__(self, n_subsets: int, limit: int):
        self.n_subsets = n_subsets
        self.limit = limit
        super().__init__(f"{n_subsets} subsets exceed the enumeration limit {limit}")


class MatrixTooLarge(DivPruneError):
    """Dense distance matrix would exceed the configured row cap."""


# --- FLOP model errors -----------------------------------------------------

class NonPositiveDimension(DivPruneError):
    """A transformer shape parameter that must be positive is not."""


class ModelOutOfRange(DivPruneError):
    """Per-layer FLOP polynomial is non-positive: the cost model does not
    apply to this sequence length."""


# --- report errors ---------------------------------------------------------

class NonFiniteObjective(DivPruneError):
    """A histogram input objective is NaN or infinite."""
