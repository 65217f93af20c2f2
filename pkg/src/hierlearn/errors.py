"""Exception hierarchy shared across the package.

Every error carries a short stable ``code`` used by the CLI for
machine-parsable single-line diagnostics.
"""


class HierlearnError(Exception):
    code = "E_INTERNAL"


class FormatError(HierlearnError):
    """A file does not match its documented layout."""

    code = "E_FORMAT"


class ParseError(FormatError):
    """A field inside an otherwise well-formed file could not be parsed."""

    code = "E_PARSE"


class CorruptionError(FormatError):
    """A file is structurally recognizable but internally inconsistent."""

    code = "E_CORRUPT"


class TaxonomyError(HierlearnError):
    """A label does not fit the group/species taxonomy."""

    code = "E_TAXONOMY"


class ValidationError(HierlearnError):
    """An input violates a documented precondition."""

    code = "E_VALIDATION"


class DuplicateClassError(ValidationError):
    """A class was offered to the model twice."""

    code = "E_DUPLICATE_CLASS"


class DegenerateProblemError(ValidationError):
    """A training set cannot support the requested classifier."""

    code = "E_DEGENERATE"


class GenerationError(HierlearnError):
    """Synthetic data generation could not satisfy its separation targets."""

    code = "E_GENERATION"
