"""Exception types shared across the toolkit.

Plain ``ValueError`` is used for violated argument preconditions; the classes
here cover malformed or degenerate *data*, broken caller contracts, and
pipeline stage failures, so the CLI can map them to distinct exit codes.
"""


class DataError(Exception):
    """Input data is malformed, inconsistent, or unusable."""


class ParseError(DataError):
    """A text input could not be parsed; carries the offending location."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IncompleteGridError(DataError):
    """A benchmark file is missing one or more (problem, config) cells."""


class DegenerateInputError(DataError):
    """Data is too degenerate for the requested operation (e.g. all points identical)."""


class EmptySelectionError(DataError):
    """A selection stage produced no usable clusters or configs."""


class ContractError(RuntimeError):
    """A caller-supplied object violated its declared contract."""


class TemplateError(ValueError):
    """A code-emission template is missing a required placeholder."""


class PipelineStageError(Exception):
    """A pipeline stage failed; names the stage for diagnostics."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
