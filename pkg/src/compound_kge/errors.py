"""Exception types shared across the package."""


class SingularOperatorError(ValueError):
    """A compound operator block is numerically singular.

    For many-to-one style relations this is an expected condition, not a
    bug, so callers may want to catch it specifically.
    """


class DatasetError(ValueError):
    """Dataset on disk is missing, empty, or structurally invalid."""


class DatasetParseError(DatasetError):
    """A triple file line could not be parsed."""

    def __init__(self, path, line_number, message):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class CheckpointError(RuntimeError):
    """Checkpoint file is corrupt, truncated, or of an unknown version."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, step, triples, message="non-finite loss"):
        self.step = step
        self.triples = triples
        super().__init__(
            f"{message} at step {step}; offending triples (h,r,t): {triples}"
        )
