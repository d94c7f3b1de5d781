"""Exception hierarchy shared across the package."""


class AsrError(Exception):
    """Base class; ``kind`` is used for the CLI's machine-readable error line."""

    kind = "error"


class DimensionError(AsrError, ValueError):
    kind = "dimension"


class DegenerateInputError(AsrError, ValueError):
    kind = "degenerate-input"


class TrainingError(AsrError, RuntimeError):
    kind = "training"


class CheckpointError(AsrError, ValueError):
    kind = "checkpoint"


class LexiconError(AsrError, ValueError):
    kind = "lexicon"


class PartitionError(AsrError, ValueError):
    kind = "partition"


class SynthesisError(AsrError, ValueError):
    kind = "synthesis"


class FeatureError(AsrError, ValueError):
    kind = "feature"


class ParameterError(AsrError, ValueError):
    kind = "parameter"


class ConfigError(AsrError, ValueError):
    kind = "config"


class ParseError(AsrError, ValueError):
    kind = "parse"


class ScoringError(AsrError, ValueError):
    kind = "scoring"


class DependencyError(AsrError, FileNotFoundError):
    kind = "missing-dependency"
