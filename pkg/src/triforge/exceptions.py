"""Exception types shared across the package."""


class TriforgeError(Exception):
    """Base class for all errors raised by this package."""


class ManifestError(TriforgeError):
    """Malformed, missing, or inconsistent manifest data."""


class TripletFormationError(TriforgeError):
    """Inputs that cannot be combined into valid triplets."""


class ModelError(TriforgeError):
    """Model construction or shape problems."""


class CheckpointError(TriforgeError):
    """Unreadable, corrupt, or incompatible checkpoint files."""


class TrainingError(TriforgeError):
    """Failures during a training run (bad data, non-finite losses)."""


class EvaluationError(TriforgeError):
    """Evaluation inputs that make the requested metric undefined."""


class ConfigError(TriforgeError):
    """Invalid run configuration (unknown keys, bad values, missing paths)."""
