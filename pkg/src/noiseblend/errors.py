"""Exception hierarchy shared by the library and the CLI exit-code contract."""


class NoiseBlendError(Exception):
    """Base class; `category` and `exit_code` drive the CLI error contract."""

    category = "io"
    exit_code = 5


class InputError(NoiseBlendError):
    """Bad user-supplied data: missing files, unsupported formats, invalid params."""

    category = "input"
    exit_code = 2


class BackendError(NoiseBlendError):
    """Generator backend failed: launch, protocol, timeout, or bad response."""

    category = "backend"
    exit_code = 3


class SolverError(NoiseBlendError):
    """Amplification solver could not produce a valid solution."""

    category = "solver"
    exit_code = 4


class ArtifactIOError(NoiseBlendError):
    """Failure writing run artifacts (WAV/PNG/JSON/CSV)."""

    category = "io"
    exit_code = 5
