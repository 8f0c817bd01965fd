from dataclasses import dataclass


@dataclass(frozen=True)
class BackendConfig:
    """Generator settings; exactly one of `model` / `mock` is active."""

    model: str | None = None
    device: str = "cpu"
    steps: int = 30
    guidance: float = 7.5
    mock: bool = False

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if bool(self.model) == self.mock:
            raise ValueError("exactly one of --model and --mock must be given")
