class ValidationError(ValueError):
    """Malformed input; ``diagnostics`` carries the individual findings."""

    def __init__(self, message: str, diagnostics: list | None = None) -> None:
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
