class InfeasibleError(ValueError):
    """A requested (rate, distortion) target lies outside the achievable region."""

    def __init__(self, message: str, *, d_target: float | None = None,
                 d_limit: float | None = None, r_target: float | None = None):
        super().__init__(message)
        self.d_target = d_target
        self.d_limit = d_limit
        self.r_target = r_target


class BracketError(RuntimeError):
    """Bracket doubling hit its cap before enclosing the target."""
