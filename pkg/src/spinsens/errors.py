"""Exception types shared across the package."""


class InvariantViolation(RuntimeError):
    """A numerically checked identity failed beyond its tolerance.

    Raised when a quantity that is guaranteed by construction (orthogonality,
    realness of a reconstructed operator, frame consistency) comes out wrong,
    which signals a convention or implementation error upstream rather than
    bad user input.
    """
