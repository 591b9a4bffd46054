"""Exception hierarchy shared by the compute modules and the CLI."""


class EnclosureError(Exception):
    pass


class SceneError(EnclosureError, ValueError):
    """A scene violates one of the modelling assumptions."""


class DegenerateError(EnclosureError, ValueError):
    """A stationary pair fails the non-degenerate condition."""


class ConvergenceError(EnclosureError, RuntimeError):
    """A numerical procedure did not reach its tolerance."""
