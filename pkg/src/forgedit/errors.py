"""Exception types shared across the package."""


class ForgeditError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(ForgeditError, ValueError):
    """Invalid argument: shape mismatch, out-of-range index, bad config value."""


class SingularScheduleError(ForgeditError):
    """A reverse-diffusion step hit alpha_t = 0 with clamping disabled."""


class DegenerateSourceError(ForgeditError):
    """Vector projection onto a (near-)zero source token."""

    def __init__(self, batch: int, token: int, norm: float):
        self.batch = batch
        self.token = token
        self.norm = norm
        super().__init__(
            f"source embedding token (b={batch}, n={token}) has norm {norm:.3e}; "
            "projection ratio is undefined"
        )


class PathSetMismatchError(ForgeditError):
    """Two parameter trees do not cover the same set of paths."""

    def __init__(self, only_left: set, only_right: set):
        self.only_left = frozenset(only_left)
        self.only_right = frozenset(only_right)
        super().__init__(
            f"parameter path sets differ: {len(only_left)} only in left "
            f"{sorted(only_left)[:4]}..., {len(only_right)} only in right "
            f"{sorted(only_right)[:4]}..."
        )


class TrainingDivergedError(ForgeditError):
    """Non-finite loss during optimization."""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at step {step}")


class NotFoundError(ForgeditError, KeyError):
    """A referenced session/run/sweep/job/image does not exist."""


class ConflictError(ForgeditError):
    """The requested operation conflicts with current state."""
