"""Exception types shared across the package."""


class TeleloopError(Exception):
    """Base class for all package errors."""


class ParseError(TeleloopError):
    """Chain/config document is not valid JSON or misses required fields."""


class ValidationError(TeleloopError):
    """A document parsed but violates an invariant. Carries the field name."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DimensionMismatch(TeleloopError):
    pass


class UnreachableError(TeleloopError):
    """IK did not meet tolerance within the iteration budget.

    Carries the best-effort joint vector so callers can hold or inspect it.
    """

    def __init__(self, q_best, pos_residual, ori_residual, iters):
        super().__init__(
            f"IK unreachable: pos residual {pos_residual:.3e} m, "
            f"ori residual {ori_residual:.3e} rad after {iters} iterations"
        )
        self.q_best = q_best
        self.pos_residual = pos_residual
        self.ori_residual = ori_residual
        self.iters = iters


class NonFiniteState(TeleloopError):
    """NaN/inf appeared in an arm state; the episode must abort."""


class SwitchRejected(TeleloopError):
    """Mode switch refused because the arms are not aligned within tolerance."""

    def __init__(self, sync_error, tol):
        super().__init__(
            f"switch rejected: sync error {sync_error:.4f} m exceeds tolerance {tol:.4f} m"
        )
        self.sync_error = sync_error
        self.tol = tol


class ClipAlreadyOpen(TeleloopError):
    pass


class WrongMode(TeleloopError):
    pass


class WrongChannel(TeleloopError):
    pass


class NonMonotonicTimestamp(TeleloopError):
    pass


class EmptyClip(TeleloopError):
    pass


class EmptyDataset(TeleloopError):
    pass


class SchemaVersionMismatch(TeleloopError):
    pass


class CorruptRecord(TeleloopError):
    """A dataset file is truncated or undecodable. Names the byte offset."""

    def __init__(self, path, byte_offset, reason):
        super().__init__(f"{path}: corrupt record at byte {byte_offset}: {reason}")
        self.path = str(path)
        self.byte_offset = byte_offset


class PlacementFailure(TeleloopError):
    """Non-overlap rejection sampling exceeded its attempt budget."""


class IdleOnlyViolation(TeleloopError):
    """Scale changes are only accepted while the session is idle."""


class MalformedMessage(TeleloopError):
    pass
