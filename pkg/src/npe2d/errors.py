"""Exception hierarchy shared by the solver, diagnostics and I/O layers."""


class NPEError(Exception):
    """Base class for all package errors."""


class NonZeroMean(NPEError, ValueError):
    """Input to an inverse Laplacian had a nonzero mean (un-neutralized charge or vorticity)."""


class NonFinite(NPEError, FloatingPointError):
    """A NaN/Inf appeared in a field; usually blow-up or a time step that is too large."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (t = {time!r})"
        super().__init__(message)
        self.time = time


class NoContraction(NPEError, RuntimeError):
    """Picard iteration failed to contract; the local time T0 is too large."""


class SnapshotError(NPEError, ValueError):
    pass


class BadMagic(SnapshotError):
    pass


class VersionMismatch(SnapshotError):
    pass


class ChecksumMismatch(SnapshotError):
    pass


class ParseError(NPEError, ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class ValidationError(NPEError, ValueError):
    pass
