"""Exception hierarchy shared by all gridhull modules."""


class GridhullError(Exception):
    """Base class for all library errors."""


class InputError(GridhullError, ValueError):
    """Malformed or inconsistent input (dimensions, unbalanced injections, ...)."""


class StructuralError(GridhullError):
    """The network structure does not admit the requested computation."""


class DisconnectedNetworkError(StructuralError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        listing = "; ".join(
            "{" + ", ".join(str(b) for b in comp[:10]) + (", ..." if len(comp) > 10 else "") + "}"
            for comp in self.components
        )
        super().__init__(f"network has {len(self.components)} components: {listing}")


class ParseError(GridhullError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if line is not None:
            where = f"line {line}: "
        elif path is not None:
            where = f"{path}: "
        super().__init__(where + message)


class ResourceError(GridhullError):
    """A configured resource cap (e.g. elimination row count) was exceeded."""


class UnboundedError(GridhullError):
    def __init__(self, message, direction=None):
        self.direction = direction
        super().__init__(message)


class NtcDataError(GridhullError):
    """NTC bounds cannot protect a line (violation possible at any scaling)."""


class SolverError(GridhullError):
    """The LP backend returned no usable status."""
