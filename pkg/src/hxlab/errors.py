"""Exception types shared across the package."""


class HxlabError(Exception):
    """Base class for all errors raised by hxlab."""


class DomainError(HxlabError, ValueError):
    """An argument lies outside the range where an operation is defined."""


class LatticeMismatch(HxlabError, ValueError):
    """Two objects live on incompatible lattices, or a cube cuts a base cell."""

    def __init__(self, msg="lattice mismatch"):
        super().__init__(msg)


class NoParent(HxlabError, ValueError):
    def __init__(self, msg="no parent"):
        super().__init__(msg)


class LevelTooSmall(DomainError):
    """The stopping level is at most the top average, so the level set is everything."""

    def __init__(self, msg="level too small"):
        super().__init__(msg)


class ParseError(HxlabError, ValueError):
    """Malformed input file. ``field`` names the offending entry."""

    def __init__(self, msg, field=None):
        super().__init__(msg if field is None else f"{field}: {msg}")
        self.field = field


class OverflowDomain(DomainError):
    def __init__(self, msg="weight power leaves the representable range"):
        super().__init__(msg)
