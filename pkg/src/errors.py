"""Exception hierarchy for treeirs."""


class TreeIRSError(Exception):
    """Base exception for all library errors."""

    pass


class InvalidAddress(TreeIRSError):
    """Vertex address has a digit outside 0..d-1 or is not a digit string."""

    pass


class ArityMismatch(TreeIRSError):
    """Objects built for trees of different degree were combined."""

    pass


class LevelTooShallow(TreeIRSError):
    """A level was requested above the vertex it should extend."""

    pass


class EqualPrefixes(TreeIRSError):
    """Ray distance is undetermined: both truncations are the same word."""

    pass


class EqualElements(TreeIRSError):
    """Automorphism distance is undetermined: both elements are equal."""

    pass


class NotInAmbient(TreeIRSError):
    """An element does not belong to the declared ambient group."""

    pass


class OrderCapExceeded(TreeIRSError):
    """Subgroup closure grew beyond the configured order cap."""

    def __init__(self, partial_count: int, cap: int):
        self.partial_count = partial_count
        self.cap = cap
        super().__init__(
            f"Enumeration passed order cap {cap} ({partial_count} elements so far)"
        )


class DepthExceeded(TreeIRSError):
    """A construction needs levels below the ambient depth."""

    pass


class BudgetExceeded(TreeIRSError):
    """The truncation depth cannot host the requested construction."""

    pass


class PreconditionViolated(TreeIRSError):
    """Inputs to a check do not satisfy its hypotheses."""

    pass


class RigidTrivial(TreeIRSError):
    """The rigid stabilizer is trivial at this truncation."""

    pass


class ConfigError(TreeIRSError):
    """Experiment configuration is missing, malformed or invalid."""

    pass


class UnknownCheck(TreeIRSError):
    """A verification check name is not registered."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unknown check: {name}")
