"""Exception hierarchy shared by all curvlab modules."""


class CurvlabError(Exception):
    """Base class for every error raised by curvlab."""


class DomainError(CurvlabError, ValueError):
    """An argument lies outside the domain of an operation."""


class InadmissibleError(CurvlabError, ValueError):
    """A model triangle does not exist (perimeter too large or sides inconsistent)."""


class DegeneracyError(CurvlabError, ValueError):
    """A metric matrix failed to be positive-definite.

    Attributes:
        point: chart coordinates of the offending node or sample.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class BoundaryError(CurvlabError, ValueError):
    """A stencil or path reaches outside the chart domain."""


class ConfigError(CurvlabError, ValueError):
    """Invalid experiment configuration (maps to CLI exit status 2)."""
