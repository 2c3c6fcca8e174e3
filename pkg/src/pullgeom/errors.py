"""Exception hierarchy shared by all modules."""


class GeometryError(Exception):
    """Base class for all numerical-geometry failures."""


class DomainError(GeometryError, ValueError):
    """Input lies outside the domain of a map (e.g. a non-unit point)."""


class SingularPointError(GeometryError):
    """A constraint or map Jacobian is rank deficient at the point."""


class RetractionError(GeometryError):
    """Newton projection onto a constraint set failed to converge."""


class DegeneratePlaneError(GeometryError):
    """Two tangent vectors do not span a 2-plane."""


class AmbiguityError(GeometryError):
    """Closest point is not unique (point outside the tubular neighbourhood)."""


class PreconditionError(GeometryError):
    """A documented precondition of an experiment does not hold."""


class SingularLocusError(GeometryError):
    """Evaluation requested on the singular locus of a map."""


class EmptyFiberError(GeometryError):
    """No start of a multistart solve converged onto the requested fiber."""


class RegularLocusError(GeometryError):
    """A traced curve left the locus where a distribution has constant rank."""
