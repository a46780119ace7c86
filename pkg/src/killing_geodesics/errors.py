"""Exception types shared across the package."""


class KillingGeodesicsError(Exception):
    """Base class for all package-specific errors."""


class OffManifoldError(KillingGeodesicsError):
    """A point violates the manifold constraint beyond tolerance."""


class SingularMetricError(KillingGeodesicsError):
    """The metric is numerically degenerate at an evaluation point."""


class NotTimelikeError(KillingGeodesicsError):
    """A field required to be timelike fails g(K,K) < 0 at a point."""


class VanishingFieldError(KillingGeodesicsError):
    """A field required to be nonvanishing has (near-)zero norm at a point."""


class StiffnessError(KillingGeodesicsError):
    """Adaptive step control collapsed below the minimum step size."""


class SearchFailureError(KillingGeodesicsError):
    """No search start converged within the given budget."""


class DegenerateCriticalPointError(KillingGeodesicsError):
    """A transverse Hessian eigenvalue is too close to zero to classify."""


class UnsupportedCapabilityError(KillingGeodesicsError):
    """The requested operation needs structure the object does not carry."""
