"""Exception types shared across the package."""


class GeoShapError(Exception):
    """Base class for all package errors."""


# --- tabular data ---------------------------------------------------------

class MissingColumn(GeoShapError):
    def __init__(self, name):
        super().__init__(f"required column missing from file: {name!r}")
        self.name = name


class EmptyAfterFiltering(GeoShapError):
    pass


class MalformedCsv(GeoShapError):
    def __init__(self, line, reason="wrong field count"):
        super().__init__(f"malformed CSV at line {line}: {reason}")
        self.line = line


class InvalidK(GeoShapError):
    pass


# --- metrics --------------------------------------------------------------

class LengthMismatch(GeoShapError):
    pass


class EmptyInput(GeoShapError):
    pass


class ZeroVariance(GeoShapError):
    pass


# --- model ----------------------------------------------------------------

class TooFewRows(GeoShapError):
    pass


class ArityMismatch(GeoShapError):
    pass


class CorruptModelFile(GeoShapError):
    pass


class DegenerateFeatureWarning(UserWarning):
    """A feature column is constant on the training data."""


# --- explanation engine ---------------------------------------------------

class OutOfRange(GeoShapError):
    pass


class CapExceeded(GeoShapError):
    def __init__(self, k, cap):
        super().__init__(
            f"exact enumeration needs 2^{k} coalition patterns but the cap is "
            f"k <= {cap}; use the sampled estimator for this many players"
        )
        self.k = k
        self.cap = cap


class SingularSystem(GeoShapError):
    def __init__(self, detail):
        super().__init__(
            f"constrained regression system is singular ({detail}); "
            "increase the coalition budget or use a more varied background"
        )


class PredictorError(GeoShapError):
    """A predictor call failed; carries coalition context when available."""


# --- analytics ------------------------------------------------------------

class EmptyRecords(GeoShapError):
    pass


class UnknownFeature(GeoShapError):
    def __init__(self, name):
        super().__init__(f"feature not in schema: {name!r}")
        self.name = name


class MissingGeo(GeoShapError):
    pass


# --- synthetic data -------------------------------------------------------

class InvalidSpec(GeoShapError):
    pass


# --- predictor bridge -----------------------------------------------------

class TransportError(GeoShapError):
    pass


class BridgeTimeout(GeoShapError, TimeoutError):
    pass


class VersionMismatch(GeoShapError):
    pass


class MalformedReply(GeoShapError):
    pass


class RemoteModelError(GeoShapError):
    """The remote side replied ok=false to a well-formed request."""
