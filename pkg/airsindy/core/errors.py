"""
Exception hierarchy shared by every airsindy module.

Each class carries the module it belongs to and the CLI exit code it maps to,
so a failure deep in the pipeline can be rendered with its provenance.
"""

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class AirSindyError(Exception):
    """Base class for all airsindy errors."""
    module = "airsindy"
    exit_code = 1


class ConfigError(AirSindyError):
    """Invalid configuration value or flag combination."""
    module = "config"
    exit_code = EXIT_USAGE


# --- dataset ---

class DatasetError(AirSindyError):
    """Custom exception for ingestion and windowing problems."""
    module = "dataset"
    exit_code = EXIT_DATA


class MalformedRowError(DatasetError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateReadingError(DatasetError):
    pass


class NonUniformStepError(DatasetError):
    pass


class SpeciesMissingError(DatasetError):
    """A station does not measure a requested species."""
    def __init__(self, station, species):
        super().__init__(f"species {species} is not measured at station {station}")
        self.station = station
        self.species = species


class MissingDataError(DatasetError):
    def __init__(self, station, species, timestamp):
        super().__init__(f"missing {species} reading at station {station} for {timestamp.isoformat()}")
        self.station = station
        self.species = species
        self.timestamp = timestamp


class WindowError(DatasetError):
    pass


# --- preprocess ---

class PreprocessError(AirSindyError):
    module = "preprocess"
    exit_code = EXIT_DATA


class ZeroVarianceError(PreprocessError):
    pass


class TooFewPointsError(PreprocessError):
    pass


# --- numerics ---

class NumericError(AirSindyError):
    module = "numeric"
    exit_code = EXIT_NUMERIC


class RankDeficientError(NumericError):
    module = "regression"


class LassoConvergenceError(NumericError):
    module = "regression"


class IntegrationError(NumericError):
    """Base for failures of the implicit integrator."""
    module = "ode"


class DerivativeBlowup(IntegrationError):
    """Raised when a derivative exceeds the configured guard."""
    def __init__(self, time, component, value):
        super().__init__(f"|dy[{component}]/dt| = {value:.4g} exceeded the guard at t = {time:.6g} h")
        self.time = time
        self.component = component
        self.value = value


class StepLimitExceeded(IntegrationError):
    pass


class NewtonDivergence(IntegrationError):
    def __init__(self, time, message="Newton iteration failed to converge"):
        super().__init__(f"{message} at t = {time:.6g} h")
        self.time = time


class AllModelsInfeasible(NumericError):
    module = "ode"


class SharedComponentError(NumericError):
    """The two nullcline conics share a component: infinitely many critical points."""
    module = "stability"


class IllConditionedResultantError(NumericError):
    module = "stability"

    def __init__(self, condition):
        super().__init__(f"resultant companion matrix is ill-conditioned (cond ~ {condition:.3e})")
        self.condition = condition


class CorrectionError(NumericError):
    module = "embedding"


class EmbeddingError(NumericError):
    module = "embedding"
    exit_code = EXIT_DATA


class SweepError(NumericError):
    module = "sweep"


class KineticsError(NumericError):
    module = "synth"
