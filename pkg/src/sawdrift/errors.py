"""Exception hierarchy shared by all sawdrift modules."""


class SawDriftError(Exception):
    """Base class for all library errors."""


class ModelError(SawDriftError):
    """Runtime failure inside the lattice model (CLI exit code 2)."""


class NumericalUnderflow(ModelError):
    pass


class NonGenerativeVariant(ModelError):
    pass


class StepOutOfWindow(ModelError):
    def __init__(self, t, displacement=None):
        self.t = t
        self.displacement = displacement
        msg = f"observed step at t={t} lies outside the selection window"
        if displacement is not None:
            msg += f" (displacement {displacement})"
        super().__init__(msg)


class ConfigError(SawDriftError):
    pass


class InsufficientSamples(SawDriftError):
    pass


class TrialTooShort(SawDriftError):
    pass


class DegenerateScale(SawDriftError):
    pass


class TrajectoryTooShort(SawDriftError):
    pass


class NoMovement(SawDriftError):
    pass


class LagTooLarge(SawDriftError):
    pass


class NonPositiveMsd(SawDriftError):
    pass


class NoEvents(SawDriftError):
    pass


class ParseError(SawDriftError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(SawDriftError):
    pass


class OffLattice(SawDriftError):
    def __init__(self, index, suggested_L=None):
        self.index = index
        self.suggested_L = suggested_L
        msg = f"sample {index} falls off the lattice"
        if suggested_L is not None:
            msg += f"; minimal lattice size for this trial is L={suggested_L}"
        super().__init__(msg)


class TooFewTrials(SawDriftError):
    pass


class MissingFit(SawDriftError):
    pass
