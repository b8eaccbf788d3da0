"""Exception hierarchy shared across softsync modules."""


class SoftSyncError(Exception):
    pass


# --- algebra -----------------------------------------------------------------

class DivisionByZeroPolynomial(SoftSyncError, ZeroDivisionError):
    pass


class BothZero(SoftSyncError, ValueError):
    pass


class ZeroPolynomial(SoftSyncError, ValueError):
    pass


class DivisionByZeroRational(SoftSyncError, ZeroDivisionError):
    pass


class PoleAtEvaluationPoint(SoftSyncError, ValueError):
    pass


class ParseError(SoftSyncError, ValueError):
    pass


# --- rational matrices -------------------------------------------------------

class NotInImage(SoftSyncError):
    pass


class Underdetermined(SoftSyncError):
    def __init__(self, free_variables: int):
        super().__init__(f"system has infinitely many solutions ({free_variables} free variables)")
        self.free_variables = free_variables


class ZeroEntry(SoftSyncError):
    pass


class RankDeficient(SoftSyncError):
    pass


# --- plant -------------------------------------------------------------------

class SpeedLimitExceeded(SoftSyncError, ValueError):
    pass


class NonlinearExponent(SoftSyncError, ValueError):
    pass


class EmptyChannelList(SoftSyncError, ValueError):
    pass


class FitFailed(SoftSyncError):
    pass


# --- synthesis ---------------------------------------------------------------

class SynthesisError(SoftSyncError):
    pass


class UnstableInverse(SynthesisError):
    pass


class ImproperUnfixable(SynthesisError):
    pass


class EmptySet(SynthesisError, ValueError):
    pass


class PoleOnGrid(SynthesisError, ValueError):
    pass


# --- simulation / config -----------------------------------------------------

class ImproperTransferFunction(SoftSyncError, ValueError):
    pass


class SimulationError(SoftSyncError):
    pass


class ConfigError(SoftSyncError, ValueError):
    pass
