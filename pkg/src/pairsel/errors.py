"""Exception types raised across the package."""


class PairselError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(PairselError, ValueError):
    pass


class IncompatibleGridError(PairselError, ValueError):
    pass


class InvalidStepError(PairselError, ValueError):
    pass


class EmptyGridError(PairselError, ValueError):
    pass


class UnsupportedOperationError(PairselError, NotImplementedError):
    pass


class IllPosedModelError(PairselError, ValueError):
    """The noise law and contamination level violate the deconvolution assumption."""


class IncompleteFamilyError(PairselError, KeyError):
    pass


class InconsistencyRegionError(PairselError, ValueError):
    """Parameters lie where no uniformly consistent estimator exists."""


class ConfigError(PairselError, ValueError):
    pass


class ReplicationError(PairselError, RuntimeError):
    def __init__(self, message, replication, seed):
        super().__init__(f"{message} (replication={replication}, seed={seed})")
        self.replication = replication
        self.seed = seed
