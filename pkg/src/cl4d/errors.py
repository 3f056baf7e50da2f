"""Exception hierarchy. Every domain error derives from CL4DError so the CLI can map it to exit code 1."""


class CL4DError(Exception):
    pass


class ParseFailure(CL4DError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class RatioError(CL4DError, ValueError):
    pass


class EmptyCorpus(CL4DError, ValueError):
    pass


class ShapeError(CL4DError, ValueError):
    pass


class ZeroVector(CL4DError, ValueError):
    pass


class NormError(CL4DError, ValueError):
    pass


class TemperatureError(CL4DError, ValueError):
    pass


class DataError(CL4DError):
    pass


class DuplicateIdError(CL4DError, ValueError):
    pass


class Exhausted(CL4DError):
    pass


class ConfigError(CL4DError, ValueError):
    pass


class CheckpointError(CL4DError):
    pass
