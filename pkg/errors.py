class SadlError(Exception):
    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(SadlError):
    exit_code = 1


class DataError(SadlError):
    exit_code = 2


class ShapeError(DataError):
    pass


class GeometryError(DataError):
    pass


class PointOutsideCrop(GeometryError):
    pass


class ClassAbsent(DataError):
    def __init__(self, k: int, detail: str | None = None):
        super().__init__(detail or f"class {k} has no pixels in the sampling region")
        self.k = k


class EmptyRegion(DataError):
    pass


class CheckpointError(DataError):
    pass


class GradientError(SadlError):
    pass
