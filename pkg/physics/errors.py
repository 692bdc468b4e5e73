class LabError(Exception):
    pass


class GeometryError(LabError):
    pass


class MeshingError(GeometryError):
    def __init__(self, message: str, panel: int | None = None):
        super().__init__(message)
        self.panel = panel


class DomainError(LabError):
    pass


class SolverError(LabError):
    pass


class CapacitanceError(LabError):
    pass


class FitError(LabError):
    pass


class OracleError(LabError):
    pass


class ConfigError(LabError):
    pass
