"""Exception types raised across the package."""


class StabFEMError(Exception):
    pass


class InvalidArgumentError(StabFEMError, ValueError):
    pass


class InvalidMeshError(StabFEMError, ValueError):
    pass


class RegionUnresolvedError(StabFEMError, ValueError):
    """A region's boundary does not coincide with mesh lines."""


class SolverError(StabFEMError, RuntimeError):
    """Linear solve failed; ``residual`` is the best relative residual achieved."""

    def __init__(self, message, residual=float("inf")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class InsufficientDataError(StabFEMError, ValueError):
    pass
