"""
Custom error classes shared by the library and the command line.
"""
from typing import Optional


class NdfError(Exception):
    """Base exception. `exit_code` is what the CLI returns for it."""
    exit_code = 1
    message = "An error occurred"
    stage: Optional[str] = None

    def __init__(self, message: str = None, exit_code: int = None,
                 stage: str = None, payload: dict = None):
        if message:
            self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        if stage:
            self.stage = stage
        self.payload = payload
        super().__init__(self.message)

    def to_dict(self) -> dict:
        rv = dict(self.payload or ())
        rv['message'] = self.message
        rv['status'] = 'error'
        if self.stage:
            rv['stage'] = self.stage
        return rv


class UsageError(NdfError):
    exit_code = 2
    message = "Invalid usage"


class MeshError(NdfError):
    message = "Invalid mesh"


class NonManifoldError(MeshError):
    message = "Mesh is not manifold"


class DegenerateFaceError(MeshError):
    message = "Degenerate face"


class SurfaceError(NdfError):
    message = "Surface query failed"


class DomainError(SurfaceError):
    message = "Point outside the surface domain"


class RepresentationError(SurfaceError):
    message = "Operation not supported by this surface representation"


class EmptyLevelSetError(SurfaceError):
    message = "Level set is empty"


class ProjectionError(NdfError):
    message = "Projection failed"


class NumericalError(NdfError):
    message = "Non-finite value encountered"


class SamplingError(NdfError):
    message = "Sampling failed"


class DecompositionError(NdfError):
    message = "Sparse factorization or eigensolve failed"


class PackageError(NdfError):
    message = "Invalid package"


class BadMagicError(PackageError):
    message = "Bad magic number"


class VersionMismatchError(PackageError):
    message = "Unsupported package version"


class TruncatedSectionError(PackageError):
    message = "Truncated section"

    def __init__(self, section: str, message: str = None, **kwargs):
        self.section = section
        super().__init__(message or f"Truncated section: {section}",
                         payload={'section': section}, **kwargs)


class DecimationWarning(UserWarning):
    """Decimation stopped above the requested face count."""
