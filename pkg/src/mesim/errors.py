"""Exception types shared across the package."""


class MesimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MesimError):
    """Invalid, unknown or inconsistent scenario configuration."""


class MalformedInputError(MesimError):
    """A point-cloud file could not be parsed."""

    def __init__(self, path, line_number, message):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = str(path)
        self.line_number = line_number


class EmptySceneError(MesimError):
    """A scene with no scatterers was handed to a stage that needs one."""


class GeometryError(MesimError):
    """Degenerate scene geometry: zero range or wrong half-space."""


class UndefinedSnrError(MesimError):
    """Signal power is zero, so an SNR-relative operation is undefined."""


class SpeedRangeError(MesimError):
    """Forward speed falls outside the usable snapshot-interval window."""


class FrameTooShortError(MesimError):
    """The frame cannot host the requested snapshot layout."""

    def __init__(self, message, max_extra):
        super().__init__(message)
        self.max_extra = max_extra
