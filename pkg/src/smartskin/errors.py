"""Exception types raised by the synthesis chain."""


class SmartSkinError(Exception):
    """Base class for all package errors."""


class NoGroundIntersection(SmartSkinError):
    """A reflected ray never reaches the ground plane."""


class SingularMapping(SmartSkinError):
    """The susceptibility -> reflection map hit its pole."""


class SingularInverse(SmartSkinError):
    """The reflection -> susceptibility map hit its pole."""


class GridTooCoarse(SmartSkinError):
    """A far-field grid is coarser than the aperture Nyquist spacing."""


class GridTooCoarseWarning(UserWarning):
    pass


class DegenerateOperator(SmartSkinError):
    """A linear operator has no nonzero singular value."""


class IllConditioned(SmartSkinError):
    """A Kriging correlation matrix could not be factorized."""
