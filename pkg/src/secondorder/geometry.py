"""Shared geometry: optical setup, source profile, masks, detectors and scans.

All lengths are SI meters stored as Python floats. Types are frozen
dataclasses and validate themselves on construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ValidationError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

SOURCE_SHAPES = ("uniform-hard-edge", "gaussian")
SCAN_AXES = (
    "mask_T_center",
    "mask_C_center",
    "detector_C",
    "detector_T",
    "detector_diagonal",
    "detector_antidiagonal",
    "detector_2d",
)

# Experimental defaults (meters).
DEFAULT_WAVELENGTH = 980e-9
DEFAULT_Z = 70e-3
DEFAULT_FOCAL_LENGTH = 200e-3
DEFAULT_COHERENCE_LENGTH = 0.55e-3
DEFAULT_D_T = 0.57e-3
DEFAULT_D_C = 0.69e-3
DEFAULT_SLIT_WIDTH = 55e-6
DEFAULT_DETECTOR_APERTURE = 50e-6
DEFAULT_SOURCE_SHAPE = "gaussian"


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(name, f"must be a finite positive length, got {value!r}")
    return value


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(name, f"must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SourceProfile:
    """Transverse intensity profile of the chaotic source.

    ``coherence_length`` is the transverse coherence length on the mask plane.
    The physical source size follows from it through :meth:`OpticalSetup`:

    * ``uniform-hard-edge`` of full width ``D``: coherence length ``lambda*z/D``,
      the first zero of the sinc-shaped source spectrum.
    * ``gaussian`` of RMS width ``sigma``: coherence length is the full width of
      ``|g1|`` at ``1/e``, i.e. ``|g1(dx)| = exp(-4 dx**2 / l**2)``.
    """

    shape: Literal["uniform-hard-edge", "gaussian"] = DEFAULT_SOURCE_SHAPE
    coherence_length: float = DEFAULT_COHERENCE_LENGTH

    def __post_init__(self):
        if self.shape not in SOURCE_SHAPES:
            raise ValidationError("source.shape", f"unknown shape {self.shape!r}; expected one of {SOURCE_SHAPES}")
        object.__setattr__(self, "coherence_length", _require_positive("source.coherence_length", self.coherence_length))


@dataclass(frozen=True)
class OpticalSetup:
    wavelength: float = DEFAULT_WAVELENGTH
    z_source_to_mask: float = DEFAULT_Z
    focal_length: float = DEFAULT_FOCAL_LENGTH
    source: SourceProfile = field(default_factory=SourceProfile)

    def __post_init__(self):
        object.__setattr__(self, "wavelength", _require_positive("setup.wavelength", self.wavelength))
        object.__setattr__(self, "z_source_to_mask", _require_positive("setup.z", self.z_source_to_mask))
        object.__setattr__(self, "focal_length", _require_positive("setup.focal_length", self.focal_length))
        if not isinstance(self.source, SourceProfile):
            raise ValidationError("setup.source", "must be a SourceProfile")

    @property
    def omega(self) -> float:
        """Angular frequency 2*pi*c/lambda."""
        return 2.0 * math.pi * SPEED_OF_LIGHT / self.wavelength

    @property
    def wavenumber(self) -> float:
        """omega/c = 2*pi/lambda."""
        return 2.0 * math.pi / self.wavelength

    @property
    def lambda_z(self) -> float:
        return self.wavelength * self.z_source_to_mask

    @property
    def lambda_f(self) -> float:
        return self.wavelength * self.focal_length

    @property
    def source_width(self) -> float:
        """Characteristic source size: full width D (hard edge) or RMS sigma (gaussian)."""
        lc = self.source.coherence_length
        if self.source.shape == "uniform-hard-edge":
            return self.lambda_z / lc
        return math.sqrt(2.0) * self.lambda_z / (math.pi * lc)

    @property
    def source_half_width(self) -> float:
        """Half-width of the source intensity profile (D/2, or sigma for a gaussian)."""
        if self.source.shape == "uniform-hard-edge":
            return 0.5 * self.source_width
        return self.source_width

    @property
    def source_support(self) -> tuple[float, float]:
        """Interval holding the sampled source: [-D/2, D/2] or [-4 sigma, 4 sigma]."""
        h = self.source_half_width if self.source.shape == "uniform-hard-edge" else 4.0 * self.source_width
        return (-h, h)


@dataclass(frozen=True)
class DoubleSlitMask:
    """Two slits of width ``slit_width`` centered at ``center -/+ separation/2``."""

    center: float = 0.0
    separation: float = DEFAULT_D_T
    slit_width: float = 0.0
    label: Literal["C", "T"] = "T"

    def __post_init__(self):
        name = f"mask_{self.label}"
        object.__setattr__(self, "center", _require_finite(f"{name}.center", self.center))
        object.__setattr__(self, "separation", _require_positive(f"{name}.separation", self.separation))
        a = _require_finite(f"{name}.slit_width", self.slit_width)
        if a < 0.0:
            raise ValidationError(f"{name}.slit_width", "must be >= 0")
        if a >= self.separation:
            raise ValidationError(f"{name}.slit_width", f"slits overlap: width {a} >= separation {self.separation}")
        object.__setattr__(self, "slit_width", a)
        if self.label not in ("C", "T"):
            raise ValidationError(f"{name}.label", "must be 'C' or 'T'")

    @property
    def slits(self) -> tuple[float, ...]:
        return slit_positions(self)

    def moved(self, center: float) -> "DoubleSlitMask":
        return DoubleSlitMask(center, self.separation, self.slit_width, self.label)


@dataclass(frozen=True)
class SingleSlitMask:
    """One slit; used as a degenerate fixture and for the Siegert check."""

    center: float = 0.0
    slit_width: float = 0.0
    label: Literal["C", "T"] = "T"

    def __post_init__(self):
        object.__setattr__(self, "center", _require_finite(f"mask_{self.label}.center", self.center))
        if not (self.slit_width >= 0.0 and math.isfinite(self.slit_width)):
            raise ValidationError(f"mask_{self.label}.slit_width", "must be >= 0")

    @property
    def slits(self) -> tuple[float, ...]:
        return (self.center,)

    def moved(self, center: float) -> "SingleSlitMask":
        return SingleSlitMask(center, self.slit_width, self.label)


Mask = DoubleSlitMask | SingleSlitMask


@dataclass(frozen=True)
class DetectorSpec:
    position: float = 0.0
    aperture: float = 0.0  # 0 means a point detector

    def __post_init__(self):
        object.__setattr__(self, "position", _require_finite("detector.position", self.position))
        if not (math.isfinite(self.aperture) and self.aperture >= 0.0):
            raise ValidationError("detector.aperture", "must be >= 0")


@dataclass(frozen=True)
class ScanGrid:
    axis: str
    start: float
    stop: float
    n_points: int

    def __post_init__(self):
        if self.axis not in SCAN_AXES:
            raise ValidationError("scan.axis", f"unknown axis {self.axis!r}; expected one of {SCAN_AXES}")
        _require_finite("scan.start", self.start)
        _require_finite("scan.stop", self.stop)
        if not self.stop > self.start:
            raise ValidationError("scan.stop", "must be greater than scan.start")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValidationError("scan.n_points", "must be an integer >= 2")

    def positions(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, int(self.n_points))


def slit_positions(mask: DoubleSlitMask) -> tuple[float, float]:
    """Return ``(center - d/2, center + d/2)``."""
    half = 0.5 * mask.separation
    return (mask.center - half, mask.center + half)


@dataclass(frozen=True)
class RegimeReport:
    """Advisory flags for the disjoint-path interference regime.

    ``first_order_suppressed[label]`` is true when the slit separation of that
    mask is at least ``suppress_factor * coherence_length``.
    ``pairs_correlated[k]`` is true when slit ``k+1`` of mask C and slit ``k+1``
    of mask T are within ``correlate_factor * coherence_length``.
    """

    first_order_suppressed: dict[str, bool]
    pairs_correlated: tuple[bool, bool]
    pair_offsets: tuple[float, float]
    coherence_length: float

    @property
    def disjoint_path_regime(self) -> bool:
        return all(self.first_order_suppressed.values()) and all(self.pairs_correlated)


def validate_coherence_regime(
    setup: OpticalSetup,
    mask_C: DoubleSlitMask,
    mask_T: DoubleSlitMask,
    suppress_factor: float = 0.9,
    correlate_factor: float = 0.5,
) -> RegimeReport:
    lc = setup.source.coherence_length
    suppressed = {
        "C": mask_C.separation >= suppress_factor * lc,
        "T": mask_T.separation >= suppress_factor * lc,
    }
    offsets = tuple(abs(c - t) for c, t in zip(slit_positions(mask_C), slit_positions(mask_T)))
    correlated = tuple(off <= correlate_factor * lc for off in offsets)
    return RegimeReport(suppressed, correlated, offsets, lc)


def default_masks(slit_width: float = 0.0) -> tuple[DoubleSlitMask, DoubleSlitMask]:
    """Centered masks with the experimental separations, as ``(mask_C, mask_T)``."""
    return (
        DoubleSlitMask(0.0, DEFAULT_D_C, slit_width, "C"),
        DoubleSlitMask(0.0, DEFAULT_D_T, slit_width, "T"),
    )
