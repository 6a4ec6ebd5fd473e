"""Closed-form second-order correlation of chaotic light through two double slits.

The fluctuation correlation between the two focal-plane detectors is the
squared modulus of the first-order cross-correlation of the fields, which is
a sum over pairs of disjoint paths (slit ``alpha`` of mask C, slit ``beta``
of mask T).  Each pair contributes

    conj(A_alpha(x_C)) * A_beta(x_T) * S((x_alpha - x_beta) / (lambda z))

with ``A_j(x_d) = B_j(x_d) * slit_envelope`` and ``S`` the normalized source
spectrum.  Only normalized shapes are meaningful; proportionality constants
are dropped throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .geometry import Mask, OpticalSetup

Mode = Literal["two_path", "four_path"]


def source_spectrum(setup: OpticalSetup, spatial_frequency):
    """Fourier transform of the source intensity profile, normalized to 1 at 0."""
    nu = np.asarray(spatial_frequency, dtype=float)
    if setup.source.shape == "uniform-hard-edge":
        out = np.sinc(setup.source_width * nu)
    else:
        sigma = setup.source_width
        out = np.exp(-2.0 * (math.pi * sigma * nu) ** 2)
    return out if out.ndim else float(out)


def coherence_factor(setup: OpticalSetup, dx):
    """Source spectrum evaluated at a mask-plane separation ``dx``."""
    return source_spectrum(setup, np.asarray(dx, dtype=float) / setup.lambda_z)


def propagation_phase(setup: OpticalSetup, slit_position, detector_position):
    """Unit-modulus factor ``exp(i(k x_j^2/(2z) - k x_d x_j/f))``."""
    k = setup.wavenumber
    xj = np.asarray(slit_position, dtype=float)
    xd = np.asarray(detector_position, dtype=float)
    phase = k * xj * xj / (2.0 * setup.z_source_to_mask) - k * xd * xj / setup.focal_length
    out = np.exp(1j * phase)
    return out if out.ndim else complex(out)


def slit_envelope(setup: OpticalSetup, slit_position, detector_position, slit_width: float):
    """Far-field envelope of one hard-edged slit, 1 for point slits.

    The source-distance phase is held constant across the slit (width much
    smaller than ``sqrt(lambda z)``), leaving ``sinc(a x_d / (lambda f))``.
    """
    if slit_width == 0.0:
        return 1.0
    xd = np.asarray(detector_position, dtype=float)
    return np.sinc(slit_width * xd / setup.lambda_f)


def slit_amplitude(setup: OpticalSetup, slit_position, detector_position, slit_width: float = 0.0):
    return propagation_phase(setup, slit_position, detector_position) * slit_envelope(
        setup, slit_position, detector_position, slit_width
    )


@dataclass(frozen=True)
class PathContribution:
    slit_at_C: int
    slit_at_T: int
    amplitude: complex | np.ndarray


def g1_pair(
    setup: OpticalSetup, mask_C: Mask, mask_T: Mask, alpha: int, beta: int, x_C, x_T
) -> PathContribution:
    """Cross-correlation contribution of the path pair through slit ``alpha`` of C and ``beta`` of T.

    Slit indices are 1-based.
    """
    xa = mask_C.slits[alpha - 1]
    xb = mask_T.slits[beta - 1]
    amp = (
        np.conj(slit_amplitude(setup, xa, x_C, mask_C.slit_width))
        * slit_amplitude(setup, xb, x_T, mask_T.slit_width)
        * coherence_factor(setup, xa - xb)
    )
    if np.ndim(amp) == 0:
        amp = complex(amp)
    return PathContribution(alpha, beta, amp)


def path_pairs(mask_C: Mask, mask_T: Mask, mode: Mode) -> list[tuple[int, int]]:
    nc, nt = len(mask_C.slits), len(mask_T.slits)
    if mode == "four_path":
        return [(a, b) for a in range(1, nc + 1) for b in range(1, nt + 1)]
    if mode == "two_path":
        return [(a, a) for a in range(1, min(nc, nt) + 1)]
    raise ValueError(f"unknown mode {mode!r}")


def g1_total(setup: OpticalSetup, mask_C: Mask, mask_T: Mask, x_C, x_T, mode: Mode = "two_path"):
    """First-order cross-correlation summed over the selected path pairs."""
    total = 0.0
    for a, b in path_pairs(mask_C, mask_T, mode):
        total = total + g1_pair(setup, mask_C, mask_T, a, b, x_C, x_T).amplitude
    return total


@lru_cache(maxsize=8)
def gauss_legendre_nodes(n: int = 9) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [-1/2, 1/2] and weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * x, 0.5 * w


def raw_correlation(
    setup: OpticalSetup,
    mask_C: Mask,
    mask_T: Mask,
    x_C,
    x_T,
    mode: Mode = "two_path",
    aperture: float = 0.0,
):
    """Unnormalized ``|g1_total|^2``, top-hat averaged over both detector apertures."""
    x_C, x_T = np.broadcast_arrays(np.asarray(x_C, dtype=float), np.asarray(x_T, dtype=float))
    if aperture == 0.0:
        return np.abs(g1_total(setup, mask_C, mask_T, x_C, x_T, mode)) ** 2
    nodes, weights = gauss_legendre_nodes()
    xc = x_C[..., None, None] + aperture * nodes[:, None]
    xt = x_T[..., None, None] + aperture * nodes[None, :]
    vals = np.abs(g1_total(setup, mask_C, mask_T, xc, xt, mode)) ** 2
    return np.einsum("...ij,i,j->...", vals, weights, weights)


def correlation_map(
    setup: OpticalSetup,
    mask_C: Mask,
    mask_T: Mask,
    x_C,
    x_T,
    mode: Mode = "two_path",
    aperture: float = 0.0,
    reference: tuple[float, float] | None = None,
    normalize: bool = True,
):
    """Normalized fluctuation correlation ``<dI_C dI_T>`` over the given coordinates.

    With ``reference=None`` the result is divided by its global maximum; a
    ``(x_C, x_T)`` reference divides by the value there instead.
    """
    vals = raw_correlation(setup, mask_C, mask_T, x_C, x_T, mode, aperture)
    if not normalize:
        return vals
    if reference is None:
        peak = float(np.max(vals))
    else:
        peak = float(raw_correlation(setup, mask_C, mask_T, reference[0], reference[1], mode, aperture))
    return vals / peak


def correlation_map_for(setup, mask_C, mask_T, x_C, x_T, mode="two_path", aperture=0.0):
    """Like :func:`correlation_map` but ``mask_C``/``mask_T`` may be arrays of masks.

    Used for mask-center scans where the geometry changes per scan point.
    """
    masks_C = np.atleast_1d(np.asarray(mask_C, dtype=object))
    masks_T = np.atleast_1d(np.asarray(mask_T, dtype=object))
    masks_C, masks_T = np.broadcast_arrays(masks_C, masks_T)
    out = np.array(
        [
            raw_correlation(setup, mc, mt, x_C, x_T, mode, aperture)
            for mc, mt in zip(masks_C.ravel(), masks_T.ravel())
        ]
    )
    return out / out.max()


def sensing_phase(setup: OpticalSetup, X_C, d_C, X_T, d_T, x_C, x_T):
    """Relative phase of the (2,2) path pair with respect to the (1,1) pair."""
    k = setup.wavenumber
    return k / setup.z_source_to_mask * (X_T * d_T - X_C * d_C) - k / setup.focal_length * (
        x_T * d_T - x_C * d_C
    )


def first_order_intensity(
    setup: OpticalSetup,
    mask: Mask,
    x_d,
    illumination: Literal["laser", "chaotic"] = "chaotic",
    aperture: float = 0.0,
):
    """Mean intensity behind one mask, unnormalized.

    ``laser`` is a coherent point source on axis; ``chaotic`` weights each slit
    pair by the source spectrum at the slit separation.
    """
    if illumination not in ("laser", "chaotic"):
        raise ValueError(f"unknown illumination {illumination!r}")
    x_d = np.asarray(x_d, dtype=float)
    if aperture:
        nodes, weights = gauss_legendre_nodes()
        xs = x_d[..., None] + aperture * nodes
    else:
        weights = None
        xs = x_d
    amps = [slit_amplitude(setup, x, xs, mask.slit_width) for x in mask.slits]
    total = 0.0
    for i, xi in enumerate(mask.slits):
        for j, xj in enumerate(mask.slits):
            coh = 1.0 if illumination == "laser" else coherence_factor(setup, xi - xj)
            total = total + coh * np.conj(amps[i]) * amps[j]
    vals = np.real(total)
    if weights is not None:
        vals = vals @ weights
    return vals
