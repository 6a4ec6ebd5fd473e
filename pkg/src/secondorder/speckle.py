"""Monte Carlo speckle engine.

A spatially incoherent source is sampled as independent circular complex
gaussian amplitudes on a grid.  Each realization is split by an ideal
balanced beam splitter into the two arms, propagated over ``z`` to the mask,
through the sampled slits, and to focal-plane detectors by direct sums.

Realization ``i`` draws from ``Philox(key=seed, counter=[0, 0, 0, i])``: the
realization index sits in the high counter word, so each realization owns a
disjoint counter range and any subset can be computed independently.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytic import gauss_legendre_nodes
from .correlator import CorrelationAccumulator, CorrelationResult, finalize, tree_merge
from .errors import GridResolutionError, ValidationError
from .geometry import Mask, OpticalSetup

DEFAULT_SOURCE_POINTS = 1024
DEFAULT_SLIT_POINTS = 8
DEFAULT_BATCH = 500
PILOT_REALIZATIONS = 100


@dataclass(frozen=True)
class SourceGrid:
    positions: np.ndarray
    amplitude_weights: np.ndarray
    spacing: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        w = np.asarray(self.amplitude_weights, dtype=float)
        if pos.shape != w.shape or pos.ndim != 1:
            raise ValidationError("source_grid", "positions and weights must be 1D arrays of equal length")
        if pos.size < 128:
            raise ValidationError("source_grid.positions", f"need at least 128 points, got {pos.size}")
        if np.any(w < 0):
            raise ValidationError("source_grid.amplitude_weights", "weights must be >= 0")
        width = pos[-1] - pos[0] + self.spacing
        if self.spacing > width / 64:
            raise ValidationError("source_grid.spacing", "spacing must be <= source width / 64")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "amplitude_weights", w)

    def __len__(self) -> int:
        return self.positions.size


def make_source_grid(setup: OpticalSetup, n_points: int = DEFAULT_SOURCE_POINTS) -> SourceGrid:
    """Cell-centered grid over the source support, weights normalized to unit power."""
    lo, hi = setup.source_support
    spacing = (hi - lo) / n_points
    x = lo + spacing * (np.arange(n_points) + 0.5)
    if setup.source.shape == "uniform-hard-edge":
        intensity = np.ones(n_points)
    else:
        sigma = setup.source_width
        intensity = np.exp(-0.5 * (x / sigma) ** 2)
    w = np.sqrt(intensity / intensity.sum())
    return SourceGrid(x, w, spacing)


@dataclass(frozen=True)
class SourceRealization:
    grid: SourceGrid
    field: np.ndarray
    realization_index: int
    seed: int


@dataclass(frozen=True)
class DetectorSample:
    I_C: np.ndarray | float
    I_T: np.ndarray | float


def stream_key(seed: int, stream: int) -> int:
    """Philox key of independent sub-experiment ``stream`` within one run seed."""
    return (int(stream) << 64) | int(seed)


def _generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(index)]))


def source_fields(grid: SourceGrid, seed: int, indices: Sequence[int]) -> np.ndarray:
    """Fields of several realizations, shape ``(len(indices), len(grid))``."""
    n = len(grid)
    out = np.empty((len(indices), n), dtype=complex)
    scale = grid.amplitude_weights / math.sqrt(2.0)
    for r, idx in enumerate(indices):
        z = _generator(seed, idx).standard_normal(2 * n)
        out[r].real = z[:n]
        out[r].imag = z[n:]
    out *= scale
    return out


def sample_source(grid: SourceGrid, seed: int, realization_index: int) -> SourceRealization:
    """One chaotic realization: ``E|field_m|^2 = weight_m^2``, independent points."""
    field = source_fields(grid, seed, [realization_index])[0]
    return SourceRealization(grid, field, int(realization_index), int(seed))


def slit_samples(mask: Mask, n_points: int = DEFAULT_SLIT_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint-rule nodes and weights across every slit of ``mask``.

    Point slits get a single node of weight 1; finite slits ``n_points`` nodes
    with weights summing to 1 per slit.
    """
    a = mask.slit_width
    if a == 0.0:
        return np.array(mask.slits, dtype=float), np.ones(len(mask.slits))
    offs = a * ((np.arange(n_points) + 0.5) / n_points - 0.5)
    nodes = np.concatenate([c + offs for c in mask.slits])
    return nodes, np.full(nodes.size, 1.0 / n_points)


def check_resolution(setup: OpticalSetup, grid: SourceGrid, slit_nodes: np.ndarray) -> None:
    """Source sampling must resolve the steepest source-to-slit phase gradient."""
    k = setup.wavenumber
    reach = np.max(np.abs(slit_nodes[:, None] - grid.positions[None, [0, -1]]))
    step = k * reach / setup.z_source_to_mask * grid.spacing
    if step > math.pi:
        raise GridResolutionError(
            f"source spacing {grid.spacing:.3g} m gives phase step {step:.3g} rad > pi; refine the source grid"
        )


def arm_matrix(
    setup: OpticalSetup,
    grid: SourceGrid,
    channels: Sequence[tuple[Mask, float]],
    slit_points: int = DEFAULT_SLIT_POINTS,
    aperture: float = 0.0,
) -> np.ndarray:
    """Linear map from source field to detector fields for one arm.

    ``channels`` lists ``(mask, detector_position)`` pairs. With an aperture
    each channel expands into the 9 Gauss-Legendre nodes across it, so the
    result has shape ``(n_channels * n_nodes, n_source)``.
    """
    k = setup.wavenumber
    z = setup.z_source_to_mask
    f = setup.focal_length
    if aperture:
        offs, _ = gauss_legendre_nodes()
        offs = aperture * offs
    else:
        offs = np.zeros(1)
    rows = []
    cache: dict[Mask, np.ndarray] = {}
    for mask, x_d in channels:
        if mask not in cache:
            xm, wm = slit_samples(mask, slit_points)
            check_resolution(setup, grid, xm)
            dx = xm[:, None] - grid.positions[None, :]
            cache[mask] = (xm, wm[:, None] * np.exp(1j * k * dx * dx / (2.0 * z)))
        xm, K = cache[mask]
        xd = x_d + offs
        D = np.exp(-1j * k * xd[:, None] * xm[None, :] / f)
        rows.append(D @ K)
    return np.vstack(rows)


def _intensities(fields: np.ndarray, M: np.ndarray, n_nodes: int) -> np.ndarray:
    E = fields @ M.T
    I = (E * E.conj()).real
    if n_nodes == 1:
        return I
    _, w = gauss_legendre_nodes()
    return I.reshape(I.shape[0], -1, n_nodes) @ w


def field_at_detector(realization: SourceRealization, setup: OpticalSetup, mask: Mask, detector_position, slit_points: int = DEFAULT_SLIT_POINTS):
    """Direct-sum focal-plane field of one realization behind ``mask``."""
    xd = np.atleast_1d(np.asarray(detector_position, dtype=float))
    M = arm_matrix(setup, realization.grid, [(mask, float(x)) for x in xd], slit_points)
    E = M @ realization.field
    return complex(E[0]) if np.ndim(detector_position) == 0 else E


def run_realization(realization, setup, mask_C, mask_T, x_C, x_T, slit_points: int = DEFAULT_SLIT_POINTS) -> DetectorSample:
    """Intensities at both detectors from the same split source field."""
    e_c = field_at_detector(realization, setup, mask_C, x_C, slit_points)
    e_t = field_at_detector(realization, setup, mask_T, x_T, slit_points)
    return DetectorSample(np.abs(e_c) ** 2, np.abs(e_t) ** 2)


@dataclass(frozen=True)
class _Arms:
    M_C: np.ndarray
    M_T: np.ndarray
    n_nodes: int
    outer: bool
    shape: tuple[int, ...]


def _batch_accumulator(arms: _Arms, grid: SourceGrid, seed: int, start: int, stop: int, scale: tuple[float, float], n_blocks: int):
    idx = np.arange(start, stop)
    fields = source_fields(grid, seed, idx)
    I_C = _intensities(fields, arms.M_C, arms.n_nodes) / scale[0]
    I_T = _intensities(fields, arms.M_T, arms.n_nodes) / scale[1]
    acc = CorrelationAccumulator(arms.shape, n_blocks)
    return acc.add_batch(I_C, I_T, idx, outer=arms.outer)


def _run_batch(args):
    return _batch_accumulator(*args)


@dataclass(frozen=True)
class MonteCarloResult:
    result: CorrelationResult
    scale: tuple[float, float]  # pilot mean intensities divided out before accumulation
    n_realizations: int
    seed: int

    @property
    def fluct_corr(self) -> np.ndarray:
        return self.result.fluct_corr * (self.scale[0] * self.scale[1])


def simulate(
    setup: OpticalSetup,
    channels_C: Sequence[tuple[Mask, float]],
    channels_T: Sequence[tuple[Mask, float]],
    n_realizations: int,
    seed: int,
    outer: bool = False,
    aperture: float = 0.0,
    source_points: int = DEFAULT_SOURCE_POINTS,
    slit_points: int = DEFAULT_SLIT_POINTS,
    batch_size: int = DEFAULT_BATCH,
    workers: int = 1,
    n_blocks: int = 50,
) -> MonteCarloResult:
    """Ensemble correlation of detector intensities.

    ``outer=False`` pairs channel ``i`` of arm C with channel ``i`` of arm T;
    ``outer=True`` correlates every combination into an ``(nC, nT)`` map.
    Batches are fixed by ``batch_size`` alone and reduced in a pairwise tree,
    so results do not depend on ``workers``.
    """
    if n_realizations < 2:
        raise ValidationError("n_realizations", "need at least 2 realizations")
    grid = make_source_grid(setup, source_points)
    n_nodes = 9 if aperture else 1
    M_C = arm_matrix(setup, grid, channels_C, slit_points, aperture)
    M_T = arm_matrix(setup, grid, channels_T, slit_points, aperture)
    nC, nT = len(channels_C), len(channels_T)
    if outer:
        shape = (nC, nT)
    else:
        if nC != nT:
            raise ValidationError("channels", "paired channels need equal counts in both arms")
        shape = (nC,)
    arms = _Arms(M_C, M_T, n_nodes, outer, shape)

    n_pilot = min(PILOT_REALIZATIONS, n_realizations)
    pilot = source_fields(grid, seed, range(n_pilot))
    scale = (
        float(_intensities(pilot, M_C, n_nodes).mean()),
        float(_intensities(pilot, M_T, n_nodes).mean()),
    )
    if not (scale[0] > 0 and scale[1] > 0):
        raise GridResolutionError("pilot realizations gave zero mean intensity")

    tasks = [
        (arms, grid, seed, s, min(s + batch_size, n_realizations), scale, n_blocks)
        for s in range(0, n_realizations, batch_size)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            accs = list(pool.map(_run_batch, tasks))
    else:
        accs = [_run_batch(t) for t in tasks]
    return MonteCarloResult(finalize(tree_merge(accs)), scale, n_realizations, seed)


def simulate_first_order(
    setup: OpticalSetup,
    mask: Mask,
    x_d,
    n_realizations: int,
    seed: int,
    illumination: str = "chaotic",
    aperture: float = 0.0,
    source_points: int = DEFAULT_SOURCE_POINTS,
    slit_points: int = DEFAULT_SLIT_POINTS,
    batch_size: int = DEFAULT_BATCH,
) -> np.ndarray:
    """Mean intensity behind one mask; ``laser`` uses a single on-axis coherent point."""
    x_d = np.atleast_1d(np.asarray(x_d, dtype=float))
    channels = [(mask, float(x)) for x in x_d]
    n_nodes = 9 if aperture else 1
    if illumination == "laser":
        # A coherent on-axis point source: one unit amplitude at x_s = 0.
        single = _point_grid(*setup.source_support)
        M = arm_matrix(setup, single, channels, slit_points, aperture)
        field = np.zeros((1, len(single)), dtype=complex)
        field[0, len(single) // 2] = 1.0
        return _intensities(field, M, n_nodes)[0]
    if illumination != "chaotic":
        raise ValidationError("illumination", f"unknown illumination {illumination!r}")
    grid = make_source_grid(setup, source_points)
    M = arm_matrix(setup, grid, channels, slit_points, aperture)
    total = np.zeros(len(channels))
    for s in range(0, n_realizations, batch_size):
        fields = source_fields(grid, seed, range(s, min(s + batch_size, n_realizations)))
        total += _intensities(fields, M, n_nodes).sum(axis=0)
    return total / n_realizations


def _point_grid(lo: float, hi: float) -> SourceGrid:
    # Odd-sized symmetric grid so that the middle node sits exactly at x_s = 0.
    n = 129
    x = np.linspace(lo, hi, n)
    x[n // 2] = 0.0
    w = np.zeros(n)
    w[n // 2] = 1.0
    return SourceGrid(x, w, x[1] - x[0])
