"""Fringe fitting and inversion of fringe periods/shifts to mask geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import FitConvergenceError, IncompatiblePeriodsError, NoFringeError, UnknownAxisError
from .geometry import OpticalSetup

TWO_PI = 2.0 * math.pi
MIN_SPECTRAL_SNR = 3.0


@dataclass(frozen=True)
class FringeFit:
    """Fitted ``A*G(x)*(1 + V cos(2 pi x/period + phase)) + B`` with gaussian ``G``."""

    period: float
    phase_offset: float
    visibility: float
    envelope_center: float
    envelope_width: float
    amplitude: float
    background: float
    residual_rms: float
    period_stderr: float
    phase_stderr: float
    n_points: int

    def phase_at(self, x: float) -> float:
        return TWO_PI * x / self.period + self.phase_offset

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        env = np.exp(-0.5 * ((x - self.envelope_center) / self.envelope_width) ** 2)
        return self.amplitude * env * (1.0 + self.visibility * np.cos(self.phase_at(x))) + self.background


@dataclass(frozen=True)
class SensingEstimate:
    d_estimate: float
    shift_estimate: float | None
    covariance: np.ndarray  # over (d_estimate, shift_estimate); NaN rows where undefined

    @property
    def d_stderr(self) -> float:
        return math.sqrt(self.covariance[0, 0])


def visibility(values) -> float:
    """``(max - min) / (max + min)`` of a non-negative trace."""
    v = np.asarray(values, dtype=float)
    hi, lo = float(v.max()), float(v.min())
    return (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0


def _spectrum(positions, values, oversample: int = 16):
    x = np.asarray(positions, dtype=float)
    y = np.asarray(values, dtype=float)
    n = x.size
    xu = np.linspace(x[0], x[-1], n)
    yu = np.interp(xu, x, y) if not np.allclose(np.diff(x), xu[1] - xu[0]) else y
    span = xu[-1] - xu[0]
    yu = (yu - np.polyval(np.polyfit(xu - xu[0], yu, 1), xu - xu[0])) * np.hanning(n)
    nfft = oversample * n
    amp = np.abs(np.fft.rfft(yu, nfft))
    freqs = np.fft.rfftfreq(nfft, xu[1] - xu[0])
    band = freqs >= 1.0 / span
    if not band.any():
        raise NoFringeError("scan too short for a spectral period estimate")
    return freqs[band], amp[band]


def _refine_peak(freqs, amp, i) -> float:
    # Parabolic interpolation on the log spectrum.
    if 0 < i < amp.size - 1 and np.all(amp[i - 1 : i + 2] > 0):
        a, b, c = np.log(amp[i - 1 : i + 2])
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        return float(freqs[i] + shift * (freqs[1] - freqs[0]))
    return float(freqs[i])


def spectral_period(positions, values, oversample: int = 16) -> tuple[float, float]:
    """Dominant period of a scan and the spectral peak SNR.

    Uses a Hann-windowed, zero-padded FFT of the linearly detrended trace
    resampled onto a uniform grid. Frequencies below one cycle per span are
    ignored. SNR is the peak amplitude over the median amplitude of the band.
    """
    freqs, amp = _spectrum(positions, values, oversample)
    i = int(np.argmax(amp))
    median = float(np.median(amp))
    if amp[i] == 0.0:
        snr = 0.0
    else:
        snr = float(amp[i] / median) if median > 0 else math.inf
    return 1.0 / _refine_peak(freqs, amp, i), snr


def _candidate_periods(positions, values, n_peaks: int = 3) -> list[float]:
    """Starting periods: the strongest spectral peaks plus the peak of the
    frequency-weighted spectrum, which favours carriers over envelope lobes."""
    freqs, amp = _spectrum(positions, values)
    interior = np.flatnonzero((amp[1:-1] >= amp[:-2]) & (amp[1:-1] >= amp[2:])) + 1
    order = interior[np.argsort(amp[interior])[::-1]][:n_peaks]
    idx = list(order) + [int(np.argmax(amp * freqs))]
    out: list[float] = []
    for i in idx:
        P = 1.0 / _refine_peak(freqs, amp, i)
        if all(abs(P - q) > 0.02 * q for q in out):
            out.append(P)
    return out


def _model_and_jac(p, u):
    # Envelope curvature q = 1/width**2 (q = 0 means no envelope), in scan units.
    A, c, q, V, P, phi, B = p
    du = u - c
    g = np.exp(-0.5 * q * du * du)
    arg = TWO_PI * u / P + phi
    cos, sin = np.cos(arg), np.sin(arg)
    carrier = 1.0 + V * cos
    model = A * g * carrier + B
    J = np.empty((u.size, 7))
    J[:, 0] = g * carrier
    J[:, 1] = A * g * carrier * q * du
    J[:, 2] = -0.5 * A * g * carrier * du * du
    J[:, 3] = A * g * cos
    J[:, 4] = A * g * V * sin * TWO_PI * u / P**2
    J[:, 5] = -A * g * V * sin
    J[:, 6] = 1.0
    return model, J


def _fit_from(u, ys, P0u, max_iterations):
    # Envelope guess from the positive part of the trace, broadened a little.
    wts = np.clip(ys - ys.min(), 0.0, None)
    if wts.sum() > 0:
        c0 = float(np.sum(wts * u) / wts.sum())
        var0 = float(np.sum(wts * (u - c0) ** 2) / wts.sum())
    else:
        c0, var0 = 0.0, 1.0 / 12
    q_hi = 2500.0  # width >= span/50
    q0 = float(np.clip(1.0 / (1.5 * max(var0, 1e-6)), 0.0, q_hi / 2))

    # Linear stage at fixed envelope and period gives amplitude, phase and offset.
    g = np.exp(-0.5 * q0 * (u - c0) ** 2)
    arg = TWO_PI * u / P0u
    M = np.column_stack([g, g * np.cos(arg), g * np.sin(arg), np.ones_like(u)])
    (a, cc, ss, b), *_ = np.linalg.lstsq(M, ys, rcond=None)
    A0 = a if a > 0 else max(float(ys.max() - ys.min()), 1e-6)
    V0 = float(np.clip(math.hypot(cc, ss) / A0, 0.01, 0.99))
    phi0 = math.atan2(-ss, cc)

    p0 = np.array([A0, c0, q0, V0, P0u, phi0, b])
    lo = np.array([0.0, -1.5, 0.0, 0.0, P0u / 2, -np.inf, -np.inf])
    hi = np.array([np.inf, 1.5, q_hi, 1.0, 2 * P0u, np.inf, np.inf])
    margin = np.where(np.isfinite(hi - lo), 1e-9 * (hi - lo), 0.0)
    p0 = np.clip(p0, lo + margin, hi - margin)

    return least_squares(
        lambda p: _model_and_jac(p, u)[0] - ys,
        p0,
        jac=lambda p: _model_and_jac(p, u)[1],
        bounds=(lo, hi),
        method="trf",
        xtol=1e-10,
        ftol=1e-12,
        gtol=1e-12,
        max_nfev=max_iterations,
    )


def fit_fringe(positions, values, period_guess: float | None = None, max_iterations: int = 200) -> FringeFit:
    """Least-squares fit of an enveloped cosine fringe to a 1D scan.

    The fit runs in scan units (origin at the scan midpoint, unit span) with
    values scaled to unit peak, from each candidate starting period; the
    lowest-cost converged solution is mapped back to the input units.
    """
    x = np.asarray(positions, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size != y.size:
        raise ValueError("positions and values differ in length")
    if x.size < 8:
        raise NoFringeError(f"need at least 8 points, got {x.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("values must be finite")

    _, snr = spectral_period(x, y)
    if snr < MIN_SPECTRAL_SNR:
        raise NoFringeError(f"spectral peak SNR {snr:.2f} < {MIN_SPECTRAL_SNR}")
    candidates = [float(period_guess)] if period_guess is not None else _candidate_periods(x, y)

    mid = 0.5 * (x[0] + x[-1])
    span = x[-1] - x[0]
    u = (x - mid) / span
    scale = max(float(np.max(np.abs(y))), 1e-300)
    ys = y / scale

    best = None
    for P0 in candidates:
        sol = _fit_from(u, ys, P0 / span, max_iterations)
        if sol.status > 0 and (best is None or sol.cost < best.cost):
            best = sol
    if best is None:
        raise FitConvergenceError(f"fringe fit did not converge within {max_iterations} evaluations")

    A, c, q, V, P, phi, B = best.x
    rss = float(np.sum(best.fun**2))
    s2 = rss / max(x.size - 7, 1)
    cov = np.linalg.pinv(best.jac.T @ best.jac) * s2
    diag = np.clip(np.diag(cov), 0.0, None)
    # Carrier phase referred to the absolute coordinate x = 0.
    phase0 = phi - TWO_PI * mid / (P * span)
    return FringeFit(
        period=float(P * span),
        phase_offset=float(math.remainder(phase0, TWO_PI)),
        visibility=float(V),
        envelope_center=float(mid + c * span),
        envelope_width=float(span / math.sqrt(q)) if q > 0 else math.inf,
        amplitude=float(A * scale),
        background=float(B * scale),
        residual_rms=float(math.sqrt(rss / x.size) * scale),
        period_stderr=float(math.sqrt(diag[4]) * span),
        phase_stderr=float(math.sqrt(diag[5])),
        n_points=int(x.size),
    )


def invert_period(period: float, setup: OpticalSetup, scan_axis: str, period_stderr: float = 0.0) -> SensingEstimate:
    """Turn a fitted period into a slit separation (or sum/difference of separations).

    Detector axes give ``lambda f / period``; mask-center axes ``lambda z / period``.
    The diagonal axis yields ``|d_C - d_T|`` and the anti-diagonal ``d_C + d_T``.
    """
    if not period > 0:
        raise ValueError("period must be positive")
    if scan_axis in ("detector_C", "detector_T", "detector_diagonal", "detector_antidiagonal"):
        scale = setup.lambda_f
    elif scan_axis in ("mask_T_center", "mask_C_center"):
        scale = setup.lambda_z
    else:
        raise UnknownAxisError(f"cannot invert a period along axis {scan_axis!r}")
    d = scale / period
    var_d = (d * period_stderr / period) ** 2
    cov = np.array([[var_d, np.nan], [np.nan, np.nan]])
    return SensingEstimate(d, None, cov)


def fringe_shift(fit_a: FringeFit, fit_b: FringeFit, rel_tol: float = 0.01) -> float:
    """Displacement of fringes ``b`` relative to ``a`` along the scan coordinate.

    The wrapped carrier phase difference, compared at the midpoint of the two
    envelope centers, fixes the shift modulo one period; the candidate closest
    to the envelope displacement is returned.
    """
    sa, sb = fit_a.period_stderr, fit_b.period_stderr
    P = 0.5 * (fit_a.period + fit_b.period)
    tol = 3.0 * math.hypot(sa, sb) + rel_tol * P
    if abs(fit_a.period - fit_b.period) > tol:
        raise IncompatiblePeriodsError(
            f"periods {fit_a.period:.6g} and {fit_b.period:.6g} differ by more than {tol:.3g}"
        )
    x_ref = 0.5 * (fit_a.envelope_center + fit_b.envelope_center)
    dpsi = math.remainder(fit_a.phase_at(x_ref) - fit_b.phase_at(x_ref), TWO_PI)
    base = dpsi * P / TWO_PI
    env_shift = fit_b.envelope_center - fit_a.envelope_center
    n = round((env_shift - base) / P)
    return base + n * P


def estimate_displacement(fit_a: FringeFit, fit_b: FringeFit, d_C: float, d_T: float) -> SensingEstimate:
    """Displacement of mask C implied by the shift of mask-T-scan fringes.

    Fringes move by ``dX_C * d_C / d_T`` when mask C moves by ``dX_C``.
    """
    shift = fringe_shift(fit_a, fit_b)
    dX = shift * d_T / d_C
    var_shift = ((fit_a.phase_stderr**2 + fit_b.phase_stderr**2) * (fit_a.period / TWO_PI) ** 2) * (d_T / d_C) ** 2
    cov = np.array([[0.0, 0.0], [0.0, var_shift]])
    return SensingEstimate(d_C, dX, cov)
