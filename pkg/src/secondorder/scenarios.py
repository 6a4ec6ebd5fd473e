"""Named experiment reproductions, custom sweeps and CSV output."""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .config import ScenarioConfig
from .errors import NumericalError, ValidationError
from .fringes import FringeFit, estimate_displacement, fit_fringe, fringe_shift, invert_period, visibility
from .speckle import simulate, simulate_first_order, stream_key

MM = 1e-3

FIG2_SCAN = (-0.6 * MM, 0.6 * MM, 241)
FIG2_OFFSETS = (0.0, 0.11 * MM, 0.17 * MM)
FIG3A_MAP = (-0.6 * MM, 0.6 * MM, 41)
FIG3A_CUTS = {
    # name: (axis, start, stop, n)
    "detector_C": ("detector_C", -1.0 * MM, 1.0 * MM, 201),
    "detector_T": ("detector_T", -1.0 * MM, 1.0 * MM, 201),
    "diagonal": ("detector_diagonal", -2.5 * MM, 2.5 * MM, 201),
    "antidiagonal": ("detector_antidiagonal", -0.5 * MM, 0.5 * MM, 201),
}
FIG3BC_SCAN = (-0.3 * MM, 0.3 * MM, 61)

# Independent random streams per sub-experiment of one seed.
STREAM_FIG2, STREAM_MAP, STREAM_CUTS, STREAM_FO_C, STREAM_FO_T, STREAM_CUSTOM = range(6)


@dataclass
class ScanRecord:
    """One emitted table: coordinate columns first, then values.

    ``axes`` lists the coordinate columns that must be strictly monotone
    (for 2D maps the slow axis is monotone within each block instead).
    """

    name: str
    columns: dict[str, np.ndarray]
    axes: tuple[str, ...]
    fits: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) != 1:
            raise ValueError(f"{self.name}: columns differ in length")
        for a in self.axes:
            if np.any(np.diff(self.columns[a]) <= 0):
                raise ValueError(f"{self.name}: coordinate {a} is not strictly increasing")


@dataclass
class ScenarioOutput:
    scenario: str
    records: list[ScanRecord]
    summary: dict


def progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if v == 0.0:
        return "0"
    return f"{v:.12g}"


def record_to_csv(rec: ScanRecord) -> str:
    names = list(rec.columns)
    cols = [np.asarray(rec.columns[n], dtype=float) for n in names]
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, FringeFit):
        return _fit_summary(obj)
    return obj


def summary_json(summary: dict) -> str:
    return json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"


def write_outputs(output: ScenarioOutput, out_dir) -> list[str]:
    """Write one CSV per record plus ``<scenario>_summary.json``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for rec in output.records:
        path = os.path.join(out_dir, f"{rec.name}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(record_to_csv(rec))
        paths.append(path)
    path = os.path.join(out_dir, f"{output.scenario}_summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(summary_json(output.summary))
    paths.append(path)
    return paths


def _fit_summary(fit: FringeFit) -> dict:
    return {
        "period_m": fit.period,
        "period_stderr_m": fit.period_stderr,
        "phase_offset_rad": fit.phase_offset,
        "visibility": fit.visibility,
        "envelope_center_m": fit.envelope_center,
        "envelope_width_m": fit.envelope_width,
        "residual_rms": fit.residual_rms,
    }


def _try_fit(x, y) -> tuple[FringeFit | None, str | None]:
    try:
        return fit_fringe(x, y), None
    except NumericalError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _peak_norm(values, errors=None):
    peak = float(np.max(values))
    if errors is None:
        return values / peak
    return values / peak, errors / abs(peak)


def _mc_kwargs(cfg: ScenarioConfig, aperture: float) -> dict:
    return dict(
        n_realizations=cfg.n_realizations,
        aperture=aperture,
        source_points=cfg.source_points,
        slit_points=cfg.slit_points,
        workers=cfg.workers,
    )


def _relative_error(value, target):
    return (value - target) / target


# ---------------------------------------------------------------- fig2


def run_fig2(cfg: ScenarioConfig, aperture: float | None = None) -> ScenarioOutput:
    ap = cfg.detector_aperture if aperture is None else aperture
    setup, mC, mT = cfg.setup, cfg.mask_C, cfg.mask_T
    X = mT.center + np.linspace(*FIG2_SCAN)
    masks_T = [mT.moved(float(x)) for x in X]
    masks_C = [mC.moved(mC.center + off) for off in FIG2_OFFSETS]

    mc = None
    if cfg.includes_montecarlo:
        progress(f"fig2: Monte Carlo, {cfg.n_realizations} realizations")
        mc = simulate(
            setup,
            [(m, cfg.x_C) for m in masks_C],
            [(m, cfg.x_T) for m in masks_T],
            seed=stream_key(cfg.seed, STREAM_FIG2),
            outer=True,
            **_mc_kwargs(cfg, ap),
        )

    records, fits, fits_mc = [], [], []
    for k, (off, m_c) in enumerate(zip(FIG2_OFFSETS, masks_C)):
        raw =np.array([analytic.raw_correlation(setup, m_c, m_t, cfg.x_C, cfg.x_T, aperture=ap) for m_t in masks_T])
        corr = _peak_norm(raw)
        cols = {"XT_m": X, "corr_norm": corr}
        fit, err = _try_fit(X, corr)
        fits.append(fit)
        rec_fits = {"analytic": fit if fit else err}
        if mc is not None:
            vals, errs = _peak_norm(mc.fluct_corr[k], mc.result.std_error[k] * mc.scale[0] * mc.scale[1])
            cols["corr_mc"] = vals
            cols["corr_mc_stderr"] = errs
            fit_mc, err_mc = _try_fit(X, vals)
            fits_mc.append(fit_mc)
            rec_fits["montecarlo"] = fit_mc if fit_mc else err_mc
        records.append(ScanRecord(f"fig2_dXC_{off / MM:.2f}mm", cols, ("XT_m",), rec_fits))

    intensity = np.array(
        [float(analytic.first_order_intensity(setup, m_t, cfg.x_T, "chaotic", ap)) for m_t in masks_T]
    )
    cols = {"XT_m": X, "intensity_T_norm": _peak_norm(intensity)}
    if mc is not None:
        cols["intensity_T_mc_norm"] = _peak_norm(mc.result.mean_IT[0] * mc.scale[1])
    records.append(ScanRecord("fig2_first_order", cols, ("XT_m",)))

    summary = {
        "scenario": "fig2",
        "predicted_period_m": setup.lambda_z / mT.separation,
        "analytic": _fig2_summary(cfg, fits),
    }
    if mc is not None:
        summary["montecarlo"] = _fig2_summary(cfg, fits_mc)
        summary["montecarlo"]["n_realizations"] = cfg.n_realizations
    summary["first_order_visibility"] = visibility(intensity)
    return ScenarioOutput("fig2", records, summary)


def _fig2_summary(cfg, fits):
    setup, mC, mT = cfg.setup, cfg.mask_C, cfg.mask_T
    pred_P = setup.lambda_z / mT.separation
    out = {"scans": []}
    periods = []
    for off, fit in zip(FIG2_OFFSETS, fits):
        entry = {"dXC_m": off}
        if fit is not None:
            periods.append(fit.period)
            entry.update(_fit_summary(fit))
            entry["period_rel_error"] = _relative_error(fit.period, pred_P)
            entry["d_T_estimate_m"] = invert_period(fit.period, setup, "mask_T_center").d_estimate
        if off and fit is not None and fits[0] is not None:
            try:
                shift = fringe_shift(fits[0], fit)
                est = estimate_displacement(fits[0], fit, mC.separation, mT.separation)
                entry["shift_m"] = shift
                entry["predicted_shift_m"] = off * mC.separation / mT.separation
                entry["dXC_estimate_m"] = est.shift_estimate
                entry["dXC_estimate_stderr_m"] = math.sqrt(est.covariance[1, 1])
            except NumericalError as exc:
                entry["shift_error"] = str(exc)
        out["scans"].append(entry)
    if periods:
        out["mean_period_m"] = float(np.mean(periods))
    return out


# ---------------------------------------------------------------- fig3a


def fig3a_cut_coordinates(axis: str, s: np.ndarray, x_C: float = 0.0, x_T: float = 0.0):
    """Detector coordinates along a 1D cut parameterized by ``s``."""
    if axis == "detector_C":
        return s, np.full_like(s, x_T)
    if axis == "detector_T":
        return np.full_like(s, x_C), s
    if axis == "detector_diagonal":
        return s, s
    if axis == "detector_antidiagonal":
        return s, -s
    raise ValidationError("scan.axis", f"{axis!r} is not a 1D detector cut")


def run_fig3a(cfg: ScenarioConfig, aperture: float | None = None) -> ScenarioOutput:
    ap = cfg.detector_aperture if aperture is None else aperture
    setup, mC, mT = cfg.setup, cfg.mask_C, cfg.mask_T
    g = np.linspace(*FIG3A_MAP)

    cut_coords = {}
    for name, (axis, a, b, n) in FIG3A_CUTS.items():
        s = np.linspace(a, b, n)
        cut_coords[name] = (axis, s, *fig3a_cut_coordinates(axis, s))

    mc_map = mc_cuts = None
    if cfg.includes_montecarlo:
        progress(f"fig3a: Monte Carlo map, {cfg.n_realizations} realizations")
        mc_map = simulate(
            setup,
            [(mC, float(x)) for x in g],
            [(mT, float(x)) for x in g],
            seed=stream_key(cfg.seed, STREAM_MAP),
            outer=True,
            **_mc_kwargs(cfg, ap),
        )
        progress("fig3a: Monte Carlo cuts")
        xc_all = np.concatenate([c[2] for c in cut_coords.values()])
        xt_all = np.concatenate([c[3] for c in cut_coords.values()])
        mc_cuts = simulate(
            setup,
            [(mC, float(x)) for x in xc_all],
            [(mT, float(x)) for x in xt_all],
            seed=stream_key(cfg.seed, STREAM_CUTS),
            **_mc_kwargs(cfg, ap),
        )

    amap = analytic.correlation_map(setup, mC, mT, g[:, None], g[None, :], aperture=ap)
    XC, XT = np.meshgrid(g, g, indexing="ij")
    cols = {"xC_m": XC.ravel(), "xT_m": XT.ravel(), "corr_norm": amap.ravel()}
    summary = {"scenario": "fig3a", "predicted_period_m": {}, "analytic": {}, "d_estimates_m": {}}
    if mc_map is not None:
        vals, errs = _peak_norm(mc_map.fluct_corr, mc_map.result.std_error * mc_map.scale[0] * mc_map.scale[1])
        cols["corr_mc"] = vals.ravel()
        cols["corr_mc_stderr"] = errs.ravel()
        summary["montecarlo"] = {
            "n_realizations": cfg.n_realizations,
            "map_rms_deviation": float(np.sqrt(np.mean((vals - amap) ** 2))),
        }
    records = [ScanRecord("fig3a_map", cols, ())]

    predicted = {
        "detector_C": setup.lambda_f / mC.separation,
        "detector_T": setup.lambda_f / mT.separation,
        "detector_diagonal": setup.lambda_f / abs(mC.separation - mT.separation),
        "detector_antidiagonal": setup.lambda_f / (mC.separation + mT.separation),
    }
    truth = {
        "detector_C": mC.separation,
        "detector_T": mT.separation,
        "detector_diagonal": abs(mC.separation - mT.separation),
        "detector_antidiagonal": mC.separation + mT.separation,
    }
    offset = 0
    for name, (axis, s, xc, xt) in cut_coords.items():
        corr = _peak_norm(analytic.raw_correlation(setup, mC, mT, xc, xt, aperture=ap))
        cols = {"s_m": s, "xC_m": xc, "xT_m": xt, "corr_norm": corr}
        fit, err = _try_fit(s, corr)
        rec_fits = {"analytic": fit if fit else err}
        summary["predicted_period_m"][name] = predicted[axis]
        entry = {"axis": axis}
        if fit is not None:
            entry.update(_fit_summary(fit))
            entry["period_rel_error"] = _relative_error(fit.period, predicted[axis])
            summary["d_estimates_m"][name] = {
                "estimate": invert_period(fit.period, setup, axis, fit.period_stderr).d_estimate,
                "configured": truth[axis],
            }
        else:
            entry["error"] = err
        summary["analytic"][name] = entry
        if mc_cuts is not None:
            sl = slice(offset, offset + s.size)
            vals, errs = _peak_norm(mc_cuts.fluct_corr[sl], mc_cuts.result.std_error[sl] * mc_cuts.scale[0] * mc_cuts.scale[1])
            cols["corr_mc"] = vals
            cols["corr_mc_stderr"] = errs
            fit_mc, err_mc = _try_fit(s, vals)
            rec_fits["montecarlo"] = fit_mc if fit_mc else err_mc
            summary["montecarlo"][name] = _fit_summary(fit_mc) if fit_mc else {"error": err_mc}
        offset += s.size
        records.append(ScanRecord(f"fig3a_{name}", cols, ("s_m",), rec_fits))
    return ScenarioOutput("fig3a", records, summary)


# ---------------------------------------------------------------- fig3bc


def run_fig3bc(cfg: ScenarioConfig, aperture: float | None = None) -> ScenarioOutput:
    ap = cfg.detector_aperture if aperture is None else aperture
    setup = cfg.setup
    x = np.linspace(*FIG3BC_SCAN)
    records, summary = [], {"scenario": "fig3bc", "analytic": {}}
    if cfg.includes_montecarlo:
        summary["montecarlo"] = {"n_realizations": cfg.n_realizations}
    for label, mask, stream in (("C", cfg.mask_C, STREAM_FO_C), ("T", cfg.mask_T, STREAM_FO_T)):
        laser = _peak_norm(analytic.first_order_intensity(setup, mask, x, "laser", ap))
        chaotic = _peak_norm(analytic.first_order_intensity(setup, mask, x, "chaotic", ap))
        coord = f"x{label}_m"
        cols = {coord: x, "laser_norm": laser, "chaotic_norm": chaotic}
        summary["analytic"][label] = {"laser_visibility": visibility(laser), "chaotic_visibility": visibility(chaotic)}
        if cfg.includes_montecarlo:
            progress(f"fig3bc: Monte Carlo first-order, mask {label}")
            kw = dict(aperture=ap, source_points=cfg.source_points, slit_points=cfg.slit_points)
            laser_mc = _peak_norm(simulate_first_order(setup, mask, x, 1, 0, "laser", **kw))
            chaotic_mc = _peak_norm(
                simulate_first_order(setup, mask, x, cfg.n_realizations, stream_key(cfg.seed, stream), "chaotic", **kw)
            )
            cols["laser_mc_norm"] = laser_mc
            cols["chaotic_mc_norm"] = chaotic_mc
            summary["montecarlo"][label] = {
                "laser_visibility": visibility(laser_mc),
                "chaotic_visibility": visibility(chaotic_mc),
            }
        records.append(ScanRecord(f"fig3bc_{label}", cols, (coord,)))
    return ScenarioOutput("fig3bc", records, summary)


# ---------------------------------------------------------------- custom


def _custom_channels(cfg: ScenarioConfig, axis: str, s: np.ndarray):
    """Per-point ``(mask_C, x_C)`` and ``(mask_T, x_T)`` channels for a 1D axis."""
    mC, mT = cfg.mask_C, cfg.mask_T
    if axis == "mask_T_center":
        return [(mC, cfg.x_C)] * s.size, [(mT.moved(float(v)), cfg.x_T) for v in s]
    if axis == "mask_C_center":
        return [(mC.moved(float(v)), cfg.x_C) for v in s], [(mT, cfg.x_T)] * s.size
    xc, xt = fig3a_cut_coordinates(axis, s, cfg.x_C, cfg.x_T)
    return [(mC, float(v)) for v in xc], [(mT, float(v)) for v in xt]


def run_custom(cfg: ScenarioConfig, aperture: float | None = None) -> ScenarioOutput:
    ap = cfg.detector_aperture if aperture is None else aperture
    setup, scan = cfg.setup, cfg.scan
    s = scan.positions()
    summary = {"scenario": "custom", "axis": scan.axis}
    mc_kw = _mc_kwargs(cfg, ap)
    seed = stream_key(cfg.seed, STREAM_CUSTOM)

    if scan.axis == "detector_2d":
        amap = analytic.correlation_map(setup, cfg.mask_C, cfg.mask_T, s[:, None], s[None, :], aperture=ap)
        XC, XT = np.meshgrid(s, s, indexing="ij")
        cols = {"xC_m": XC.ravel(), "xT_m": XT.ravel(), "corr_norm": amap.ravel()}
        if cfg.includes_montecarlo:
            progress(f"custom: Monte Carlo map, {cfg.n_realizations} realizations")
            mc = simulate(setup, [(cfg.mask_C, float(v)) for v in s], [(cfg.mask_T, float(v)) for v in s], seed=seed, outer=True, **mc_kw)
            vals, errs = _peak_norm(mc.fluct_corr, mc.result.std_error * mc.scale[0] * mc.scale[1])
            cols["corr_mc"] = vals.ravel()
            cols["corr_mc_stderr"] = errs.ravel()
            summary["map_rms_deviation"] = float(np.sqrt(np.mean((vals - amap) ** 2)))
        return ScenarioOutput("custom", [ScanRecord("custom_detector_2d", cols, ())], summary)

    ch_C, ch_T = _custom_channels(cfg, scan.axis, s)
    raw = np.array([analytic.raw_correlation(setup, mc_, mt_, xc, xt, aperture=ap) for (mc_, xc), (mt_, xt) in zip(ch_C, ch_T)])
    corr = _peak_norm(raw)
    cols = {"s_m": s, "corr_norm": corr}
    fits = {}
    fit, err = _try_fit(s, corr)
    fits["analytic"] = fit if fit else err
    if fit is not None:
        summary["analytic"] = _fit_summary(fit)
        summary["analytic"]["d_estimate_m"] = invert_period(fit.period, setup, scan.axis, fit.period_stderr).d_estimate
    else:
        summary["analytic"] = {"error": err}
    if cfg.includes_montecarlo:
        progress(f"custom: Monte Carlo, {cfg.n_realizations} realizations")
        mc = simulate(setup, ch_C, ch_T, seed=seed, **mc_kw)
        vals, errs = _peak_norm(mc.fluct_corr, mc.result.std_error * mc.scale[0] * mc.scale[1])
        cols["corr_mc"] = vals
        cols["corr_mc_stderr"] = errs
        fit_mc, err_mc = _try_fit(s, vals)
        fits["montecarlo"] = fit_mc if fit_mc else err_mc
        summary["montecarlo"] = _fit_summary(fit_mc) if fit_mc else {"error": err_mc}
    return ScenarioOutput("custom", [ScanRecord(f"custom_{scan.axis}", cols, ("s_m",), fits)], summary)


RUNNERS = {"fig2": run_fig2, "fig3a": run_fig3a, "fig3bc": run_fig3bc, "custom": run_custom}


def run_scenario(cfg: ScenarioConfig) -> ScenarioOutput:
    """Run the configured scenario. ``selftest`` runs the acceptance suite."""
    if cfg.scenario == "selftest":
        from .acceptance import run_selftest

        return run_selftest(cfg).output
    return RUNNERS[cfg.scenario](cfg)
