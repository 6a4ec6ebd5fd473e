"""Acceptance checks shared by the ``selftest`` scenario and the test suite.

All checks use the default geometry with point-like detectors. Realization
counts are fixed per check; the run seed and worker count come from the
configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid

from . import analytic
from .config import ScenarioConfig
from .fringes import fringe_shift, visibility
from .geometry import DoubleSlitMask, SingleSlitMask
from .scenarios import (
    FIG2_OFFSETS,
    ScanRecord,
    ScenarioOutput,
    progress,
    record_to_csv,
    run_fig2,
    run_fig3a,
    run_fig3bc,
)
from .speckle import simulate, stream_key

MM = 1e-3
N_FIG2 = 20_000
N_FIRST_ORDER = 10_000
N_SIEGERT = 100_000
N_MAP = 20_000
STREAM_SIEGERT = 16


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


@dataclass
class SelftestReport:
    checks: list[CheckResult]
    output: ScenarioOutput

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class _Runs:
    fig2: ScenarioOutput
    fig3a: ScenarioOutput
    fig3bc: ScenarioOutput
    siegert: ScanRecord

    @property
    def records(self) -> list[ScanRecord]:
        return self.fig2.records + self.fig3a.records + self.fig3bc.records + [self.siegert]


def acceptance_config(cfg: ScenarioConfig) -> ScenarioConfig:
    return replace(cfg, detector_aperture=0.0, engine="both", scenario="fig2", n_realizations=N_FIG2, scan=None)


def _record(output: ScenarioOutput, name: str) -> ScanRecord:
    return next(r for r in output.records if r.name == name)


def siegert_run(cfg: ScenarioConfig, n_realizations: int = N_SIEGERT) -> ScanRecord:
    """Normalized fluctuation correlation of co-located point detectors behind one point slit."""
    pinhole_C = SingleSlitMask(0.0, 0.0, "C")
    pinhole_T = SingleSlitMask(0.0, 0.0, "T")
    mc = simulate(
        cfg.setup,
        [(pinhole_C, 0.0)],
        [(pinhole_T, 0.0)],
        n_realizations=n_realizations,
        seed=stream_key(cfg.seed, STREAM_SIEGERT),
        source_points=cfg.source_points,
        workers=cfg.workers,
    )
    r = mc.result
    cols = {"x_m": np.array([0.0]), "g2_minus_1": r.normalized, "g2_minus_1_stderr": r.normalized_std_error}
    return ScanRecord("selftest_siegert", cols, ("x_m",))


def _simulated_runs(cfg: ScenarioConfig) -> _Runs:
    acfg = acceptance_config(cfg)
    progress("selftest: fig2")
    fig2 = run_fig2(acfg)
    progress("selftest: fig3a")
    fig3a = run_fig3a(replace(acfg, scenario="fig3a", n_realizations=N_MAP))
    progress("selftest: fig3bc")
    fig3bc = run_fig3bc(replace(acfg, scenario="fig3bc", n_realizations=N_FIRST_ORDER))
    progress("selftest: Siegert check")
    siegert = siegert_run(acfg)
    for out in (fig2, fig3a, fig3bc):
        for rec in out.records:
            rec.name = f"selftest_{rec.name}"
    return _Runs(fig2, fig3a, fig3bc, siegert)


# ---------------------------------------------------------------- checks


def check_mask_scan_period(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    target = cfg.setup.lambda_z / cfg.mask_T.separation
    rec = runs.fig2.records[0]
    fa, fm = rec.fits["analytic"], rec.fits["montecarlo"]
    rel = abs(fa.period - target) / target
    z = abs(fm.period - fa.period) / fm.period_stderr
    ok = rel < 0.01 and z <= 3.0
    detail = (
        f"analytic {fa.period / MM:.5f} mm vs {target / MM:.5f} mm (rel {rel:.2e} < 1e-2); "
        f"MC {fm.period / MM:.5f} +/- {fm.period_stderr / MM:.5f} mm, {z:.2f} sigma from analytic (<= 3)"
    )
    return CheckResult(1, "mask-scan fringe period", ok, detail, {"analytic": fa.period, "mc": fm.period, "mc_stderr": fm.period_stderr})


def check_fringe_shifts(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    fits = [r.fits["analytic"] for r in runs.fig2.records[:3]]
    targets = [off * cfg.mask_C.separation / cfg.mask_T.separation for off in FIG2_OFFSETS[1:]]
    shifts = [fringe_shift(fits[0], f) for f in fits[1:]]
    errs = [abs(s - t) for s, t in zip(shifts, targets)]
    ok = all(e < 0.01 * MM for e in errs)
    detail = ", ".join(f"{s / MM:.4f} mm (expect {t / MM:.4f})" for s, t in zip(shifts, targets)) + ", tolerance 0.01 mm"
    return CheckResult(2, "fringe-shift law", ok, detail, {"shifts": shifts, "targets": targets})


def _cut_fit(runs: _Runs, name: str):
    return _record(runs.fig3a, f"selftest_fig3a_{name}").fits["analytic"]


def _period_check(number, title, runs, cfg, names_targets, tol):
    parts, ok, values = [], True, {}
    for name, target in names_targets:
        P = _cut_fit(runs, name).period
        rel = abs(P - target) / target
        ok &= rel < tol
        values[name] = P
        parts.append(f"{name} {P / MM:.5f} mm vs {target / MM:.5f} (rel {rel:.2e})")
    return CheckResult(number, title, ok, "; ".join(parts) + f", tolerance {tol:.0%}", values)


def check_detector_periods(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    lf = cfg.setup.lambda_f
    return _period_check(
        3,
        "detector-scan periods",
        runs,
        cfg,
        [("detector_T", lf / cfg.mask_T.separation), ("detector_C", lf / cfg.mask_C.separation)],
        0.01,
    )


def check_beating(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    lf, dC, dT = cfg.setup.lambda_f, cfg.mask_C.separation, cfg.mask_T.separation
    return _period_check(
        4, "diagonal/anti-diagonal beating", runs, cfg, [("diagonal", lf / abs(dC - dT)), ("antidiagonal", lf / (dC + dT))], 0.02
    )


def check_first_order(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    parts, ok, values = [], True, {}
    for label in ("C", "T"):
        rec = _record(runs.fig3bc, f"selftest_fig3bc_{label}")
        for engine, suffix in (("analytic", "norm"), ("mc", "mc_norm")):
            vl = visibility(rec.columns[f"laser_{suffix}"])
            vc = visibility(rec.columns[f"chaotic_{suffix}"])
            ok &= vl > 0.95 and vc < 0.1
            values[f"{label}_{engine}"] = (vl, vc)
            parts.append(f"{label}/{engine} laser {vl:.3f} chaotic {vc:.4f}")
    return CheckResult(5, "first-order contrast", ok, "; ".join(parts) + " (laser > 0.95, chaotic < 0.1)", values)


def check_siegert(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    g = float(runs.siegert.columns["g2_minus_1"][0])
    se = float(runs.siegert.columns["g2_minus_1_stderr"][0])
    ok = 0.9 <= g <= 1.1
    return CheckResult(6, "Siegert property", ok, f"normalized correlation {g:.4f} +/- {se:.4f} in [0.9, 1.1]", {"value": g, "stderr": se})


def check_oracle_map(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    rec = _record(runs.fig3a, "selftest_fig3a_map")
    rms = float(np.sqrt(np.mean((rec.columns["corr_mc"] - rec.columns["corr_norm"]) ** 2)))
    return CheckResult(7, "Monte Carlo vs analytic map", rms < 0.05, f"41x41 RMS deviation {rms:.4f} < 0.05", {"rms": rms})


def four_vs_two_path_difference(cfg: ScenarioConfig, mask_C=None, mask_T=None) -> float:
    mC = mask_C or cfg.mask_C
    mT = mask_T or cfg.mask_T
    g = np.linspace(-0.6 * MM, 0.6 * MM, 41)
    two = analytic.correlation_map(cfg.setup, mC, mT, g[:, None], g[None, :], "two_path")
    four = analytic.correlation_map(cfg.setup, mC, mT, g[:, None], g[None, :], "four_path")
    return float(np.max(np.abs(four - two)))


def check_four_path(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    d_def = four_vs_two_path_difference(cfg)
    d_small = cfg.setup.source.coherence_length / 5
    mC = DoubleSlitMask(cfg.mask_C.center, d_small, cfg.mask_C.slit_width, "C")
    mT = DoubleSlitMask(cfg.mask_T.center, d_small, cfg.mask_T.slit_width, "T")
    d_close = four_vs_two_path_difference(cfg, mC, mT)
    ok = d_def < 0.05 and d_close > 0.2
    detail = f"defaults max diff {d_def:.4f} < 0.05; d_j = l_coh/5 max diff {d_close:.4f} > 0.2"
    return CheckResult(8, "four-path vs two-path", ok, detail, {"default": d_def, "close": d_close})


def bucket_visibilities(cfg: ScenarioConfig) -> tuple[float, float]:
    """(point, bucket) visibilities of the correlation along x_C.

    The bucket integrates x_T over +-3 mm, many detector-T fringe periods.
    """
    xc = np.linspace(-0.6 * MM, 0.6 * MM, 121)
    xt = np.linspace(-3.0 * MM, 3.0 * MM, 1201)
    raw = analytic.raw_correlation(cfg.setup, cfg.mask_C, cfg.mask_T, xc[:, None], xt[None, :])
    point = raw[:, np.argmin(np.abs(xt))]
    bucket = trapezoid(raw, xt, axis=1)
    return visibility(point), visibility(bucket)


def check_bucket(runs: _Runs, cfg: ScenarioConfig) -> CheckResult:
    v_pt, v_b = bucket_visibilities(cfg)
    ok = v_b < 0.2 * v_pt
    return CheckResult(9, "bucket-detector collapse", ok, f"bucket visibility {v_b:.4f} < 0.2 x point visibility {v_pt:.4f}", {"point": v_pt, "bucket": v_b})


def check_determinism(first: dict[str, str], second: dict[str, str]) -> CheckResult:
    same = first.keys() == second.keys() and all(first[k] == second[k] for k in first)
    diff = sorted(k for k in first if first.get(k) != second.get(k))
    detail = f"{len(first)} CSVs byte-identical across repeated runs" if same else f"differing CSVs: {', '.join(diff)}"
    return CheckResult(10, "determinism", same, detail)


CHECKS = (
    check_mask_scan_period,
    check_fringe_shifts,
    check_detector_periods,
    check_beating,
    check_first_order,
    check_siegert,
    check_oracle_map,
    check_four_path,
    check_bucket,
)


def _csv_texts(runs: _Runs) -> dict[str, str]:
    return {f"{r.name}.csv": record_to_csv(r) for r in runs.records}


def run_selftest(cfg: ScenarioConfig, verify_determinism: bool = True) -> SelftestReport:
    """Run every acceptance check; the determinism check repeats all simulations
    with a different worker count and compares the CSV bytes."""
    runs = _simulated_runs(cfg)
    checks = []
    for fn in CHECKS:
        try:
            checks.append(fn(runs, cfg))
        except Exception as exc:  # a crashing check is a failed check
            n = CHECKS.index(fn) + 1
            checks.append(CheckResult(n, fn.__name__, False, f"{type(exc).__name__}: {exc}"))
    if verify_determinism:
        progress("selftest: repeating simulations for the determinism check")
        other_workers = 2 if cfg.workers == 1 else 1
        again = _simulated_runs(replace(cfg, workers=other_workers))
        checks.append(check_determinism(_csv_texts(runs), _csv_texts(again)))
    summary = {
        "scenario": "selftest",
        "seed": cfg.seed,
        "passed": all(c.passed for c in checks),
        "checks": [{"number": c.number, "name": c.name, "passed": c.passed, "detail": c.detail} for c in checks],
    }
    output = ScenarioOutput("selftest", runs.records, summary)
    return SelftestReport(checks, output)


def format_report(report: SelftestReport) -> str:
    return "\n".join(c.line() for c in report.checks)


