"""Scenario configuration: parsing, validation and serialization.

The file format is TOML restricted to flat ``key = value`` pairs under the
sections below (dotted keys such as ``setup.z = 0.07`` are equivalent).
All lengths are in meters. Unknown sections or keys are errors. An empty file
yields the experimental defaults.

    [setup]     wavelength, z, focal_length, coherence_length, source_shape
    [mask_C]    center, separation, slit_width
    [mask_T]    center, separation, slit_width
    [detector]  aperture, x_C, x_T
    [run]       scenario, engine, realizations, seed, workers, output,
                source_points, slit_points
    [scan]      axis, start, stop, n_points        (custom scenario only)
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigParseError, ValidationError
from .geometry import (
    DEFAULT_COHERENCE_LENGTH,
    DEFAULT_D_C,
    DEFAULT_D_T,
    DEFAULT_DETECTOR_APERTURE,
    DEFAULT_FOCAL_LENGTH,
    DEFAULT_SLIT_WIDTH,
    DEFAULT_SOURCE_SHAPE,
    DEFAULT_WAVELENGTH,
    DEFAULT_Z,
    DoubleSlitMask,
    OpticalSetup,
    ScanGrid,
    SourceProfile,
)
from .speckle import DEFAULT_SLIT_POINTS, DEFAULT_SOURCE_POINTS

SCENARIOS = ("fig2", "fig3a", "fig3bc", "custom", "selftest")
ENGINES = ("analytic", "montecarlo", "both")
MIN_REALIZATIONS = 100


@dataclass(frozen=True)
class ScenarioConfig:
    setup: OpticalSetup = field(default_factory=OpticalSetup)
    mask_C: DoubleSlitMask = field(default_factory=lambda: DoubleSlitMask(0.0, DEFAULT_D_C, DEFAULT_SLIT_WIDTH, "C"))
    mask_T: DoubleSlitMask = field(default_factory=lambda: DoubleSlitMask(0.0, DEFAULT_D_T, DEFAULT_SLIT_WIDTH, "T"))
    detector_aperture: float = DEFAULT_DETECTOR_APERTURE
    x_C: float = 0.0
    x_T: float = 0.0
    scenario: str = "fig2"
    engine: str = "analytic"
    n_realizations: int = 20_000
    seed: int = 20160901
    workers: int = 1
    output_path: str = "results"
    source_points: int = DEFAULT_SOURCE_POINTS
    slit_points: int = DEFAULT_SLIT_POINTS
    scan: ScanGrid | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError("run.scenario", f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.engine not in ENGINES:
            raise ValidationError("run.engine", f"unknown engine {self.engine!r}; expected one of {ENGINES}")
        _check_int("run.realizations", self.n_realizations, 2)
        if self.engine != "analytic" and self.n_realizations < MIN_REALIZATIONS:
            raise ValidationError("run.realizations", f"Monte Carlo needs at least {MIN_REALIZATIONS} realizations")
        _check_int("run.seed", self.seed, 0)
        if self.seed >= 2**64:
            raise ValidationError("run.seed", "must fit in 64 bits")
        _check_int("run.workers", self.workers, 1)
        _check_int("run.source_points", self.source_points, 128)
        _check_int("run.slit_points", self.slit_points, 1)
        if self.mask_C.slit_width > 0 and self.slit_points < 8:
            raise ValidationError("run.slit_points", "finite slits need at least 8 points each")
        if not (self.detector_aperture >= 0.0):
            raise ValidationError("detector.aperture", "must be >= 0")
        if self.scenario == "custom" and self.scan is None:
            raise ValidationError("scan.axis", "the custom scenario needs a [scan] section")
        if self.scenario != "custom" and self.scan is not None:
            raise ValidationError("scan.axis", f"scenario {self.scenario!r} defines its own scans; remove [scan]")
        if self.mask_C.label != "C" or self.mask_T.label != "T":
            raise ValidationError("mask_C.label", "masks must be labelled C and T")

    @property
    def includes_montecarlo(self) -> bool:
        return self.engine in ("montecarlo", "both")


def _check_int(name, value, minimum):
    if isinstance(value, bool) or int(value) != value:
        raise ValidationError(name, f"must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(name, f"must be >= {minimum}, got {value!r}")


# section -> key -> (constructor argument, expected python type)
_SCHEMA = {
    "setup": {
        "wavelength": float,
        "z": float,
        "focal_length": float,
        "coherence_length": float,
        "source_shape": str,
    },
    "mask_C": {"center": float, "separation": float, "slit_width": float},
    "mask_T": {"center": float, "separation": float, "slit_width": float},
    "detector": {"aperture": float, "x_C": float, "x_T": float},
    "run": {
        "scenario": str,
        "engine": str,
        "realizations": int,
        "seed": int,
        "workers": int,
        "output": str,
        "source_points": int,
        "slit_points": int,
    },
    "scan": {"axis": str, "start": float, "stop": float, "n_points": int},
}


def _line_of(text: str, section: str, key: str) -> int | None:
    """Best-effort line number of ``key`` for error messages."""
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([^\]]+?)\s*\]", line)
        if m:
            current = m.group(1)
            continue
        if "=" not in line:
            continue
        k = line.split("=", 1)[0].strip()
        if (current == section and k == key) or (current is None and k == f"{section}.{key}"):
            return i
    return None


def _typed(text, section, key, value, kind):
    name = f"{section}.{key}"
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigParseError(f"{name} must be a number (meters)", _line_of(text, section, key))
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigParseError(f"{name} must be an integer", _line_of(text, section, key))
        return value
    if not isinstance(value, str):
        raise ConfigParseError(f"{name} must be a quoted string", _line_of(text, section, key))
    return value


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate config text; raises ConfigParseError or ValidationError."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigParseError(str(exc), int(m.group(1)) if m else None) from None

    values: dict[str, dict] = {}
    for section, body in data.items():
        if section not in _SCHEMA:
            raise ConfigParseError(f"unknown section or key {section!r}", _line_of(text, section, "") or _section_line(text, section))
        if not isinstance(body, dict):
            raise ConfigParseError(f"{section!r} must be a section", _section_line(text, section))
        for key, value in body.items():
            if key not in _SCHEMA[section]:
                raise ConfigParseError(f"unknown key {section}.{key}", _line_of(text, section, key))
            if isinstance(value, dict):
                raise ConfigParseError(f"{section}.{key} must be a scalar", _line_of(text, section, key))
            values.setdefault(section, {})[key] = _typed(text, section, key, value, _SCHEMA[section][key])

    s = values.get("setup", {})
    setup = OpticalSetup(
        wavelength=s.get("wavelength", DEFAULT_WAVELENGTH),
        z_source_to_mask=s.get("z", DEFAULT_Z),
        focal_length=s.get("focal_length", DEFAULT_FOCAL_LENGTH),
        source=SourceProfile(s.get("source_shape", DEFAULT_SOURCE_SHAPE), s.get("coherence_length", DEFAULT_COHERENCE_LENGTH)),
    )
    masks = {}
    for label, d in (("C", DEFAULT_D_C), ("T", DEFAULT_D_T)):
        m = values.get(f"mask_{label}", {})
        masks[label] = DoubleSlitMask(m.get("center", 0.0), m.get("separation", d), m.get("slit_width", DEFAULT_SLIT_WIDTH), label)
    det = values.get("detector", {})
    run = values.get("run", {})
    scan = None
    if "scan" in values:
        sc = values["scan"]
        missing = [k for k in _SCHEMA["scan"] if k not in sc]
        if missing:
            raise ValidationError(f"scan.{missing[0]}", "required in a [scan] section")
        scan = ScanGrid(sc["axis"], sc["start"], sc["stop"], sc["n_points"])
    defaults = ScenarioConfig.__dataclass_fields__
    return ScenarioConfig(
        setup=setup,
        mask_C=masks["C"],
        mask_T=masks["T"],
        detector_aperture=det.get("aperture", DEFAULT_DETECTOR_APERTURE),
        x_C=det.get("x_C", 0.0),
        x_T=det.get("x_T", 0.0),
        scenario=run.get("scenario", defaults["scenario"].default),
        engine=run.get("engine", defaults["engine"].default),
        n_realizations=run.get("realizations", defaults["n_realizations"].default),
        seed=run.get("seed", defaults["seed"].default),
        workers=run.get("workers", defaults["workers"].default),
        output_path=run.get("output", defaults["output_path"].default),
        source_points=run.get("source_points", DEFAULT_SOURCE_POINTS),
        slit_points=run.get("slit_points", DEFAULT_SLIT_POINTS),
        scan=scan,
    )


def _section_line(text: str, section: str) -> int | None:
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith(f"[{section}]") or line.startswith(f"{section}."):
            return i
    return None


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: ScenarioConfig) -> str:
    """Render a config in the parseable format; ``parse_config`` inverts it."""
    sections = {
        "setup": {
            "wavelength": cfg.setup.wavelength,
            "z": cfg.setup.z_source_to_mask,
            "focal_length": cfg.setup.focal_length,
            "coherence_length": cfg.setup.source.coherence_length,
            "source_shape": cfg.setup.source.shape,
        },
        "mask_C": {"center": cfg.mask_C.center, "separation": cfg.mask_C.separation, "slit_width": cfg.mask_C.slit_width},
        "mask_T": {"center": cfg.mask_T.center, "separation": cfg.mask_T.separation, "slit_width": cfg.mask_T.slit_width},
        "detector": {"aperture": cfg.detector_aperture, "x_C": cfg.x_C, "x_T": cfg.x_T},
        "run": {
            "scenario": cfg.scenario,
            "engine": cfg.engine,
            "realizations": cfg.n_realizations,
            "seed": cfg.seed,
            "workers": cfg.workers,
            "output": cfg.output_path,
            "source_points": cfg.source_points,
            "slit_points": cfg.slit_points,
        },
    }
    if cfg.scan is not None:
        sections["scan"] = {"axis": cfg.scan.axis, "start": cfg.scan.start, "stop": cfg.scan.stop, "n_points": cfg.scan.n_points}
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, value in body.items():
            if isinstance(value, str):
                rendered = _toml_string(value)
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(int(value))
            lines.append(f"{key} = {rendered}")
        lines.append("")
    return "\n".join(lines)


def _toml_string(value: str) -> str:
    """Quote ``value`` as a TOML basic string (escapes controls, keeps unicode)."""
    out = []
    for ch in value:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy with CLI-style overrides; ``None`` values are ignored."""
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
