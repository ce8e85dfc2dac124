"""Sectioned key-value scenario configuration and built-in presets.

Every frequency in a config file is an experiment value f/2pi in MHz.  They
are converted to rad/us exactly once, in :func:`parse_config`; nothing past
this module sees MHz.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import fockspace as fs
from .drives import Scenario, SidebandDrive
from .errors import ValidationError
from .hamiltonians import ModelSpec, Tier

TWO_PI = 2 * math.pi

# keys of [physics] that may be swept, with their per-mode flag
_PHYSICS_KEYS = {
    "chi_mhz": True,
    "alpha": True,
    "delta_alpha": True,
    "delta": True,
    "omega_sb_mhz": True,
    "gamma_mhz": True,
    "kappa_mhz": True,
    "delta_omega_mhz": False,
}


@dataclass(frozen=True)
class GridConfig:
    t1: float
    sample: float
    t1_full: float
    dt: float | None
    steps_per_period: int


@dataclass(frozen=True)
class AnalysisConfig:
    spectrum: str | None = None
    window: str = "hann"
    min_prominence: float = 0.05
    n_levels: int = 4
    transmission: bool = False
    p0: float = 1.0
    marginal_every: float | None = None
    leak_bound: float | None = 1e-6
    dt_halving: bool = False


@dataclass(frozen=True)
class RunPoint:
    """One parameter point; ``label`` names its output files."""

    index: int
    label: str
    values: dict
    model: ModelSpec


@dataclass
class ScenarioConfig:
    name: str
    scenario: Scenario
    tiers: tuple[Tier, ...]
    points: list[RunPoint]
    grid: GridConfig
    qubit: object
    modes: tuple
    analysis: AnalysisConfig
    out_dir: Path
    workers: int
    text: str = ""
    echo: dict = field(default_factory=dict)


def _err(section, key, msg) -> ValidationError:
    return ValidationError(f"[{section}] {key}: {msg}")


def _floats(section, key, raw) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise _err(section, key, f"expected number(s), got {raw!r}") from None


def _per_mode(section, key, raw, n) -> list[float]:
    vals = _floats(section, key, raw)
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise _err(section, key, f"expected 1 or {n} values, got {len(vals)}")
    return vals


def _positive(section, key, v, allow_zero=False) -> float:
    if not (v >= 0 if allow_zero else v > 0) or not math.isfinite(v):
        raise _err(section, key, f"must be {'non-negative' if allow_zero else 'positive'}, got {v}")
    return v


def _parse_qubit(raw: str):
    raw = raw.strip().lower()
    m = re.fullmatch(r"bloch\s*\(\s*([^,]+),\s*([^)]+)\)", raw)
    if m:
        try:
            return ("bloch", float(m.group(1)), float(m.group(2)))
        except ValueError:
            raise _err("initial", "qubit", f"bad bloch angles in {raw!r}") from None
    if raw in ("plus", "minus", "ground", "excited"):
        return raw
    raise _err("initial", "qubit", f"expected plus, minus, ground, excited or bloch(theta, phi), got {raw!r}")


def _parse_modes(raw: str, n: int) -> tuple:
    parts = [p.strip().lower() for p in raw.split(",")] if raw.strip() else ["vacuum"]
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise _err("initial", "modes", f"expected 1 or {n} descriptors, got {len(parts)}")
    out = []
    for p in parts:
        if p == "vacuum":
            out.append(0.0)
            continue
        m = re.fullmatch(r"coherent\s+(\S+)", p)
        if not m:
            raise _err("initial", "modes", f"expected 'vacuum' or 'coherent <beta>', got {p!r}")
        try:
            out.append(complex(m.group(1).replace("i", "j")))
        except ValueError:
            raise _err("initial", "modes", f"bad coherent amplitude {m.group(1)!r}") from None
    return tuple(out)


def _bool(section, key, raw) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise _err(section, key, f"expected a boolean, got {raw!r}")


def _build_model(scenario, tier, phys: dict, trunc) -> ModelSpec:
    n = scenario.n_modes
    drives = []
    for j in range(n):
        try:
            drives.append(
                SidebandDrive(
                    alpha=phys["alpha"][j],
                    omega_sb=TWO_PI * phys["omega_sb_mhz"][j],
                    delta=phys["delta"][j],
                    delta_alpha=phys["delta_alpha"][j],
                    gamma=TWO_PI * phys["gamma_mhz"][j],
                    kappa=TWO_PI * phys["kappa_mhz"][j],
                )
            )
        except ValidationError as e:
            raise ValidationError(f"[physics] mode {j + 1}: {e}") from None
    try:
        return ModelSpec(
            scenario=scenario,
            tier=tier,
            chi=tuple(TWO_PI * c for c in phys["chi_mhz"]),
            drives=tuple(drives),
            delta_omega=TWO_PI * phys["delta_omega_mhz"],
            space=fs.HilbertSpec(tuple(trunc)),
        )
    except ValidationError as e:
        raise ValidationError(f"[physics] {e}") from None


def parse_config(text: str, base_dir: Path | None = None) -> ScenarioConfig:
    """Parse and validate a scenario config; errors name the offending key."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ValidationError(f"config syntax: {e}") from None
    for sec in ("run", "physics", "hilbert", "grid"):
        if not cp.has_section(sec):
            raise ValidationError(f"missing section [{sec}]")

    run = cp["run"]
    try:
        scenario = Scenario(run.get("scenario", "").strip())
    except ValueError:
        raise _err("run", "scenario", f"unknown scenario {run.get('scenario')!r}; expected one of "
                   + ", ".join(s.value for s in Scenario)) from None
    tiers_raw = [t.strip() for t in run.get("tiers", "").split(",") if t.strip()]
    if not tiers_raw:
        raise _err("run", "tiers", "no tiers requested")
    try:
        tiers = tuple(dict.fromkeys(Tier(t) for t in tiers_raw))
    except ValueError:
        raise _err("run", "tiers", f"unknown tier in {tiers_raw}; expected ideal, magnus, full") from None
    try:
        workers = int(run.get("workers", "1"))
    except ValueError:
        raise _err("run", "workers", "expected an integer") from None
    if workers < 1:
        raise _err("run", "workers", "must be >= 1")
    name = run.get("name", scenario.value).strip()

    n = scenario.n_modes
    phys_sec = cp["physics"]
    unknown = set(phys_sec) - set(_PHYSICS_KEYS)
    if unknown:
        raise _err("physics", sorted(unknown)[0], "unknown key")
    defaults = {"chi_mhz": None, "alpha": None, "delta_alpha": "0", "delta": "0", "omega_sb_mhz": None,
                "gamma_mhz": "0", "kappa_mhz": "0", "delta_omega_mhz": "0"}
    phys = {}
    for key, per_mode in _PHYSICS_KEYS.items():
        raw = phys_sec.get(key, defaults[key])
        if raw is None:
            raise _err("physics", key, "required")
        if per_mode:
            phys[key] = _per_mode("physics", key, raw, n)
        else:
            vals = _floats("physics", key, raw)
            if len(vals) != 1:
                raise _err("physics", key, "expected a single value (sweep it in [sweep])")
            phys[key] = vals[0]
    for key in ("chi_mhz", "omega_sb_mhz"):
        for v in phys[key]:
            _positive("physics", key, v)
    for v in phys["kappa_mhz"]:
        _positive("physics", "kappa_mhz", v, allow_zero=True)

    sweep_key, sweep_vals = None, [None]
    if cp.has_section("sweep"):
        sw = cp["sweep"]
        sweep_key = sw.get("parameter", "").strip()
        if sweep_key not in _PHYSICS_KEYS:
            raise _err("sweep", "parameter", f"expected one of {', '.join(_PHYSICS_KEYS)}, got {sweep_key!r}")
        sweep_vals = _floats("sweep", "values", sw.get("values", ""))
        if not sweep_vals:
            raise _err("sweep", "values", "empty sweep: no parameter points to run")

    trunc = _floats("hilbert", "trunc", cp["hilbert"].get("trunc", ""))
    if len(trunc) == 1:
        trunc = trunc * n
    if len(trunc) != n or any(t != int(t) or t < 2 for t in trunc):
        raise _err("hilbert", "trunc", f"expected {n} integer truncation(s) >= 2")
    trunc = [int(t) for t in trunc]

    g = cp["grid"]
    t1 = _positive("grid", "t1_us", _floats("grid", "t1_us", g.get("t1_us", "nan"))[0])
    sample = _positive("grid", "sample_us", _floats("grid", "sample_us", g.get("sample_us", "nan"))[0])
    t1_full = _positive("grid", "t1_full_us", float(g.get("t1_full_us", str(t1))))
    dt = None
    if "dt_ns" in g:
        dt = _positive("grid", "dt_ns", _floats("grid", "dt_ns", g["dt_ns"])[0]) * 1e-3
    try:
        spp = int(g.get("steps_per_period", "40"))
    except ValueError:
        raise _err("grid", "steps_per_period", "expected an integer") from None
    if spp < 20:
        raise _err("grid", "steps_per_period", "must be >= 20")
    if sample > min(t1, t1_full):
        raise _err("grid", "sample_us", "sampling interval exceeds the run length")
    grid = GridConfig(t1, sample, t1_full, dt, spp)

    init = cp["initial"] if cp.has_section("initial") else {}
    qubit = _parse_qubit(init.get("qubit", "plus"))
    modes = _parse_modes(init.get("modes", "vacuum"), n)

    a = cp["analysis"] if cp.has_section("analysis") else {}
    spectrum = a.get("spectrum", "none").strip()
    if spectrum.lower() == "none":
        spectrum = None
    elif spectrum not in ("sx", "sy", "sz") and not re.fullmatch(r"[XP][12]", spectrum):
        raise _err("analysis", "spectrum", f"unknown column {spectrum!r}")
    window = a.get("window", "hann").strip().lower()
    if window not in ("hann", "none"):
        raise _err("analysis", "window", f"expected hann or none, got {window!r}")
    leak_raw = a.get("leak_bound", "1e-6").strip().lower()
    marg = a.get("marginal_every_us", "").strip()
    try:
        analysis = AnalysisConfig(
            spectrum=spectrum,
            window=window,
            min_prominence=float(a.get("min_prominence", "0.05")),
            n_levels=int(a.get("n_levels", "4")),
            transmission=_bool("analysis", "transmission", a.get("transmission", "false")),
            p0=float(a.get("p0", "1")),
            marginal_every=float(marg) if marg else None,
            leak_bound=None if leak_raw == "none" else float(leak_raw),
            dt_halving=_bool("analysis", "dt_halving", a.get("dt_halving", "false")),
        )
    except ValueError as e:
        raise ValidationError(f"[analysis] {e}") from None
    if analysis.transmission and scenario.family != "electro":
        raise _err("analysis", "transmission", "only defined for the electro1d scenario")

    out = Path(cp["output"].get("dir", f"out/{name}") if cp.has_section("output") else f"out/{name}")
    if base_dir is not None and not out.is_absolute():
        out = Path(base_dir) / out

    points = []
    for i, v in enumerate(sweep_vals):
        p = {k: (list(val) if isinstance(val, list) else val) for k, val in phys.items()}
        values = {}
        if sweep_key is not None:
            if _PHYSICS_KEYS[sweep_key]:
                # swept per-mode keys act on mode 1 only
                p[sweep_key][0] = v
            else:
                p[sweep_key] = v
            values[sweep_key] = v
        model = _build_model(scenario, tiers[0], p, trunc)
        points.append(RunPoint(i, f"p{i}", values, model))
    if not points:
        raise ValidationError("no parameter points to run")

    echo = {s: dict(cp[s]) for s in cp.sections()}
    return ScenarioConfig(name, scenario, tiers, points, grid, qubit, modes, analysis, out, workers, text, echo)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e}") from None
    return parse_config(text, base_dir=path.parent)


# -- presets ------------------------------------------------------------------

_ZB_1D = """\
[run]
name = {name}
scenario = free1d
tiers = ideal, full
workers = 1

[physics]
chi_mhz = 0.1
alpha = 1
omega_sb_mhz = {omega}
delta_omega_mhz = 0

[sweep]
# black, purple, green traces
parameter = delta_omega_mhz
values = 0, 0.05, 0.25

[hilbert]
trunc = 50

[grid]
t1_us = 20
sample_us = 0.05
steps_per_period = 40

[initial]
qubit = plus
modes = vacuum

[output]
dir = out/{name}
"""

_ZB_2D = """\
[run]
name = zitterbewegung-2d
scenario = free2d
tiers = ideal, full
workers = 1

[physics]
chi_mhz = 0.1
alpha = 1
# mode 2 couples through sigma_y
delta = 0, 1.5707963267948966
omega_sb_mhz = 40
delta_omega_mhz = 0

[sweep]
parameter = delta_omega_mhz
values = 0, 0.05, 0.25

[hilbert]
trunc = 34, 34

[grid]
t1_us = 20
sample_us = 0.05
steps_per_period = 40

[initial]
qubit = plus
modes = vacuum, vacuum

[output]
dir = out/zitterbewegung-2d
"""

_LANDAU_SPECTRUM = """\
[run]
name = landau-spectrum
scenario = magnetic2d
tiers = ideal, full
workers = 1

[physics]
chi_mhz = 0.1
alpha = 1
delta_alpha = -1, 0
delta = 0, 1.5707963267948966
omega_sb_mhz = 40
delta_omega_mhz = 0

[hilbert]
trunc = 20, 20

[grid]
t1_us = 5000
# the full-tier record is shorter: it resolves every drive period
t1_full_us = 1000
sample_us = 1
steps_per_period = 40

[initial]
qubit = plus
modes = vacuum, vacuum

[analysis]
spectrum = sz
window = hann
min_prominence = 0.05
n_levels = 4
# mode 2 is free and its wavepacket reaches the N = 20 edge within ~30 us;
# the level spacing does not depend on its momentum, so the guard is off here
# and max_leak is still reported in the manifest
leak_bound = none

[output]
dir = out/landau-spectrum
"""

_LANDAU_TRAJECTORY = """\
[run]
name = landau-trajectory
scenario = magnetic2d
tiers = ideal, full
workers = 1

[physics]
chi_mhz = 0.1
alpha = 1
delta_alpha = 0, 0
delta = 0, 1.5707963267948966
omega_sb_mhz = 40
delta_omega_mhz = 0.05

[sweep]
# cyan, purple, pink, lime traces
parameter = delta_alpha
values = 0.5, 0, -0.5, -1

[hilbert]
trunc = 42, 42

[grid]
t1_us = 20
sample_us = 0.05
steps_per_period = 40

[initial]
qubit = plus
modes = vacuum, vacuum

[output]
dir = out/landau-trajectory
"""

_KLEIN = """\
[run]
name = klein
scenario = electro1d
tiers = ideal
workers = 1

[physics]
# chi is not stated for this figure; 0.1 MHz as elsewhere
chi_mhz = 0.1
alpha = 1
omega_sb_mhz = 40
# potential slope g/2pi = 0.1 MHz, realised by gamma = -g/2
gamma_mhz = -0.05
delta_omega_mhz = 0

[sweep]
parameter = delta_omega_mhz
values = 0, 0.05, 0.15

[hilbert]
trunc = 100

[grid]
t1_us = 20
sample_us = 0.05
steps_per_period = 40

[initial]
qubit = plus
modes = coherent 0.5

[analysis]
transmission = true
p0 = 1
marginal_every_us = 0.5

[output]
dir = out/klein
"""

_RWA = """\
[run]
name = rwa-scaling
scenario = free1d
tiers = ideal, magnus, full
workers = 1

[physics]
chi_mhz = 0.1
alpha = 1
omega_sb_mhz = 40
delta_omega_mhz = 0.05

[sweep]
parameter = omega_sb_mhz
values = 20, 40, 100

[hilbert]
trunc = 32

[grid]
t1_us = 20
sample_us = 0.05
steps_per_period = 40

[initial]
qubit = plus
modes = vacuum

[output]
dir = out/rwa-scaling
"""

PRESETS = {
    "zitterbewegung-1d": _ZB_1D.format(name="zitterbewegung-1d", omega=40),
    "zitterbewegung-1d-100mhz": _ZB_1D.format(name="zitterbewegung-1d-100mhz", omega=100),
    "zitterbewegung-2d": _ZB_2D,
    "landau-spectrum": _LANDAU_SPECTRUM,
    "landau-trajectory": _LANDAU_TRAJECTORY,
    "klein": _KLEIN,
    "rwa-scaling": _RWA,
}


def preset(name: str) -> str:
    """Config text for a named preset."""
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
