"""Config-driven orchestration: parameter points x tiers -> CSV/JSON artifacts."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import fockspace as fs
from .config import ScenarioConfig, load_config
from .errors import GridMismatchError, SimulationError, ValidationError
from .hamiltonians import Tier, dirac_mapping, hamiltonian_for
from .propagator import ObservableSeries, Observables, TimeGrid, evolve_eigen, evolve_lindblad, evolve_unitary

log = logging.getLogger(__name__)

WORKERS_ENV = "SIM_WORKERS"
MANIFEST = "manifest.json"


def _initial_state(cfg: ScenarioConfig, space: fs.HilbertSpec) -> np.ndarray:
    modes = [fs.coherent_state(b, n) for b, n in zip(cfg.modes, space.trunc)]
    return fs.product_state(fs.qubit_state(cfg.qubit), *modes)


def _full_dt(cfg: ScenarioConfig, model) -> float:
    period = 2 * np.pi / model.omega_sb
    return cfg.grid.dt if cfg.grid.dt is not None else period / cfg.grid.steps_per_period


def _simulate(cfg: ScenarioConfig, model, want_states: bool, dt_scale: float = 1.0):
    """Series (and sampled states when asked) for one model."""
    space = model.space
    psi0 = _initial_state(cfg, space)
    obs = Observables(space)
    bound = cfg.analysis.leak_bound
    kappa = [d.kappa for d in model.drives]
    if model.tier is Tier.FULL:
        grid = TimeGrid.sampled(cfg.grid.t1_full, cfg.grid.sample, _full_dt(cfg, model) * dt_scale)
    else:
        grid = TimeGrid(cfg.grid.t1, cfg.grid.sample)
    h = hamiltonian_for(model)
    if any(kappa):
        if space.n_modes != 1:
            raise ValidationError("[physics] kappa_mhz: cavity damping is supported for one mode only")
        if model.tier is not Tier.FULL:
            grid = TimeGrid.sampled(cfg.grid.t1, cfg.grid.sample, _full_dt(cfg, model) * dt_scale)
        series, _ = evolve_lindblad(fs.density_matrix(psi0), h, kappa[0], 1, grid, space, obs)
        return series, None
    if model.tier is Tier.FULL:
        out = evolve_unitary(psi0, h, grid, obs, leak_bound=bound, return_states=want_states)
        return out[0], (out[2] if want_states else None)
    if want_states:
        return evolve_eigen(psi0, h, grid.record_times(), obs, leak_bound=bound, return_states=True)
    return evolve_eigen(psi0, h, grid.record_times(), obs, leak_bound=bound), None


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _marginal_frames(path: Path, times, states, space, every: float) -> float:
    """Write long-format (t_us, x, density) frames; returns the worst mass error."""
    stride = max(1, int(round(every / (times[1] - times[0])))) if len(times) > 1 else 1
    worst = 0.0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t_us,x,density\n")
        for i in range(0, len(times), stride):
            m = an.quadrature_marginal(states[i], 1, space)
            worst = max(worst, abs(m.mass - 1))
            for x, d in zip(m.grid, m.density / m.mass):
                fh.write(f"{times[i]:.17g},{x:.17g},{d:.17g}\n")
    return worst


def run_one(cfg: ScenarioConfig, index: int, tier: str) -> dict:
    """Simulate one (point, tier) pair and write its files into ``cfg.out_dir``."""
    point = cfg.points[index]
    tier = Tier(tier)
    model = point.model.with_tier(tier)
    run_id = f"{point.label}_{tier.value}"
    a = cfg.analysis
    want_states = a.transmission or a.marginal_every is not None
    t_start = time.perf_counter()
    try:
        series, states = _simulate(cfg, model, want_states)
        out = cfg.out_dir
        files = [f"{run_id}.csv"]
        series.to_csv(out / files[0])
        diag = {
            "norm_drift": float(series.meta.get("norm_drift", abs(series["norm"][-1] - 1))),
            "max_leak": float(np.max(series["leak"])),
            "dt": series.meta.get("dt"),
            "method": series.meta.get("method"),
        }
        if a.dt_halving and tier is Tier.FULL:
            fine, _ = _simulate(cfg, model, False, dt_scale=0.5)
            diag["dt_halving"] = {c: float(np.max(np.abs(fine[c] - series[c]))) for c in series.names}
        if a.spectrum:
            spec = an.fft_spectrum(series.times, series[a.spectrum], window=a.window)
            spec.to_csv(out / f"{run_id}_spectrum.csv")
            peaks = an.find_peaks(spec, a.min_prominence)
            info = {"column": a.spectrum, "df_mhz": spec.df, "peaks": [{"freq_mhz": f, "amplitude": v} for f, v in peaks]}
            if model.scenario.family == "magnetic":
                info["predicted_mhz"] = an.landau_levels_predicted(a.n_levels, model)
            _write_json(out / f"{run_id}_peaks.json", info)
            files += [f"{run_id}_spectrum.csv", f"{run_id}_peaks.json"]
        if states is not None and a.marginal_every is not None:
            diag["marginal_mass_error"] = _marginal_frames(
                out / f"{run_id}_marginal.csv", series.times, states, model.space, a.marginal_every
            )
            files.append(f"{run_id}_marginal.csv")
        if states is not None and a.transmission:
            tr = an.transmission_probability(states[-1], model, a.p0)
            k = dirac_mapping(model)
            _write_json(out / f"{run_id}_transmission.json", {
                "probability": tr.probability,
                "x_turn": tr.x_turn,
                "separated": tr.separated,
                "overlap": tr.overlap,
                "lz_probability": an.lz_probability(k),
                "t_us": float(series.times[-1]),
            })
            files.append(f"{run_id}_transmission.json")
    except SimulationError as e:
        raise type(e)(f"run {run_id}: {e}") from None
    return {"run": run_id, "point": point.label, "tier": tier.value, "files": files,
            "wall_s": time.perf_counter() - t_start, "diagnostics": diag}


def _run_job(job):
    return run_one(*job)


def _aligned(a: ObservableSeries, b: ObservableSeries):
    """Both series cut to their common prefix; grid mismatch if the prefix differs."""
    n = min(a.times.size, b.times.size)
    if n == 0 or np.max(np.abs(a.times[:n] - b.times[:n])) > 1e-9:
        raise GridMismatchError("series are sampled on different time grids")
    return tuple(ObservableSeries(s.times[:n], {k: v[:n] for k, v in s.columns.items()}) for s in (a, b))


def _deviations(cfg: ScenarioConfig) -> dict:
    out = {}
    pairs = [("ideal", "full"), ("magnus", "full"), ("ideal", "magnus")]
    tiers = {t.value for t in cfg.tiers}
    for p in cfg.points:
        entry = {}
        for x, y in pairs:
            if x in tiers and y in tiers:
                sx = ObservableSeries.from_csv(cfg.out_dir / f"{p.label}_{x}.csv")
                sy = ObservableSeries.from_csv(cfg.out_dir / f"{p.label}_{y}.csv")
                entry[f"{x}_vs_{y}"] = an.tier_deviation(*_aligned(sx, sy))
        if entry:
            out[p.label] = entry
    return out


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def worker_count(cfg: ScenarioConfig) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValidationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValidationError(f"{WORKERS_ENV} must be >= 1")
        return n
    return cfg.workers


def run_config(cfg: ScenarioConfig) -> Path:
    """Execute every (point, tier) of a parsed config; the manifest is written last."""
    if not cfg.points or not cfg.tiers:
        raise ValidationError("no parameter points or tiers to run")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    stale = out / MANIFEST
    if stale.exists():
        stale.unlink()
    jobs = [(cfg, p.index, t.value) for p in cfg.points for t in cfg.tiers]
    workers = min(worker_count(cfg), len(jobs))
    t0 = time.perf_counter()
    if workers == 1:
        results = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    files = [f for r in results for f in r["files"]]
    dev = _deviations(cfg)
    if dev:
        _write_json(out / "deviation.json", dev)
        files.append("deviation.json")
    manifest = {
        "name": cfg.name,
        "version": __version__,
        "config": cfg.text,
        "config_parsed": cfg.echo,
        "points": {p.label: p.values for p in cfg.points},
        "tiers": [t.value for t in cfg.tiers],
        "workers": workers,
        "runs": [{k: r[k] for k in ("run", "point", "tier", "wall_s", "diagnostics")} for r in results],
        "wall_s_total": time.perf_counter() - t0,
        "checksums": {f: sha256(out / f) for f in sorted(files)},
    }
    _write_json(out / MANIFEST, manifest)
    log.info("wrote %d files to %s", len(files) + 1, out)
    return out


def run(config_path) -> Path:
    """Parse ``config_path`` and run it; returns the artifact directory."""
    return run_config(load_config(config_path))


def verify_manifest(directory) -> dict[str, bool]:
    d = Path(directory)
    man = json.loads((d / MANIFEST).read_text(encoding="utf-8"))
    return {f: (d / f).exists() and sha256(d / f) == h for f, h in man["checksums"].items()}


# -- compare ------------------------------------------------------------------------


def _series_index(directory: Path) -> dict[str, dict[str, Path]]:
    if not (directory / MANIFEST).exists():
        raise ValidationError(f"{directory} has no {MANIFEST}; not a run directory")
    man = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
    idx: dict[str, dict[str, Path]] = {}
    for r in man["runs"]:
        idx.setdefault(r["point"], {})[r["tier"]] = directory / f"{r['run']}.csv"
    return idx


def compare(dir_a, dir_b) -> dict:
    """tier_deviation for every matching run of two artifact directories.

    Runs are matched by parameter point.  When both directories hold the
    same tier it is compared with itself; when each holds exactly one tier
    per point those two are compared (e.g. an ideal-only run against a
    full-only run).
    """
    a, b = Path(dir_a), Path(dir_b)
    ia, ib = _series_index(a), _series_index(b)
    if set(ia) != set(ib):
        raise ValidationError(f"run identities differ: {sorted(ia)} vs {sorted(ib)}")
    report = {}
    for point in sorted(ia):
        ta, tb = ia[point], ib[point]
        common = sorted(set(ta) & set(tb))
        if common:
            pairs = [(t, t) for t in common]
        elif len(ta) == 1 and len(tb) == 1:
            pairs = [(next(iter(ta)), next(iter(tb)))]
        else:
            raise ValidationError(f"point {point}: no matching tiers ({sorted(ta)} vs {sorted(tb)})")
        for x, y in pairs:
            sa = ObservableSeries.from_csv(ta[x])
            sb = ObservableSeries.from_csv(tb[y])
            report[f"{point}:{x}_vs_{y}"] = an.tier_deviation(sa, sb)
    return report


def format_report(report: dict) -> str:
    lines = []
    for key, cols in report.items():
        lines.append(key)
        for c, v in cols.items():
            lines.append(f"  {c:>7}  rms {v['rms']:.6g}  max {v['max']:.6g}")
    return "\n".join(lines)

