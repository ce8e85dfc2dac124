"""Post-processing: spectra, quadrature marginals, transmission and tier deviations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from . import fockspace as fs
from .errors import AnalysisError, GridCoverageError, GridMismatchError
from .hamiltonians import MappedConstants, ModelSpec, dirac_mapping
from .propagator import ObservableSeries

TWO_PI = 2 * math.pi


@dataclass
class Spectrum:
    """One-sided magnitude spectrum; ``freqs`` in MHz, ``amps = dt |FFT|``."""

    freqs: np.ndarray
    amps: np.ndarray
    n_samples: int
    sample_dt: float

    @property
    def df(self) -> float:
        return 1.0 / (self.n_samples * self.sample_dt)

    def to_csv(self, path) -> None:
        _write_csv(path, ["freq_mhz", "amplitude"], [self.freqs, self.amps])


@dataclass
class MarginalDensity:
    grid: np.ndarray
    density: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def mass(self) -> float:
        return float(np.sum(self.density) * self.dx)

    def mean(self) -> float:
        return float(np.sum(self.grid * self.density) * self.dx / self.mass)

    def variance(self) -> float:
        mu = self.mean()
        return float(np.sum((self.grid - mu) ** 2 * self.density) * self.dx / self.mass)

    def mass_above(self, x: float) -> float:
        return float(np.sum(self.density[self.grid > x]) * self.dx)

    def to_csv(self, path) -> None:
        _write_csv(path, ["x", "density"], [self.grid, self.density])


def _write_csv(path, header, cols) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{v:.17g}" for v in row])


# -- spectra -------------------------------------------------------------------


def fft_spectrum(times, values, window: str = "hann", detrend: bool = True) -> Spectrum:
    """Magnitude spectrum of a uniformly sampled real series.

    ``times`` in us, so frequencies come out in MHz.  ``detrend`` removes the
    mean before windowing.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if t.size != x.size or t.size < 4:
        raise AnalysisError("spectrum needs at least 4 matching samples")
    steps = np.diff(t)
    dt = float(steps.mean())
    if np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(t[-1])):
        raise AnalysisError("fft_spectrum needs uniformly spaced timestamps")
    if detrend:
        x = x - x.mean()
    if window == "hann":
        x = x * np.hanning(x.size)
    elif window not in (None, "none"):
        raise AnalysisError(f"unknown window {window!r}")
    amps = dt * np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(x.size, dt)
    return Spectrum(freqs, amps, x.size, dt)


def find_peaks(s: Spectrum, min_prominence: float = 0.02) -> list[tuple[float, float]]:
    """Peaks with prominence above ``min_prominence * max``, DC bin excluded.

    Frequencies are refined by a 3-point parabola through the log-free
    magnitudes around each local maximum.
    """
    amps = np.asarray(s.amps, dtype=float)
    if amps.size < 3:
        return []
    top = amps[1:].max()
    # ripple at roundoff level next to a large DC bin is not a peak
    if top <= 1e-9 * amps.max():
        return []
    idx, _ = _scipy_find_peaks(amps, prominence=min_prominence * top)
    out = []
    for i in idx:
        if i == 0 or i >= amps.size - 1:
            continue
        a, b, c = amps[i - 1], amps[i], amps[i + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        out.append((float(s.freqs[i] + shift * s.df), float(b - 0.25 * (a - c) * shift)))
    return out


def landau_levels_predicted(n_max: int, m: ModelSpec) -> list[float]:
    """Landau transition frequencies E_n^+ - E_n^- in MHz for n = 1..n_max.

    2 sqrt(2 n c^2 |eB| + (mc^2)^2), which for alpha_1 = -dalpha_1 equals
    2 sqrt((chi alpha/4)^2 n + (delta_omega/2)^2).
    """
    k = dirac_mapping(m)
    if m.scenario.family != "magnetic":
        raise AnalysisError("Landau levels need a magnetic scenario")
    return [2 * math.sqrt(2 * n * k.c_eff**2 * abs(k.eB) + k.mc2**2) / TWO_PI for n in range(1, n_max + 1)]


# -- quadrature marginals ------------------------------------------------------------


DEFAULT_GRID = np.linspace(-8.0, 8.0, 512)


def hermite_functions(n_max: int, q: np.ndarray) -> np.ndarray:
    """Normalised oscillator eigenfunctions psi_n(q), n < n_max, by recurrence."""
    q = np.asarray(q, dtype=float)
    out = np.zeros((n_max, q.size))
    out[0] = math.pi ** -0.25 * np.exp(-(q**2) / 2)
    if n_max > 1:
        out[1] = math.sqrt(2) * q * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = math.sqrt(2 / (n + 1)) * q * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quadrature_marginal(state, mode: int, space: fs.HilbertSpec, grid=None, min_mass: float = 0.999) -> MarginalDensity:
    """Probability density of X = i(d - d^dag)/2 for one mode.

    With b = i d, X = (b + b^dag)/2, so the amplitude of |n>_d in the X
    representation is i^n psi_n(sqrt(2) x) * 2^{1/4}.  Every other slot is
    traced out.
    """
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    k = space.slot_index(mode)
    N = space.trunc[k - 1]
    psi = np.moveaxis(np.asarray(state, dtype=complex).reshape(space.dims), k, -1).reshape(-1, N)
    basis = hermite_functions(N, math.sqrt(2) * grid) * (1j ** np.arange(N))[:, None] * 2**0.25
    amp = psi @ basis
    dens = MarginalDensity(grid, np.sum(np.abs(amp) ** 2, axis=0))
    if dens.mass < min_mass:
        raise GridCoverageError(f"marginal grid captures mass {dens.mass:.6f} < {min_mass}")
    return dens


# -- Klein analysis -----------------------------------------------------------------


@dataclass
class Transmission:
    probability: float
    x_turn: float
    separated: bool
    overlap: float

    def __float__(self) -> float:
        return self.probability


def turning_point(k: MappedConstants, p0: float) -> float:
    """Classical turning point E_kin / g of a packet with momentum p0."""
    if k.g == 0:
        raise AnalysisError("turning point needs a nonzero potential slope g")
    e_kin = math.sqrt((k.c_eff * p0) ** 2 + k.mc2**2) - abs(k.mc2)
    return e_kin / k.g


def transmission_probability(final, m: ModelSpec, p0: float, grid=None, window: float = 0.5, max_overlap: float = 0.02) -> Transmission:
    """Marginal mass of the final state past the classical turning point.

    The packets count as separated when less than ``max_overlap`` of the mass
    lies within ``window`` of the turning point; otherwise the result is
    flagged ``separated=False``.
    """
    if m.scenario.family != "electro":
        raise AnalysisError("transmission needs the electrostatic scenario")
    k = dirac_mapping(m)
    x_turn = turning_point(k, p0)
    dens = quadrature_marginal(final, 1, m.space, grid)
    sign = 1.0 if k.g > 0 else -1.0
    if sign > 0:
        p = dens.mass_above(x_turn)
    else:
        p = dens.mass - dens.mass_above(x_turn)
    near = np.abs(dens.grid - x_turn) <= window
    overlap = float(np.sum(dens.density[near]) * dens.dx)
    return Transmission(min(1.0, max(0.0, p / dens.mass)), x_turn, overlap < max_overlap, overlap)


def lz_probability(k: MappedConstants) -> float:
    """Landau-Zener tunnelling e^{-2 pi Gamma}, Gamma = (mc^2)^2 / (2 c |g|)."""
    if k.g == 0:
        raise AnalysisError("Landau-Zener probability needs g != 0")
    if k.c_eff == 0:
        raise AnalysisError("Landau-Zener probability needs c_eff != 0")
    gamma = k.mc2**2 / (2 * abs(k.c_eff) * abs(k.g))
    return math.exp(-TWO_PI * gamma)


# -- tier comparison ---------------------------------------------------------------------


def tier_deviation(a: ObservableSeries, b: ObservableSeries, columns=None) -> dict[str, dict[str, float]]:
    """Per-column RMS and max absolute differences on identical time grids."""
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times), initial=0.0) > 1e-9:
        raise GridMismatchError("series are sampled on different time grids")
    names = columns or [c for c in a.names if c in b.columns]
    out = {}
    for c in names:
        diff = np.abs(np.asarray(a[c]) - np.asarray(b[c]))
        out[c] = {"rms": float(np.sqrt(np.mean(diff**2))), "max": float(diff.max(initial=0.0))}
    return out
