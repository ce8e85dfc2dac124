"""Drive waveforms in the cavity rotating frame and the classical cavity response.

Units: time in microseconds, every frequency and rate in rad/us.  The
sideband phase convention is e^{-/+ i (Omega_SB t + delta)} for the red/blue
tones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DriveMisuseError, ValidationError


class Scenario(str, Enum):
    FREE1D = "free1d"
    FREE2D = "free2d"
    MAGNETIC1D = "magnetic1d"
    MAGNETIC2D = "magnetic2d"
    ELECTRO1D = "electro1d"

    @property
    def n_modes(self) -> int:
        return 2 if self.value.endswith("2d") else 1

    @property
    def family(self) -> str:
        return self.value[:-2]


@dataclass(frozen=True)
class SidebandDrive:
    """Double-sideband drive on one cavity mode.

    alpha: sideband amplitude (dimensionless); delta_alpha: extra amplitude
    on the blue tone; omega_sb: sideband detuning; delta: relative phase;
    gamma: resonant-drive amplitude; kappa: cavity damping rate.
    """

    alpha: float
    omega_sb: float
    delta: float = 0.0
    delta_alpha: float = 0.0
    gamma: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not self.omega_sb > 0:
            raise ValidationError(f"omega_sb must be positive, got {self.omega_sb}")
        if self.kappa < 0:
            raise ValidationError(f"kappa must be non-negative, got {self.kappa}")
        if self.kappa > 0 and not self.kappa < self.omega_sb / 100:
            raise ValidationError("kappa must satisfy kappa < omega_sb / 100")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega_sb


@dataclass(frozen=True)
class RabiDrive:
    omega_r: float
    phase: float = 0.0
    omega_d: float = 0.0

    def __post_init__(self):
        if self.omega_r < 0:
            raise ValidationError(f"omega_r must be non-negative, got {self.omega_r}")


def _envelope(t, d: SidebandDrive):
    # kappa pre-compensation: amplitude sqrt(W^2 + k^2/4), phase lag arctan(k / 2W)
    amp = math.sqrt(d.omega_sb**2 + d.kappa**2 / 4)
    lag = math.atan(d.kappa / (2 * d.omega_sb))
    return amp, d.omega_sb * np.asarray(t, dtype=float) + d.delta - lag


def cavity_drive(t, d: SidebandDrive):
    """General sideband + resonant drive, eps(t) in the cavity frame."""
    amp, phase = _envelope(t, d)
    eps = amp * (-0.5 * d.delta_alpha * np.exp(1j * phase) - 1j * d.alpha * np.sin(phase)) + 1j * d.gamma
    return eps if np.ndim(eps) else complex(eps)


def symmetric_eps(t, d: SidebandDrive):
    if d.delta_alpha != 0 or d.gamma != 0:
        raise DriveMisuseError("symmetric_eps needs delta_alpha = 0 and gamma = 0")
    return cavity_drive(t, d)


def asymmetric_eps(t, d: SidebandDrive):
    if d.gamma != 0:
        raise DriveMisuseError("asymmetric_eps needs gamma = 0; use electro_eps")
    return cavity_drive(t, d)


def electro_eps(t, d: SidebandDrive):
    if d.delta_alpha != 0:
        raise DriveMisuseError("electro_eps uses a symmetric sideband pair")
    return cavity_drive(t, d)


def classical_displacement(t, d: SidebandDrive):
    """Steady-state cavity amplitude driven by the sideband tones.

    alpha cos(theta) + (delta_alpha / 2) e^{i theta} with theta = Omega_SB t + delta.
    It solves d(alpha)/dt = -i eps_sb - (kappa / 2) alpha; the kappa
    compensation built into :func:`cavity_drive` keeps this form for kappa > 0.
    The resonant gamma drive is not included: it stays in the Hamiltonian.
    """
    theta = d.omega_sb * np.asarray(t, dtype=float) + d.delta
    a = d.alpha * np.cos(theta) + 0.5 * d.delta_alpha * np.exp(1j * theta)
    return a if np.ndim(a) else complex(a)


def resonant_rabi_condition(scenario, chi, drives) -> float:
    """Qubit detuning omega_q - omega_d that cancels the static sigma_z shift.

    -sum_j chi_j (alpha_j^2/2 + alpha_j dalpha_j/2 + dalpha_j^2/4); the free
    and electrostatic cases have dalpha = 0.
    """
    try:
        scenario = Scenario(scenario)
    except ValueError:
        raise ValidationError(f"unknown scenario {scenario!r}") from None
    total = 0.0
    for c, d in zip(chi, drives, strict=True):
        da = d.delta_alpha if scenario.family == "magnetic" else 0.0
        total += c * (d.alpha**2 / 2 + d.alpha * da / 2 + da**2 / 4)
    return -total
