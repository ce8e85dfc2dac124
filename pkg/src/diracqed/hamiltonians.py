"""Ideal and full Hamiltonians of the driven qubit-cavity system.

Frames, from lab to simulation:

* ``lab_frame_h2``: cavity and Rabi-drive rotating frames, explicit drive term.
* ``displaced_frame_h3``: cavity displaced by the classical response, so the
  drive term is gone.
* ``full_hamiltonian``: Hadamard plus sideband rotating frame, before the RWA.
  All MHz-scale oscillations are kept.
* ``ideal_hamiltonian``: after the RWA, the mapped Dirac Hamiltonian.

Every Hamiltonian is in rad/us.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import fockspace as fs
from .drives import RabiDrive, Scenario, SidebandDrive, classical_displacement, resonant_rabi_condition
from .errors import SingularMappingError, ValidationError


class Tier(str, Enum):
    IDEAL = "ideal"
    FULL = "full"
    MAGNUS = "magnus"


@dataclass(frozen=True)
class ModelSpec:
    """Scenario, fidelity tier and physical parameters of one simulation.

    ``chi`` and ``drives`` are per mode.  ``delta_omega`` is the single
    qubit detuning Omega_R - Omega_SB; the mass term is delta_omega/2 sigma_z.
    """

    scenario: Scenario
    tier: Tier
    chi: tuple[float, ...]
    drives: tuple[SidebandDrive, ...]
    delta_omega: float
    space: fs.HilbertSpec

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "tier", Tier(self.tier))
        object.__setattr__(self, "chi", tuple(float(c) for c in self.chi))
        object.__setattr__(self, "drives", tuple(self.drives))
        n = self.scenario.n_modes
        if self.space.n_modes != n:
            raise ValidationError(f"scenario {self.scenario.value} needs {n} mode(s), space has {self.space.n_modes}")
        if len(self.chi) != n or len(self.drives) != n:
            raise ValidationError(f"scenario {self.scenario.value} needs {n} chi value(s) and drive(s)")
        family = self.scenario.family
        for j, d in enumerate(self.drives, start=1):
            if family != "magnetic" and d.delta_alpha != 0:
                raise ValidationError(f"mode {j}: delta_alpha is only allowed in magnetic scenarios")
            if family != "electro" and d.gamma != 0:
                raise ValidationError(f"mode {j}: gamma is only allowed in the electrostatic scenario")
        if self.tier is Tier.FULL:
            _shared_omega_sb(self)

    def with_tier(self, tier) -> "ModelSpec":
        return replace(self, tier=Tier(tier))

    @property
    def omega_sb(self) -> float:
        return max(d.omega_sb for d in self.drives)

    def rabi_drive(self) -> RabiDrive:
        """Rabi drive realising this model: Omega_R = Omega_SB + delta_omega."""
        detuning = resonant_rabi_condition(self.scenario, self.chi, self.drives)
        return RabiDrive(omega_r=_shared_omega_sb(self) + self.delta_omega, omega_d=-detuning)


def _shared_omega_sb(m: ModelSpec) -> float:
    freqs = {d.omega_sb for d in m.drives}
    if len(freqs) != 1:
        raise ValidationError("full-tier models need equal omega_sb on every mode (shared qubit frame)")
    return freqs.pop()


@dataclass(frozen=True)
class MappedConstants:
    c_eff: float
    mc2: float
    eB: float = 0.0
    g: float = 0.0


class TimeDependentHamiltonian:
    """H(t) = static + sum_k f_k(t) B_k.

    Builders add both members of every Hermitian-conjugate pair, so the sum
    is Hermitian.  ``rate`` is the fastest drive frequency (rad/us), used to
    validate step sizes.  Coefficient functions must accept arrays of times.
    """

    def __init__(self, static: np.ndarray, terms: Sequence[tuple[np.ndarray, Callable]], rate: float = 0.0):
        self.static = np.asarray(static, dtype=complex)
        self.operators = [np.asarray(b, dtype=complex) for b, _ in terms]
        self.functions = [f for _, f in terms]
        self.rate = float(rate)

    @property
    def dim(self) -> int:
        return self.static.shape[0]

    def coefficients(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not self.functions:
            return np.zeros((t.size, 0), dtype=complex)
        return np.stack([np.broadcast_to(f(t), t.shape) for f in self.functions], axis=-1).astype(complex)

    def __call__(self, t: float) -> np.ndarray:
        h = self.static.copy()
        for c, b in zip(self.coefficients(t)[0], self.operators):
            h += c * b
        return h


def _const(c: complex) -> Callable:
    return lambda t: np.full(np.shape(t), c, dtype=complex)


def _mode_ops(m: ModelSpec, j: int):
    d = fs.destroy(j, m.space)
    return d, d.conj().T


# -- ideal tier ---------------------------------------------------------------


def ideal_hamiltonian(m: ModelSpec) -> np.ndarray:
    """Time-independent mapped Dirac Hamiltonian.

    Per mode: (chi alpha/4) P sigma_delta + (chi dalpha/4)(d^dag sigma e^{i delta}
    + h.c.) + gamma i (d^dag - d), plus (delta_omega/2) sigma_z.  The Magnus
    correction is added for the ``magnus`` tier.
    """
    if m.tier is Tier.FULL:
        raise ValidationError("ideal_hamiltonian needs tier 'ideal' or 'magnus'")
    sp = m.space
    sig = fs.qubit_op(fs.SIGMA_MINUS, sp)
    h = 0.5 * m.delta_omega * fs.qubit_op(fs.SIGMA_Z, sp)
    for j, (chi, dr) in enumerate(zip(m.chi, m.drives), start=1):
        d, dd = _mode_ops(m, j)
        h = h + chi * dr.alpha / 4 * (d + dd) @ fs.pauli_delta(dr.delta, sp)
        if dr.delta_alpha:
            b = chi * dr.delta_alpha / 4 * np.exp(1j * dr.delta) * dd @ sig
            h = h + b + b.conj().T
        if dr.gamma:
            h = h + dr.gamma * 1j * (dd - d)
    if m.tier is Tier.MAGNUS:
        h = h + magnus_correction(m)
    return h


def magnus_correction(m: ModelSpec) -> np.ndarray:
    """Second-order RWA correction sum_j chi_j^2/(4 Omega_SB) (n_j)^2 sigma_z."""
    sp = m.space
    sz = fs.qubit_op(fs.SIGMA_Z, sp)
    h = np.zeros((sp.total_dim, sp.total_dim), dtype=complex)
    for j, (chi, dr) in enumerate(zip(m.chi, m.drives), start=1):
        n = fs.number_op(j, sp)
        h += chi**2 / (4 * dr.omega_sb) * n @ n @ sz
    return h


# -- full tier ------------------------------------------------------------------


def full_hamiltonian_source(m: ModelSpec) -> TimeDependentHamiltonian:
    """Pre-RWA Hamiltonian in the sideband frame, as a term expansion.

    Per mode, with theta = W t + delta and S(t) = sigma e^{-iWt} + sigma^dag e^{iWt}:
    (chi/2)[alpha cos(theta) P + (alpha^2/2 + alpha dalpha/2) cos(2 theta)
    + (dalpha/2)(d^dag e^{i theta} + d e^{-i theta}) + n] S(t),
    plus gamma i (d^dag - d) and (delta_omega/2) sigma_z.
    """
    W = _shared_omega_sb(m)
    sp = m.space
    sig = fs.qubit_op(fs.SIGMA_MINUS, sp)
    sigd = sig.conj().T
    static = 0.5 * m.delta_omega * fs.qubit_op(fs.SIGMA_Z, sp)
    terms = []

    def pair(op, f):
        terms.append((op @ sig, f))
        terms.append((op @ sigd, _conj(f)))

    for j, (chi, dr) in enumerate(zip(m.chi, m.drives), start=1):
        d, dd = _mode_ops(m, j)
        a, da, dl = dr.alpha, dr.delta_alpha, dr.delta
        eye = fs.identity(sp)
        if a:
            pair(d + dd, lambda t, c=chi * a / 2, dl=dl: c * np.cos(W * t + dl) * np.exp(-1j * W * t))
        c2 = chi / 2 * (a**2 / 2 + a * da / 2)
        if c2:
            pair(eye, lambda t, c=c2, dl=dl: c * np.cos(2 * (W * t + dl)) * np.exp(-1j * W * t))
        pair(dd @ d, lambda t, c=chi / 2: c * np.exp(-1j * W * t))
        if da:
            c3 = chi * da / 4
            # d^dag sigma is slow (e^{i delta}); d^dag sigma^dag oscillates at 2W
            b1 = dd @ sig
            b2 = dd @ sigd
            terms.append((b1, _const(c3 * np.exp(1j * dl))))
            terms.append((b1.conj().T, _const(c3 * np.exp(-1j * dl))))
            terms.append((b2, lambda t, c=c3, dl=dl: c * np.exp(1j * (2 * W * t + dl))))
            terms.append((b2.conj().T, lambda t, c=c3, dl=dl: c * np.exp(-1j * (2 * W * t + dl))))
        if dr.gamma:
            static = static + dr.gamma * 1j * (dd - d)
    return TimeDependentHamiltonian(static, terms, rate=W)


def _conj(f: Callable) -> Callable:
    return lambda t: np.conj(f(t))


def full_hamiltonian(t: float, m: ModelSpec) -> np.ndarray:
    if m.tier is not Tier.FULL:
        raise ValidationError("full_hamiltonian needs tier 'full'")
    return full_hamiltonian_source(m)(t)


# -- pre-RWA frames used for equivalence checks -----------------------------------


def _single_mode(m: ModelSpec) -> tuple[float, SidebandDrive]:
    if m.space.n_modes != 1:
        raise ValidationError("frame Hamiltonians are defined for one mode")
    return m.chi[0], m.drives[0]


def _qubit_drive_terms(m: ModelSpec) -> np.ndarray:
    rabi = m.rabi_drive()
    sp = m.space
    detuning = -rabi.omega_d
    return 0.5 * (detuning * fs.qubit_op(fs.SIGMA_Z, sp) + rabi.omega_r * fs.qubit_op(fs.SIGMA_X, sp))


def lab_frame_source(m: ModelSpec) -> TimeDependentHamiltonian:
    """(chi/2) a^dag a sigma_z + qubit drive terms + eps(t) a^dag + eps*(t) a."""
    from .drives import cavity_drive

    chi, dr = _single_mode(m)
    sp = m.space
    a, ad = _mode_ops(m, 1)
    static = chi / 2 * ad @ a @ fs.qubit_op(fs.SIGMA_Z, sp) + _qubit_drive_terms(m)
    terms = [
        (ad, lambda t: cavity_drive(t, dr)),
        (a, lambda t: np.conj(cavity_drive(t, dr))),
    ]
    return TimeDependentHamiltonian(static, terms, rate=dr.omega_sb)


def lab_frame_h2(t: float, m: ModelSpec) -> np.ndarray:
    return lab_frame_source(m)(t)


def displaced_frame_source(m: ModelSpec) -> TimeDependentHamiltonian:
    """(chi/2)(d^dag + alpha*)(d + alpha) sigma_z + qubit drive terms + gamma i (d^dag - d).

    alpha(t) is the classical sideband response; c-number terms are dropped.
    """
    chi, dr = _single_mode(m)
    sp = m.space
    d, dd = _mode_ops(m, 1)
    sz = fs.qubit_op(fs.SIGMA_Z, sp)
    static = chi / 2 * dd @ d @ sz + _qubit_drive_terms(m)
    if dr.gamma:
        static = static + dr.gamma * 1j * (dd - d)
    terms = [
        (dd @ sz, lambda t: chi / 2 * classical_displacement(t, dr)),
        (d @ sz, lambda t: chi / 2 * np.conj(classical_displacement(t, dr))),
        (sz, lambda t: chi / 2 * np.abs(classical_displacement(t, dr)) ** 2 + 0j),
    ]
    return TimeDependentHamiltonian(static, terms, rate=dr.omega_sb)


def displaced_frame_h3(t: float, m: ModelSpec) -> np.ndarray:
    return displaced_frame_source(m)(t)


def hamiltonian_for(m: ModelSpec):
    """Operator for the ideal/magnus tiers, term expansion for the full tier."""
    if m.tier is Tier.FULL:
        return full_hamiltonian_source(m)
    return ideal_hamiltonian(m)


# -- parameter mapping --------------------------------------------------------------


def dirac_mapping(m: ModelSpec) -> MappedConstants:
    """Dirac constants (c, mc^2, eB, g) realised by the model, in rad/us."""
    chi, dr = m.chi[0], m.drives[0]
    mc2 = m.delta_omega / 2
    family = m.scenario.family
    if family == "magnetic":
        denom = 2 * dr.alpha + dr.delta_alpha
        if denom == 0:
            raise SingularMappingError("2 alpha_1 + delta_alpha_1 = 0: eB undefined")
        return MappedConstants(
            c_eff=chi * (dr.alpha / 4 + dr.delta_alpha / 8),
            mc2=mc2,
            eB=2 * dr.delta_alpha / denom,
        )
    if family == "electro":
        return MappedConstants(c_eff=chi * dr.alpha / 4, mc2=mc2, g=-2 * dr.gamma)
    return MappedConstants(c_eff=chi * dr.alpha / 4, mc2=mc2)
