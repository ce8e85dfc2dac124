"""Dense operator algebra on qubit ⊗ truncated Fock space.

Slot order is fixed: qubit first, then cavity modes in ascending order
(mode 1, mode 2).  A basis index therefore reads ``q * N1 * N2 + n1 * N2 + n2``
and a state vector reshapes to ``(2, N1[, N2])``.

Qubit basis: index 0 is the sigma_z = +1 state, index 1 the sigma_z = -1
state.  The lowering operator ``sigma`` maps index 0 to index 1, so that
``sigma e^{i d} + sigma^dag e^{-i d}`` is sigma_x at d = 0 and sigma_y at
d = pi/2.

Modes are numbered from 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, TextIO

import numpy as np
from scipy.linalg import expm

from .errors import ShapeError, TruncationError, TruncationWarning, ValidationError

STATE_NORM_TOL = 1e-8
HERMITIAN_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


SIGMA_X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
SIGMA_Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
SIGMA_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))
SIGMA_MINUS = _frozen(np.array([[0, 0], [1, 0]], dtype=complex))
SIGMA_PLUS = _frozen(np.array([[0, 1], [0, 0]], dtype=complex))


@dataclass(frozen=True)
class HilbertSpec:
    """One qubit coupled to one or two truncated cavity modes.

    ``trunc`` holds the Fock dimension N_j of every mode.
    """

    trunc: tuple[int, ...]

    def __post_init__(self):
        trunc = tuple(int(n) for n in self.trunc)
        object.__setattr__(self, "trunc", trunc)
        if len(trunc) not in (1, 2):
            raise ValidationError(f"n_modes must be 1 or 2, got {len(trunc)}")
        for n in trunc:
            if n < 2:
                raise ValidationError(f"Fock truncation must be >= 2, got {n}")

    @property
    def n_modes(self) -> int:
        return len(self.trunc)

    @property
    def dims(self) -> tuple[int, ...]:
        return (2, *self.trunc)

    @property
    def total_dim(self) -> int:
        return 2 * math.prod(self.trunc)

    def slot_index(self, slot) -> int:
        if slot == "qubit":
            return 0
        if isinstance(slot, (int, np.integer)) and 1 <= slot <= self.n_modes:
            return int(slot)
        raise ValidationError(f"unknown slot {slot!r} for {self.n_modes}-mode space")


def annihilator(N: int) -> np.ndarray:
    """Truncated ladder operator with sqrt(m) at (m-1, m)."""
    if N < 2:
        raise ValidationError(f"invalid truncation N={N}, need N >= 2")
    return np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1).astype(complex)


def embed(op: np.ndarray, slot, spec: HilbertSpec) -> np.ndarray:
    """Place a single-slot operator into the full space.

    ``slot`` is ``"qubit"`` or a 1-based mode index.  Identities fill every
    other slot, in the qubit-major order documented at module level.
    """
    k = spec.slot_index(slot)
    op = np.asarray(op, dtype=complex)
    if op.shape != (spec.dims[k], spec.dims[k]):
        raise ShapeError(f"operator of shape {op.shape} does not fit slot {slot!r} of dim {spec.dims[k]}")
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(spec.dims):
        out = np.kron(out, op if i == k else np.eye(d, dtype=complex))
    return out


def identity(spec: HilbertSpec) -> np.ndarray:
    return np.eye(spec.total_dim, dtype=complex)


def qubit_op(op: np.ndarray, spec: HilbertSpec) -> np.ndarray:
    return embed(op, "qubit", spec)


def destroy(mode: int, spec: HilbertSpec) -> np.ndarray:
    return embed(annihilator(spec.trunc[spec.slot_index(mode) - 1]), mode, spec)


def number_op(mode: int, spec: HilbertSpec) -> np.ndarray:
    N = spec.trunc[spec.slot_index(mode) - 1]
    return embed(np.diag(np.arange(N, dtype=complex)), mode, spec)


def pauli_delta(delta: float, spec: HilbertSpec) -> np.ndarray:
    """sigma e^{i delta} + sigma^dag e^{-i delta}, embedded on the qubit."""
    op = SIGMA_MINUS * np.exp(1j * delta) + SIGMA_PLUS * np.exp(-1j * delta)
    return embed(op, "qubit", spec)


def position_op(mode: int, spec: HilbertSpec) -> np.ndarray:
    """X = i (d - d^dag) / 2."""
    d = destroy(mode, spec)
    return 0.5j * (d - d.conj().T)


def momentum_op(mode: int, spec: HilbertSpec) -> np.ndarray:
    """P = d^dag + d."""
    d = destroy(mode, spec)
    return d + d.conj().T


def displacement_op(beta: complex, N: int) -> np.ndarray:
    """exp(beta a^dag - beta* a) on one truncated mode."""
    a = annihilator(N)
    return expm(beta * a.conj().T - np.conj(beta) * a)


# -- states ---------------------------------------------------------------


def fock_state(n: int, N: int) -> np.ndarray:
    if not 0 <= n < N:
        raise ValidationError(f"Fock level {n} outside truncation {N}")
    v = np.zeros(N, dtype=complex)
    v[n] = 1.0
    return v


def coherent_state(beta: complex, N: int, strict: bool = False) -> np.ndarray:
    """Fock amplitudes of |beta>, renormalised after truncation.

    Truncation adequacy requires ``|beta|^2 <= N / 4``.  A violation raises
    :class:`TruncationError` when ``strict`` and otherwise emits a
    :class:`TruncationWarning`.
    """
    if N < 2:
        raise ValidationError(f"invalid truncation N={N}")
    if abs(beta) ** 2 > N / 4:
        msg = f"|beta|^2 = {abs(beta) ** 2:.3g} exceeds N/4 = {N / 4:.3g}"
        if strict:
            raise TruncationError(msg)
        warnings.warn(msg, TruncationWarning, stacklevel=2)
    amps = np.zeros(N, dtype=complex)
    amps[0] = 1.0
    # beta^n / sqrt(n!) by recurrence, no factorial overflow
    for n in range(1, N):
        amps[n] = amps[n - 1] * beta / math.sqrt(n)
    amps *= math.exp(-abs(beta) ** 2 / 2)
    return amps / np.linalg.norm(amps)


def qubit_state(desc) -> np.ndarray:
    """Qubit amplitudes from a descriptor.

    Accepts ``"plus"``, ``"minus"``, ``"excited"`` (sigma_z = +1),
    ``"ground"`` (sigma_z = -1), ``("bloch", theta, phi)`` or a length-2
    amplitude sequence.
    """
    if isinstance(desc, str):
        named = {
            "plus": (1 / math.sqrt(2), 1 / math.sqrt(2)),
            "minus": (1 / math.sqrt(2), -1 / math.sqrt(2)),
            "excited": (1.0, 0.0),
            "ground": (0.0, 1.0),
        }
        if desc not in named:
            raise ValidationError(f"unknown qubit state {desc!r}")
        return np.array(named[desc], dtype=complex)
    if len(desc) == 3 and desc[0] == "bloch":
        _, theta, phi = desc
        return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)], dtype=complex)
    v = np.asarray(desc, dtype=complex)
    if v.shape != (2,):
        raise ShapeError(f"qubit state must have 2 amplitudes, got shape {v.shape}")
    return check_state(v)


def product_state(qubit: np.ndarray, *modes: np.ndarray) -> np.ndarray:
    """Kronecker product in slot order, normalised and validated."""
    out = np.asarray(qubit, dtype=complex)
    for m in modes:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return check_state(out)


def check_state(psi: np.ndarray, tol: float = STATE_NORM_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ShapeError(f"state vector must be 1-D, got shape {psi.shape}")
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1) >= tol:
        raise ValidationError(f"state norm^2 = {norm2!r} deviates from 1 by more than {tol}")
    return psi


def density_matrix(psi: np.ndarray) -> np.ndarray:
    psi = check_state(psi)
    return np.outer(psi, psi.conj())


def check_density(rho: np.ndarray, tol: float = STATE_NORM_TOL, neg_tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
        raise ValidationError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise ValidationError(f"density matrix trace {tr!r} deviates from 1")
    if np.linalg.eigvalsh(rho).min() < -neg_tol:
        raise ValidationError("density matrix has negative eigenvalues")
    return rho


def hermiticity_residual(op: np.ndarray) -> float:
    op = np.asarray(op)
    return float(np.max(np.abs(op - op.conj().T), initial=0.0))


def check_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ShapeError(f"operator must be square, got shape {op.shape}")
    res = hermiticity_residual(op)
    if res > tol:
        raise ValidationError(f"operator is not Hermitian (max deviation {res:.3g})")
    return op


# -- measurements ---------------------------------------------------------


def expectation(state: np.ndarray, op: np.ndarray, hermitian: bool = True):
    """<psi|op|psi>.

    For Hermitian ``op`` the real part is returned after checking that the
    imaginary residue is below 1e-9.
    """
    state = np.asarray(state, dtype=complex)
    op = np.asarray(op)
    if op.shape != (state.size, state.size):
        raise ShapeError(f"operator shape {op.shape} does not match state dim {state.size}")
    val = np.vdot(state, op @ state)
    if not hermitian:
        return complex(val)
    if abs(val.imag) >= 1e-9:
        raise ValidationError(f"expectation of Hermitian operator has imaginary part {val.imag:.3g}")
    return float(val.real)


class QubitReduced(NamedTuple):
    rho: np.ndarray
    bloch: np.ndarray
    purity: float


def bloch_vector(rho_q: np.ndarray) -> np.ndarray:
    return np.array([
        2 * rho_q[0, 1].real,
        -2 * rho_q[0, 1].imag,
        (rho_q[0, 0] - rho_q[1, 1]).real,
    ])


def qubit_reduced(state: np.ndarray, spec: HilbertSpec) -> QubitReduced:
    """Partial trace over all cavity modes."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        m = state.reshape(2, -1)
        rho = m @ m.conj().T
    else:
        r = state.reshape(2, spec.total_dim // 2, 2, spec.total_dim // 2)
        rho = np.einsum("aibi->ab", r)
    purity = float(np.real(np.trace(rho @ rho)))
    return QubitReduced(rho, bloch_vector(rho), purity)


def fock_populations(state: np.ndarray, mode: int, spec: HilbertSpec) -> np.ndarray:
    """Occupation distribution of one mode for a pure state."""
    k = spec.slot_index(mode)
    p = np.abs(np.asarray(state).reshape(spec.dims)) ** 2
    axes = tuple(i for i in range(len(spec.dims)) if i != k)
    return p.sum(axis=axes)


def fock_leak(state: np.ndarray, spec: HilbertSpec, levels: int = 2) -> float:
    """Largest population held in the top ``levels`` Fock states of any mode."""
    return max(float(fock_populations(state, j, spec)[-levels:].sum()) for j in range(1, spec.n_modes + 1))


# -- debug dump -----------------------------------------------------------


def dump_operator(op: np.ndarray, fh: TextIO, skip_zeros: bool = True) -> None:
    """Write ``row col re im`` lines; vectors are written as one column."""
    a = np.asarray(op, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    fh.write(f"# shape {a.shape[0]} {a.shape[1]}\n")
    for (i, j), z in np.ndenumerate(a):
        if skip_zeros and z == 0:
            continue
        fh.write(f"{i} {j} {z.real:.17g} {z.imag:.17g}\n")


def load_operator(fh: TextIO) -> np.ndarray:
    header = fh.readline().split()
    if header[:2] != ["#", "shape"]:
        raise ValidationError("missing '# shape' header in operator dump")
    out = np.zeros((int(header[2]), int(header[3])), dtype=complex)
    for line in fh:
        if line.strip():
            i, j, re, im = line.split()
            out[int(i), int(j)] = complex(float(re), float(im))
    return out
