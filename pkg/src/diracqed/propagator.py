"""Time evolution of states and density matrices with observable recording."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from . import fockspace as fs
from .errors import IntegrationError, ShapeError, TruncationError, ValidationError
from .hamiltonians import TimeDependentHamiltonian

DEFAULT_LEAK_BOUND = 1e-6
STEP_RENORM_TOL = 1e-10
RUN_NORM_TOL = 1e-6
# dense assembly below this dimension, shared-pattern CSR above
_SPARSE_DIM = 256
_CHUNK = 2048


@dataclass(frozen=True)
class TimeGrid:
    """Fixed-step grid on [t0, t1] (us).

    The number of steps is ``round((t1 - t0) / dt)``; :attr:`step` is the
    exact step that lands on ``t1``.  Observables are recorded every
    ``record_every`` steps plus at the final time.
    """

    t1: float
    dt: float
    t0: float = 0.0
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if (self.t1 - self.t0) / self.dt < 1 - 1e-9:
            raise ValidationError("grid must contain at least one step")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")

    @classmethod
    def sampled(cls, t1: float, sample: float, max_dt: float, t0: float = 0.0) -> "TimeGrid":
        """Largest step <= max_dt that divides the sampling interval."""
        sub = max(1, math.ceil(sample / max_dt - 1e-9))
        return cls(t1=t1, dt=sample / sub, t0=t0, record_every=sub)

    @property
    def n_steps(self) -> int:
        return max(1, int(round((self.t1 - self.t0) / self.dt)))

    @property
    def step(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    def record_indices(self) -> np.ndarray:
        idx = np.arange(0, self.n_steps + 1, self.record_every)
        if idx[-1] != self.n_steps:
            idx = np.append(idx, self.n_steps)
        return idx

    def record_times(self) -> np.ndarray:
        return self.t0 + self.record_indices() * self.step


@dataclass
class ObservableSeries:
    times: np.ndarray
    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_us", *self.columns])
            cols = [self.times, *self.columns.values()]
            for row in zip(*cols):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "ObservableSeries":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        if header[0] != "t_us":
            raise ValidationError(f"{Path(path).name}: first column must be t_us")
        return cls(data[:, 0].copy(), {h: data[:, i].copy() for i, h in enumerate(header[1:], start=1)})


class Observables:
    """Standard observable columns for a qubit plus n modes.

    Columns: X_j, P_j per mode, then sx, sy, sz, purity, norm, leak.  All are
    computed from tensor reshapes, never from full-dimension operators.
    """

    def __init__(self, space: fs.HilbertSpec, leak_levels: int = 2):
        self.space = space
        self.leak_levels = leak_levels

    @property
    def names(self) -> list[str]:
        modes = [f"{q}{j}" for j in range(1, self.space.n_modes + 1) for q in ("X", "P")]
        return modes + ["sx", "sy", "sz", "purity", "norm", "leak"]

    def measure_states(self, psis: np.ndarray) -> dict[str, np.ndarray]:
        """Columns for a batch of pure states, shape (T, dim)."""
        sp = self.space
        psis = np.asarray(psis, dtype=complex).reshape(-1, *sp.dims)
        T = psis.shape[0]
        out = {}
        for j in range(1, sp.n_modes + 1):
            ax = j + 1
            N = sp.trunc[j - 1]
            lo = np.take(psis, np.arange(N - 1), axis=ax)
            hi = np.take(psis, np.arange(1, N), axis=ax)
            shape = [1] * psis.ndim
            shape[ax] = N - 1
            w = np.sqrt(np.arange(1, N, dtype=float)).reshape(shape)
            d_mean = np.sum((lo.conj() * hi * w).reshape(T, -1), axis=1)
            out[f"X{j}"] = -d_mean.imag
            out[f"P{j}"] = 2 * d_mean.real
        m = psis.reshape(T, 2, -1)
        rho = np.einsum("tai,tbi->tab", m, m.conj())
        self._qubit_columns(rho, out)
        out["norm"] = np.real(rho[:, 0, 0] + rho[:, 1, 1])
        pops = np.abs(psis) ** 2
        out["leak"] = self._leak(pops)
        return {k: out[k] for k in self.names}

    def measure_densities(self, rhos: np.ndarray) -> dict[str, np.ndarray]:
        sp = self.space
        D = sp.total_dim
        rhos = np.asarray(rhos, dtype=complex).reshape(-1, D, D)
        T = rhos.shape[0]
        out = {}
        for j in range(1, sp.n_modes + 1):
            d = fs.destroy(j, sp)
            d_mean = np.einsum("ij,tji->t", d, rhos)
            out[f"X{j}"] = -d_mean.imag
            out[f"P{j}"] = 2 * d_mean.real
        r = rhos.reshape(T, 2, D // 2, 2, D // 2)
        rq = np.einsum("taibi->tab", r)
        self._qubit_columns(rq, out)
        out["norm"] = np.real(np.einsum("tii->t", rhos))
        diag = np.real(np.einsum("tii->ti", rhos)).reshape(T, *sp.dims)
        out["leak"] = self._leak(diag)
        return {k: out[k] for k in self.names}

    @staticmethod
    def _qubit_columns(rq: np.ndarray, out: dict) -> None:
        norm = np.real(rq[:, 0, 0] + rq[:, 1, 1])
        out["sx"] = 2 * rq[:, 0, 1].real / norm
        out["sy"] = -2 * rq[:, 0, 1].imag / norm
        out["sz"] = np.real(rq[:, 0, 0] - rq[:, 1, 1]) / norm
        out["purity"] = np.real(np.einsum("tab,tba->t", rq, rq)) / norm**2

    def _leak(self, pops: np.ndarray) -> np.ndarray:
        T = pops.shape[0]
        leaks = []
        for j in range(1, self.space.n_modes + 1):
            axes = tuple(i for i in range(1, pops.ndim) if i != j + 1)
            marg = pops.sum(axis=axes).reshape(T, -1)
            leaks.append(marg[:, -self.leak_levels:].sum(axis=1))
        return np.max(leaks, axis=0)


def _series(times, cols, meta=None) -> ObservableSeries:
    return ObservableSeries(np.asarray(times, dtype=float), cols, dict(meta or {}))


def _check_leak(series: ObservableSeries, bound) -> None:
    if bound is None:
        return
    worst = float(np.max(series["leak"]))
    if worst >= bound:
        i = int(np.argmax(series["leak"]))
        raise TruncationError(
            f"Fock leak {worst:.3g} >= {bound:.3g} at t = {series.times[i]:.6g} us; increase the truncation"
        )


class _Generator:
    """Evaluates H(t) psi for a fixed term expansion."""

    def __init__(self, h):
        if isinstance(h, TimeDependentHamiltonian):
            self.static = h.static
            self.ops = h.operators
            self.coefficients = h.coefficients
            self.rate = h.rate
        else:
            self.static = fs.check_hermitian(np.asarray(h, dtype=complex), tol=1e-10)
            self.ops = []
            self.coefficients = lambda t: np.zeros((np.size(t), 0), dtype=complex)
            self.rate = 0.0
        self.dim = self.static.shape[0]
        self.sparse = self.dim > _SPARSE_DIM
        if self.sparse:
            mats = [self.static, *self.ops]
            pattern = sps.csr_matrix(sum(np.abs(m) for m in mats) > 0)
            pattern.sort_indices()
            rows = np.repeat(np.arange(self.dim), np.diff(pattern.indptr))
            cols = pattern.indices
            self._data = np.stack([m[rows, cols] for m in mats])
            self._csr = sps.csr_matrix(
                (self._data[0].copy(), cols.copy(), pattern.indptr.copy()), shape=(self.dim, self.dim)
            )
        else:
            self._stack = np.stack(self.ops) if self.ops else None

    def operator(self, coef: np.ndarray):
        if self.sparse:
            self._csr.data[:] = self._data[0] + coef @ self._data[1:]
            return self._csr
        if self._stack is None:
            return self.static
        return self.static + np.tensordot(coef, self._stack, axes=1)


def evolve_unitary(
    state0: np.ndarray,
    hamiltonian,
    grid: TimeGrid,
    observables: Observables | None = None,
    leak_bound: float | None = DEFAULT_LEAK_BOUND,
    norm_tol: float = RUN_NORM_TOL,
    return_states: bool = False,
):
    """Classic fixed-step RK4 for d(psi)/dt = -i H(t) psi.

    ``hamiltonian`` is a static operator or a :class:`TimeDependentHamiltonian`.
    The state is renormalised only when a step drifts by more than 1e-10;
    the accumulated correction is reported in ``series.meta['norm_drift']``
    and must stay below ``norm_tol``.

    Returns ``(series, final_state)``, or ``(series, final_state, states)``
    with ``return_states``.  Without ``observables`` only the ``norm`` column
    is recorded and no leak check is made.
    """
    psi = np.array(state0, dtype=complex)
    gen = _Generator(hamiltonian)
    if psi.shape != (gen.dim,):
        raise ShapeError(f"state dim {psi.shape} does not match Hamiltonian dim {gen.dim}")
    fs.check_state(psi)
    dt = grid.step
    if gen.rate and dt * gen.rate >= 2 * math.pi / 20:
        raise ValidationError(
            f"dt = {dt:.3g} us gives fewer than 20 steps per drive period 2pi/{gen.rate:.4g}; reduce dt"
        )

    record = set(grid.record_indices().tolist())
    snaps = []
    drift = 0.0
    renorms = 0
    n = grid.n_steps
    t0 = grid.t0
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        # coefficients at t_k and t_k + dt/2 for this chunk, plus the chunk end
        half = t0 + dt * (np.arange(2 * start, 2 * stop + 1) / 2.0)
        coefs = gen.coefficients(half)
        for k in range(start, stop):
            if k in record:
                snaps.append(psi.copy())
            i = 2 * (k - start)
            h1 = gen.operator(coefs[i])
            k1 = h1 @ psi
            h2 = gen.operator(coefs[i + 1])
            k2 = h2 @ (psi - 0.5j * dt * k1)
            k3 = h2 @ (psi - 0.5j * dt * k2)
            h3 = gen.operator(coefs[i + 2])
            k4 = h3 @ (psi - 1j * dt * k3)
            psi = psi - (1j * dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            norm2 = np.vdot(psi, psi).real
            if abs(norm2 - 1) > STEP_RENORM_TOL:
                drift += abs(norm2 - 1)
                renorms += 1
                psi /= math.sqrt(norm2)
    snaps.append(psi.copy())
    if drift > norm_tol:
        raise IntegrationError(f"cumulative norm drift {drift:.3g} exceeds {norm_tol:.3g}; use a smaller dt")

    times = grid.record_times()
    meta = {"norm_drift": drift, "renormalisations": renorms, "dt": dt, "method": "rk4"}
    snaps = np.array(snaps)
    if observables is None:
        series = _series(times, {"norm": np.sum(np.abs(snaps) ** 2, axis=1)}, meta)
    else:
        series = _series(times, observables.measure_states(snaps), meta)
        _check_leak(series, leak_bound)
    if return_states:
        return series, psi, snaps
    return series, psi


def evolve_eigen(
    state0: np.ndarray,
    hamiltonian: np.ndarray,
    sample_times,
    observables: Observables | None = None,
    leak_bound: float | None = DEFAULT_LEAK_BOUND,
    return_states: bool = False,
):
    """Exact propagation e^{-iHt} psi0 through one diagonalisation.

    Returns the series, or ``(series, states)`` with ``return_states``.
    """
    H = fs.check_hermitian(np.asarray(hamiltonian, dtype=complex))
    psi0 = fs.check_state(state0)
    if psi0.size != H.shape[0]:
        raise ShapeError(f"state dim {psi0.size} does not match Hamiltonian dim {H.shape[0]}")
    w, v = np.linalg.eigh(H)
    c0 = v.conj().T @ psi0
    times = np.asarray(sample_times, dtype=float)
    cols: dict[str, list] = {}
    kept = []
    for start in range(0, times.size, _CHUNK):
        ts = times[start:start + _CHUNK]
        phases = np.exp(-1j * np.outer(w, ts)) * c0[:, None]
        psis = (v @ phases).T
        if return_states:
            kept.append(psis)
        if observables is None:
            part = {"norm": np.sum(np.abs(psis) ** 2, axis=1)}
        else:
            part = observables.measure_states(psis)
        for k, val in part.items():
            cols.setdefault(k, []).append(val)
    series = _series(times, {k: np.concatenate(v_) for k, v_ in cols.items()}, {"method": "eigen"})
    if observables is not None:
        _check_leak(series, leak_bound)
    if return_states:
        return series, np.concatenate(kept) if kept else np.zeros((0, psi0.size), complex)
    return series


def _dissipator(L: np.ndarray, rho: np.ndarray, LdL: np.ndarray) -> np.ndarray:
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def evolve_lindblad(
    rho0: np.ndarray,
    hamiltonian,
    kappa: float,
    mode: int,
    grid: TimeGrid,
    space: fs.HilbertSpec,
    observables: Observables | None = None,
    trace_tol: float = 1e-7,
    neg_tol: float = 1e-7,
):
    """RK4 on d(rho)/dt = -i[H, rho] + kappa D[d_mode] rho.

    D[X] rho = X rho X^dag - (X^dag X rho + rho X^dag X)/2.  Returns
    ``(series, final_rho)``.
    """
    if kappa < 0:
        raise ValidationError(f"kappa must be non-negative, got {kappa}")
    rho = np.array(fs.check_density(rho0), dtype=complex)
    gen = _Generator(hamiltonian)
    if rho.shape != (gen.dim, gen.dim) or space.total_dim != gen.dim:
        raise ShapeError("density matrix, Hamiltonian and space dimensions differ")
    L = fs.destroy(mode, space)
    LdL = L.conj().T @ L
    dt = grid.step

    def rhs(h, r):
        out = -1j * (h @ r - r @ h)
        if kappa:
            out = out + kappa * _dissipator(L, r, LdL)
        return out

    record = set(grid.record_indices().tolist())
    snaps = []
    n = grid.n_steps
    for k in range(n):
        if k in record:
            snaps.append(rho.copy())
        t = grid.t0 + k * dt
        coefs = gen.coefficients(np.array([t, t + dt / 2, t + dt]))
        h1 = _dense(gen.operator(coefs[0]))
        h2 = _dense(gen.operator(coefs[1]))
        h3 = _dense(gen.operator(coefs[2]))
        k1 = rhs(h1, rho)
        k2 = rhs(h2, rho + 0.5 * dt * k1)
        k3 = rhs(h2, rho + 0.5 * dt * k2)
        k4 = rhs(h3, rho + dt * k3)
        rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    snaps.append(rho.copy())

    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise IntegrationError(f"trace drifted to {tr!r}; use a smaller dt")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -neg_tol:
        raise IntegrationError(f"density matrix lost positivity (eigenvalue {lam:.3g})")
    obs = observables or Observables(space)
    series = _series(grid.record_times(), obs.measure_densities(np.array(snaps)), {"dt": dt, "method": "rk4-lindblad"})
    return series, rho


def _dense(h):
    return h.toarray() if sps.issparse(h) else h
