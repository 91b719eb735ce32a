"""Density-matrix propagation through linear field sweeps.

The field term is swept as ``omega(t) = omega_start + sign * (v / 1000) * t``
with ``v`` in MHz/ms and ``t`` in us. Each step uses the Hamiltonian at the
step midpoint. Without dephasing the step is the exact unitary; with dephasing
it is a Strang splitting around the exact NV dephasing channel, which keeps the
trace and positivity exact up to rounding.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .hamiltonians import I_Z, SweepHamiltonian
from .spin import SIGMA_Z, SpinSystem, embed, partial_trace, purity

log = logging.getLogger(__name__)

STEP_DOUBLING_TOL = 1e-6
TRACE_TOL = 1e-6
DEFAULT_STRIDE = 1000


class NumericalContractError(RuntimeError):
    """A propagation failed one of its accuracy or conservation checks."""


class StepSizeError(NumericalContractError):
    def __init__(self, message: str, suggested_dt: float):
        super().__init__(f"{message}; try dt <= {suggested_dt:.3g} us")
        self.suggested_dt = suggested_dt


@dataclass(frozen=True)
class DephasingSpec:
    Gamma_e: float = 0.0  # 1/us

    def __post_init__(self):
        if not self.Gamma_e >= 0:
            raise ValueError(f"Gamma_e must be >= 0, got {self.Gamma_e}")

    @classmethod
    def from_T2(cls, T2: float) -> "DephasingSpec":
        if not T2 > 0:
            raise ValueError(f"T2 must be positive, got {T2}")
        return cls(0.0 if math.isinf(T2) else 1.0 / T2)


@dataclass(frozen=True)
class SweepSchedule:
    """A sweep from ``omega_start`` to ``omega_end`` and back, ``cycles`` times.

    ``reinit_state`` is ``"chi_minus"``, ``"chi_plus"`` or an explicit NV
    state (2-vector or 2x2 density matrix) in the ``{|+1>, |-1>}`` basis.
    """

    omega_start: float = -6.0
    omega_end: float = 6.0
    v: float = 30.0  # MHz/ms
    cycles: int = 1
    reinit_state: object = "chi_minus"

    def __post_init__(self):
        if self.omega_end == self.omega_start:
            raise ValueError("omega_end must differ from omega_start")
        if not self.v > 0:
            raise ValueError(f"sweep rate v must be positive, got {self.v}")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise ValueError(f"cycles must be a positive integer, got {self.cycles}")
        if isinstance(self.reinit_state, str) and self.reinit_state not in ("chi_minus", "chi_plus"):
            raise ValueError(f"unknown reinit_state {self.reinit_state!r}")

    @property
    def rate(self) -> float:
        """Sweep rate in MHz/us."""
        return self.v / 1000.0

    @property
    def duration(self) -> float:
        """Duration of one sweep in us."""
        return abs(self.omega_end - self.omega_start) / self.rate

    def sweeps(self, n: int | None = None) -> list[tuple[float, float]]:
        """(start, end) pairs alternating direction; ``2 * cycles`` by default."""
        n = 2 * self.cycles if n is None else n
        legs = [(self.omega_start, self.omega_end), (self.omega_end, self.omega_start)]
        return [legs[i % 2] for i in range(n)]


@dataclass
class Trajectory:
    """Sampled observables along one or more sweeps."""

    t: np.ndarray
    omega: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    p_chi_plus: np.ndarray
    p_chi_minus: np.ndarray
    polarization: dict[str, np.ndarray]
    segment: np.ndarray
    final_state: np.ndarray
    dt: float = float("nan")
    step_doubling_error: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def final_polarization(self, label: str | None = None) -> float:
        label = label or next(iter(self.polarization))
        return float(self.polarization[label][-1])

    def segment_end_polarization(self, label: str | None = None) -> np.ndarray:
        """Polarization at the last sample of every segment."""
        label = label or next(iter(self.polarization))
        pol = self.polarization[label]
        ends = np.flatnonzero(np.diff(self.segment, append=self.segment[-1] + 1))
        return pol[ends]

    @staticmethod
    def concatenate(parts: Sequence["Trajectory"]) -> "Trajectory":
        if not parts:
            raise ValueError("nothing to concatenate")
        labels = list(parts[0].polarization)
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
        return Trajectory(
            t=cat("t"),
            omega=cat("omega"),
            trace=cat("trace"),
            purity=cat("purity"),
            p_chi_plus=cat("p_chi_plus"),
            p_chi_minus=cat("p_chi_minus"),
            polarization={k: np.concatenate([p.polarization[k] for p in parts]) for k in labels},
            segment=cat("segment"),
            final_state=parts[-1].final_state,
            dt=parts[0].dt,
            step_doubling_error=max((p.step_doubling_error for p in parts), default=np.nan),
        )

    def columns(self) -> dict[str, np.ndarray]:
        cols = {
            "t_us": self.t,
            "omega_MHz": self.omega,
            "trace": self.trace,
            "purity": self.purity,
            "p_chi_plus": self.p_chi_plus,
            "p_chi_minus": self.p_chi_minus,
        }
        for k, v in self.polarization.items():
            cols[f"pol_{k}"] = v
        return cols

    def to_csv(self, path, precision: int = 6) -> None:
        write_columns(path, self.columns(), precision)


def write_columns(path, cols: dict[str, np.ndarray], precision: int = 6) -> None:
    fmt = f"{{:.{precision}g}}"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([fmt.format(float(x)) for x in row])


def nuclear_polarization(rho: np.ndarray, system: SpinSystem, site: str) -> float:
    """``2 Tr(rho I_z~)`` on an effective two-level nuclear site, in [-1, 1]."""
    sub = system[site]
    if sub.role != "nuclear" or sub.dim != 2:
        raise ValueError(f"site {site!r} is not an effective two-level nucleus")
    return float(np.real(np.trace(rho @ embed(2 * I_Z, system, site))))


def nv_state(H: SweepHamiltonian, omega: float, which="chi_minus", p_nv: float = 1.0) -> np.ndarray:
    """NV density matrix for a reinit target at field ``omega``.

    ``chi_minus``/``chi_plus`` are the eigenstates of the NV part of ``H``.
    The result is ``|p_nv| |target><target| + (1 - |p_nv|) I/2``; a negative
    ``p_nv`` swaps ``chi_minus`` and ``chi_plus``.
    """
    if not -1 <= p_nv <= 1:
        raise ValueError(f"p_nv must lie in [-1, 1], got {p_nv}")
    if isinstance(which, str):
        idx = {"chi_minus": 0, "chi_plus": 1}.get(which)
        if idx is None:
            raise ValueError(f"unknown NV state {which!r}")
        if p_nv < 0:
            idx = 1 - idx
        _, vecs = np.linalg.eigh(H.nv_reference()(omega))
        psi = vecs[:, idx]
        pure = np.outer(psi, psi.conj())
    else:
        if p_nv < 0:
            raise ValueError("a negative p_nv needs a named target state")
        target = np.asarray(which, dtype=complex)
        if target.ndim == 1:
            target = target / np.linalg.norm(target)
            pure = np.outer(target, target.conj())
        else:
            pure = target
    d = pure.shape[0]
    p = abs(p_nv)
    return p * pure + (1 - p) * np.eye(d) / d


def reinit_nv(rho: np.ndarray, system: SpinSystem, target: np.ndarray) -> np.ndarray:
    """Replace the NV factor by ``target`` and keep the reduced state of the rest."""
    nv = system.nv
    target = np.asarray(target, dtype=complex)
    if target.ndim == 1:
        target = np.outer(target, target.conj())
    rest = [lab for lab in system.labels if lab != nv.label]
    if not rest:
        return target.copy()
    reduced = partial_trace(rho, system, rest)
    dims = system.dims
    i = system.index(nv.label)
    n = len(dims)
    rest_dims = [d for j, d in enumerate(dims) if j != i]
    # build target (x) reduced, then move the NV axes back to position i
    t = np.multiply.outer(target, reduced.reshape(rest_dims + rest_dims))
    # axes now: nv_row, nv_col, rest_rows..., rest_cols...
    rows = list(range(2, 2 + n - 1))
    cols = list(range(2 + n - 1, 2 + 2 * (n - 1)))
    rows.insert(i, 0)
    cols.insert(i, 1)
    return np.ascontiguousarray(t.transpose(rows + cols).reshape(system.dim, system.dim))


def _batch(H, omegas: np.ndarray) -> np.ndarray:
    if isinstance(H, SweepHamiltonian):
        return H(omegas)
    return np.stack([np.asarray(H(float(w)), dtype=complex) for w in omegas])


def suggest_dt(H, omega_start: float, omega_end: float, v: float, Gamma_e: float = 0.0) -> float:
    """Step size from the fastest phase, the crossing traversal and the dephasing rate.

    ``dt = min(1 / (8 f_max), tau_cross / 50, 0.01 / Gamma_e)`` where ``f_max``
    is the largest spectral width at the sweep ends and ``tau_cross`` is the
    Landau-Zener traversal time of the smallest gap known to ``H``.
    """
    ends = _batch(H, np.array([omega_start, omega_end], dtype=float))
    f_max = max(float(np.ptp(np.linalg.eigvalsh(h))) for h in ends)
    dt = 1.0 / (8 * max(f_max, 1e-9))
    gap = getattr(H, "gap", None)
    if gap:
        r = 2 * v / 1000.0  # fastest rate of the dressed splitting, MHz/us
        tau = max(gap / r, 1 / math.sqrt(2 * math.pi * r))
        dt = min(dt, tau / 50)
    if Gamma_e > 0:
        dt = min(dt, 0.01 / Gamma_e)
    return dt


@dataclass
class _Observer:
    system: SpinSystem
    nv_ref: SweepHamiltonian | None
    nuclear: dict[str, np.ndarray]

    @classmethod
    def for_hamiltonian(cls, H, system: SpinSystem) -> "_Observer":
        nv_ref = H.nv_reference() if isinstance(H, SweepHamiltonian) else None
        nuclear = {
            s.label: embed(2 * I_Z, system, s.label)
            for s in system.subsystems
            if s.role == "nuclear" and s.dim == 2
        }
        return cls(system, nv_ref, nuclear)

    def __call__(self, rho: np.ndarray, omega: float):
        tr = float(np.real(np.trace(rho)))
        pol = {k: float(np.real(np.einsum("ij,ji->", rho, op))) for k, op in self.nuclear.items()}
        if self.nv_ref is not None:
            rho_nv = partial_trace(rho, self.system, {self.system.nv.label})
            _, vecs = np.linalg.eigh(self.nv_ref(omega))
            pops = np.real(np.einsum("ia,ij,ja->a", vecs.conj(), rho_nv, vecs))
            p_minus, p_plus = float(pops[0]), float(pops[1])
        else:
            p_minus = p_plus = float("nan")
        return tr, purity(rho), p_plus, p_minus, pol


def _dephasing_mask(system: SpinSystem, Gamma_e: float, dt: float) -> np.ndarray:
    z = np.real(np.diag(embed(SIGMA_Z, system, system.nv.label)))
    same = z[:, None] == z[None, :]
    return np.where(same, 1.0, math.exp(-2 * Gamma_e * dt)).astype(complex)


def _propagate(
    H,
    system: SpinSystem,
    rho0: np.ndarray,
    omega_start: float,
    omega_end: float,
    v: float,
    Gamma_e: float,
    n_steps: int,
    stride: int,
    t0: float = 0.0,
    segment: int = 0,
) -> Trajectory:
    rate = v / 1000.0
    T = abs(omega_end - omega_start) / rate
    dt = T / n_steps
    sgn = math.copysign(1.0, omega_end - omega_start)
    observe = _Observer.for_hamiltonian(H, system)
    mask = _dephasing_mask(system, Gamma_e, dt) if Gamma_e > 0 else None

    rho = np.ascontiguousarray(rho0, dtype=complex)
    rows = []

    def record(k):
        om = omega_start + sgn * rate * k * dt
        rows.append((t0 + k * dt, om) + observe(rho, om))

    record(0)
    k = 0
    while k < n_steps:
        m = min(stride, n_steps - k)
        om_mid = omega_start + sgn * rate * (k + 0.5 + np.arange(m)) * dt
        Hs = _batch(H, om_mid)
        if mask is None:
            U, Ud = _kernels.half_step_propagators(Hs, dt)
            rho = _kernels.unitary_chunk(rho, U, Ud)
        else:
            U, Ud = _kernels.half_step_propagators(Hs, dt / 2)
            rho = _kernels.strang_chunk(rho, U, Ud, mask)
        k += m
        record(k)

    t, om, tr, pur, pp, pm, pol = zip(*rows)
    traj = Trajectory(
        t=np.array(t),
        omega=np.array(om),
        trace=np.array(tr),
        purity=np.array(pur),
        p_chi_plus=np.array(pp),
        p_chi_minus=np.array(pm),
        polarization={lab: np.array([p[lab] for p in pol]) for lab in observe.nuclear},
        segment=np.full(len(t), segment, dtype=int),
        final_state=rho,
        dt=dt,
    )
    drift = float(np.max(np.abs(traj.trace - 1)))
    if drift > TRACE_TOL:
        raise NumericalContractError(f"trace drifted by {drift:.3g} (> {TRACE_TOL})")
    return traj


def _sample_difference(a: Trajectory, b: Trajectory) -> float:
    if not a.polarization:
        return float(np.max(np.abs(a.p_chi_minus - b.p_chi_minus)))
    return max(float(np.max(np.abs(a.polarization[k] - b.polarization[k]))) for k in a.polarization)


def with_step_doubling(run, dt0: float, tol: float = STEP_DOUBLING_TOL, max_refine: int = 3):
    """Compare ``run(dt, 1)`` with ``run(dt, 2)`` (half the step); refine ``dt`` until they agree.

    ``run(dt, factor)`` must return a :class:`Trajectory` sampled at times that
    do not depend on ``factor``. Returns the coarse trajectory of the first
    passing pair, annotated with the observed difference.
    """
    dt = dt0
    for _ in range(max_refine + 1):
        coarse = run(dt, 1)
        fine = run(dt, 2)
        err = _sample_difference(coarse, fine)
        log.debug("step doubling at dt=%.4g: max sample change %.3g", dt, err)
        if err < tol:
            coarse.step_doubling_error = err
            coarse.meta["dt_target"] = dt
            return coarse
        dt /= 2
    raise StepSizeError(f"halving dt changed samples by {err:.3g} (> {tol})", dt)


def _steps(T: float, dt: float) -> int:
    return max(1, math.ceil(T / dt - 1e-9))


def propagate_sweep(
    H,
    rho0: np.ndarray,
    schedule: SweepSchedule,
    deph: DephasingSpec = DephasingSpec(),
    dt: float | str = "auto",
    stride: int = DEFAULT_STRIDE,
    system: SpinSystem | None = None,
) -> Trajectory:
    """Propagate ``rho0`` through one sweep ``omega_start -> omega_end``.

    ``H`` is a :class:`SweepHamiltonian` or any callable ``omega -> matrix``
    (then ``system`` is required). With ``dt="auto"`` the step is chosen by
    :func:`suggest_dt` and verified by step doubling; a numeric ``dt`` is
    used as given, rounded down so the sweep has an integer step count.
    """
    system = system or H.system
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (system.dim, system.dim):
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {(system.dim,) * 2}")
    T = schedule.duration

    def run(dt_, factor):
        n = _steps(T, dt_) * factor
        return _propagate(
            H, system, rho0, schedule.omega_start, schedule.omega_end, schedule.v,
            deph.Gamma_e, n, stride * factor,
        )

    if dt == "auto":
        dt0 = suggest_dt(H, schedule.omega_start, schedule.omega_end, schedule.v, deph.Gamma_e)
        return with_step_doubling(run, dt0)
    if not (isinstance(dt, (int, float)) and dt > 0):
        raise ValueError(f"dt must be positive or 'auto', got {dt!r}")
    return run(float(dt), 1)


def initial_state(H: SweepHamiltonian, schedule: SweepSchedule, p_nv: float = 1.0) -> np.ndarray:
    """NV in the reinit target at ``omega_start``; every other factor maximally mixed."""
    rho_nv = nv_state(H, schedule.omega_start, schedule.reinit_state, p_nv)
    system = H.system
    return reinit_nv(np.eye(system.dim, dtype=complex) / system.dim, system, rho_nv)


def _protocol_once(H, schedule, deph, n_steps_per_sweep, stride, p_nv, n_sweeps, rho0):
    system = H.system
    rho = initial_state(H, schedule, p_nv) if rho0 is None else np.asarray(rho0, dtype=complex)
    parts = []
    t0 = 0.0
    for seg, (w0, w1) in enumerate(schedule.sweeps(n_sweeps)):
        tr = _propagate(H, system, rho, w0, w1, schedule.v, deph.Gamma_e, n_steps_per_sweep, stride, t0, seg)
        rho = reinit_nv(tr.final_state, system, nv_state(H, w1, schedule.reinit_state, p_nv))
        tr.final_state = rho
        parts.append(tr)
        t0 = tr.t[-1]
    return Trajectory.concatenate(parts)


def run_protocol(
    H: SweepHamiltonian,
    schedule: SweepSchedule,
    deph: DephasingSpec = DephasingSpec(),
    dt: float | str = "auto",
    stride: int = DEFAULT_STRIDE,
    p_nv: float = 1.0,
    n_sweeps: int | None = None,
    rho0: np.ndarray | None = None,
) -> Trajectory:
    """Alternate sweeps with NV reinitialization.

    Each sweep starts with the NV in the reinit target (mixed with the
    identity according to ``p_nv``) and every other spin carried over. The
    reinit after the last sweep is applied to ``final_state`` only; the
    sampled observables are those at the end of each sweep. ``n_sweeps``
    overrides the default ``2 * cycles``.
    """
    T = schedule.duration

    def run(dt_, factor):
        n = _steps(T, dt_) * factor
        return _protocol_once(H, schedule, deph, n, stride * factor, p_nv, n_sweeps, rho0)

    if dt == "auto":
        dt0 = suggest_dt(H, schedule.omega_start, schedule.omega_end, schedule.v, deph.Gamma_e)
        return with_step_doubling(run, dt0)
    if not (isinstance(dt, (int, float)) and dt > 0):
        raise ValueError(f"dt must be positive or 'auto', got {dt!r}")
    return run(float(dt), 1)
