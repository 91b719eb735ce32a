"""Disorder-averaged polarization transfer and the bulk polarization estimate."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    DEFAULT_STRIDE,
    DephasingSpec,
    SweepSchedule,
    Trajectory,
    _steps,
    run_protocol,
    suggest_dt,
    with_step_doubling,
)
from .hamiltonians import BORON_11, HyperfineParams, NuclearSpecies, P1Params, sweep_hamiltonian
from .initialization import MWConfig, nv_initial_polarization
from .lz import double_passage, lz_point
from .sampling import DisorderModel, TruncatedGaussian, sample_disorder

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransferScenario:
    """One NV + target nucleus polarization protocol.

    ``init`` switches on the MW initialization model: each sample then starts
    from an NV state weighted by its own ``P_NV``. Without it the NV is fully
    initialized.
    """

    species: NuclearSpecies = BORON_11
    a_x: float = 0.047
    a_z: float = 0.0
    E_perp: float = 0.4
    schedule: SweepSchedule = field(default_factory=SweepSchedule)
    T2: float = 10.0
    host: HyperfineParams | None = None
    p1: P1Params | None = None
    n_sweeps: int | None = None
    stride: int = DEFAULT_STRIDE
    init: MWConfig | None = None

    def with_(self, **kw) -> "TransferScenario":
        return replace(self, **kw)

    def hamiltonian(self, E_perp: float | None = None, theta: float = 0.0, delta_b: float = 0.0):
        H = sweep_hamiltonian(
            self.E_perp if E_perp is None else E_perp,
            self.species, self.a_x, self.a_z, self.host, self.p1,
        )
        return H.tilted(theta, delta_b) if (theta or delta_b) else H

    def sample_setup(self, draw: dict) -> tuple:
        H = self.hamiltonian(draw.get("E_perp"), draw.get("theta", 0.0), draw.get("delta_b", 0.0))
        p_nv = 1.0
        if self.init is not None:
            cfg = self.init.with_(
                theta=draw.get("theta", 0.0),
                delta_b=draw.get("delta_b", self.init.delta_b),
                E_z=draw.get("E_z", self.init.E_z),
            )
            p_nv = nv_initial_polarization(cfg)
        return H, p_nv

    def run(self, H, p_nv: float, dt) -> Trajectory:
        return run_protocol(
            H, self.schedule, DephasingSpec.from_T2(self.T2), dt=dt, stride=self.stride,
            p_nv=p_nv, n_sweeps=self.n_sweeps,
        )


@dataclass
class EnsembleResult:
    t: np.ndarray
    omega: np.ndarray
    segment: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    finals: np.ndarray
    draws: list[dict]
    label: str
    dt: float
    step_doubling_error: float
    max_trace_drift: float

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t_us": self.t,
            "omega_MHz": self.omega,
            f"mean_pol_{self.label}": self.mean,
            f"stderr_pol_{self.label}": self.stderr,
        }

    def segment_end_mean(self) -> np.ndarray:
        ends = np.flatnonzero(np.diff(self.segment, append=self.segment[-1] + 1))
        return self.mean[ends]


def _common_dt(scenario: TransferScenario, setups) -> float:
    s = scenario.schedule
    gamma = DephasingSpec.from_T2(scenario.T2).Gamma_e
    return min(suggest_dt(H, s.omega_start, s.omega_end, s.v, gamma) for H, _ in setups)


def averaged_transfer(
    scenario: TransferScenario,
    model: DisorderModel,
    threads: int | None = None,
    dt: float | str = "auto",
    n_samples: int | None = None,
) -> EnsembleResult:
    """Mean and standard error of the target polarization over disorder draws.

    Every sample uses the same step size. With ``dt="auto"`` it is the
    smallest :func:`suggest_dt` over the samples, verified by step doubling
    on sample 0. Results are collected in sample order, so the output does not
    depend on ``threads``.
    """
    n = model.n_samples if n_samples is None else n_samples
    draws = [sample_disorder(model, k) for k in range(n)]
    setups = [scenario.sample_setup(d) for d in draws]

    first = None
    if dt == "auto":
        H0, p0 = setups[0]
        first = with_step_doubling(lambda d, f: _scaled_run(scenario, H0, p0, d, f), _common_dt(scenario, setups))
        dt_used = first.meta["dt_target"]
    else:
        dt_used = float(dt)

    def work(k):
        if k == 0 and first is not None:
            return first
        H, p = setups[k]
        return scenario.run(H, p, dt_used)

    workers = threads or os.cpu_count() or 1
    if workers == 1 or n == 1:
        trajs = [work(k) for k in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(work, range(n)))

    label = scenario.species.name
    pols = np.stack([tr.polarization[label] for tr in trajs])
    mean = pols.mean(axis=0)
    stderr = pols.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    ref = trajs[0]
    return EnsembleResult(
        t=ref.t,
        omega=ref.omega,
        segment=ref.segment,
        mean=mean,
        stderr=stderr,
        finals=pols[:, -1].copy(),
        draws=draws,
        label=label,
        dt=ref.dt,
        step_doubling_error=ref.step_doubling_error,
        max_trace_drift=max(float(np.max(np.abs(tr.trace - 1))) for tr in trajs),
    )


def _scaled_run(scenario, H, p_nv, dt, factor):
    # halve dt and double the stride together so the sample times coincide
    T = scenario.schedule.duration
    dt_exact = T / _steps(T, dt)
    sc = scenario.with_(stride=scenario.stride * factor)
    return sc.run(H, p_nv, dt_exact / factor)


@dataclass(frozen=True)
class BulkEstimateInputs:
    """Densities in um^-3, cycle time in s, polarization rate ``P_1`` in 1/s."""

    rho_NV: float = 1.6e4
    rho_n: float = 1.6e10
    T_o: float = 100.0
    P_1: float = 0.17 / 0.2e-3

    def __post_init__(self):
        for name in ("rho_NV", "rho_n", "T_o"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.P_1 >= 0:
            raise ValueError("P_1 must be non-negative")


def bulk_polarization(inputs: BulkEstimateInputs) -> float:
    """Steady polarized fraction ``rho_NV T_o P_1 / rho_n``."""
    return inputs.rho_NV * inputs.T_o * inputs.P_1 / inputs.rho_n


def rate_from_ensemble(result: EnsembleResult, cycle_time_us: float) -> float:
    """Polarization rate (1/s) from the mean polarization at the end of the first segment."""
    return abs(float(result.segment_end_mean()[0])) / (cycle_time_us * 1e-6)


def lz_polarization_rate(
    a_x: float,
    Qbar: float,
    v: float,
    sweep_time_us: float,
    e_perp: TruncatedGaussian,
    n_samples: int = 300,
    seed: int = 0,
) -> float:
    """Polarization gained per second from the phase-averaged double-passage
    probability, averaged over strain draws.

    An unpolarized nucleus ends a sweep with polarization of magnitude ``P_l``,
    so the rate is ``<P_l> / sweep_time``.
    """
    model = DisorderModel(params={"E_perp": e_perp}, n_samples=n_samples, seed=seed)
    total = 0.0
    for k in range(n_samples):
        pt = lz_point(a_x, sample_disorder(model, k)["E_perp"], v, Qbar)
        if pt is not None:
            total += double_passage(pt.p_l, "averaged")
    return total / n_samples / (sweep_time_us * 1e-6)
