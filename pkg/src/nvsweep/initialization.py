"""Microwave initialization of randomly oriented NV centres.

A MW pulse drives ``|0> -> |+1>`` and ``|0> -> |-1>`` with detunings set by the
field component along the NV axis, the broadening ``delta_b`` and the
longitudinal strain ``E_z``. The drive projection ``Omega sin(phi)`` depends on
the unknown angle ``phi`` between MW field and NV axis, which is averaged over
the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import QuadratureError
from .sampling import DisorderModel, sample_disorder

DEFAULT_NODES = 64
MAX_NODES = 1024


@dataclass(frozen=True)
class MWConfig:
    """MW pulse and field parameters (MHz, us, rad).

    ``t_pulse`` defaults to a pi pulse, ``1 / (2 Omega)`` us for ``Omega`` in MHz.
    """

    Omega: float = 8.0
    omega: float = 6.0
    theta: float = 0.0
    delta_b: float = 0.0
    E_z: float = 0.0
    P_i: float = 1.0
    t_pulse: float | None = None

    def __post_init__(self):
        if not self.Omega > 0:
            raise ValueError(f"Omega must be positive, got {self.Omega}")
        if not 0 <= self.P_i <= 1:
            raise ValueError(f"P_i must lie in [0, 1], got {self.P_i}")
        if self.t_pulse is not None and not self.t_pulse > 0:
            raise ValueError(f"t_pulse must be positive, got {self.t_pulse}")

    @property
    def pulse(self) -> float:
        return self.t_pulse if self.t_pulse is not None else 1.0 / (2 * self.Omega)

    def with_(self, **kw) -> "MWConfig":
        return replace(self, **kw)


def detunings(omega, theta, delta_b, E_z):
    """Detunings of the ``0 -> +1`` and ``0 -> -1`` transitions."""
    c = np.cos(theta)
    plus = omega * c - omega + delta_b + E_z
    minus = -omega * (1 + c) + E_z - delta_b
    return plus, minus


def _rabi(drive, detuning, t):
    gen = drive**2 + detuning**2
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(gen > 0, drive**2 / np.where(gen > 0, gen, 1.0), 0.0)
    return amp * np.sin(np.pi * np.sqrt(gen) * t) ** 2


def transition_probs(cfg: MWConfig, phi):
    """Golden-rule probabilities ``(P_0->+1, P_0->-1)`` at MW angle ``phi``."""
    plus, minus = detunings(cfg.omega, cfg.theta, cfg.delta_b, cfg.E_z)
    drive = cfg.Omega * np.sin(phi)
    return _rabi(drive, plus, cfg.pulse), _rabi(drive, minus, cfg.pulse)


def _averaged(Omega, t, plus, minus, n):
    """Sphere averages for arrays of detunings, using ``n`` Gauss-Legendre nodes."""
    x, w = np.polynomial.legendre.leggauss(n)
    phi = (x + 1) * np.pi / 2
    weight = 0.5 * w * (np.pi / 2) * np.sin(phi)
    drive = Omega * np.sin(phi)
    plus = np.asarray(plus, dtype=float)[..., None]
    minus = np.asarray(minus, dtype=float)[..., None]
    return _rabi(drive, plus, t) @ weight, _rabi(drive, minus, t) @ weight


def _converged_average(Omega, t, plus, minus, tol=1e-8):
    n = DEFAULT_NODES
    prev = _averaged(Omega, t, plus, minus, n)
    while True:
        nxt = _averaged(Omega, t, plus, minus, 2 * n)
        err = max(np.max(np.abs(nxt[0] - prev[0])), np.max(np.abs(nxt[1] - prev[1])))
        if err < tol:
            return prev if n == DEFAULT_NODES else nxt
        n *= 2
        if n >= MAX_NODES:
            raise QuadratureError(
                f"MW angle average not converged with {n} nodes (change {err:.3g}); "
                f"Omega={Omega}, t={t}"
            )
        prev = nxt


def averaged_transition_probs(cfg: MWConfig) -> tuple[float, float]:
    """``(1/2) int_0^pi P(phi) sin(phi) dphi`` for both transitions.

    Uses 64 Gauss-Legendre nodes, checked against 128; more nodes are added if
    the two disagree by 1e-8 or more.
    """
    plus, minus = detunings(cfg.omega, cfg.theta, cfg.delta_b, cfg.E_z)
    p, m = _converged_average(cfg.Omega, cfg.pulse, plus, minus)
    return float(p), float(m)


def nv_initial_polarization(
    cfg: MWConfig, disorder: DisorderModel | None = None, n_samples: int | None = None
) -> float:
    """``P_NV = P_i (Pbar_+1 - Pbar_-1)``, averaged over ``delta_b`` and ``E_z`` draws.

    Without ``disorder`` the values in ``cfg`` are used. Draws for ``delta_b``
    and ``E_z`` replace the corresponding fields of ``cfg``; ``theta`` is
    taken from ``cfg``.
    """
    if disorder is None:
        p, m = averaged_transition_probs(cfg)
        return cfg.P_i * (p - m)
    n = disorder.n_samples if n_samples is None else n_samples
    draws = [sample_disorder(disorder, k) for k in range(n)]
    db = np.array([d.get("delta_b", cfg.delta_b) for d in draws])
    ez = np.array([d.get("E_z", cfg.E_z) for d in draws])
    plus, minus = detunings(cfg.omega, cfg.theta, db, ez)
    p, m = _converged_average(cfg.Omega, cfg.pulse, plus, minus)
    return float(cfg.P_i * np.mean(p - m))


def polarization_vs_theta(cfg: MWConfig, thetas, disorder: DisorderModel | None = None) -> np.ndarray:
    """:func:`nv_initial_polarization` on a grid of field angles (same draws at every angle)."""
    return np.array([nv_initial_polarization(cfg.with_(theta=float(t)), disorder) for t in thetas])
