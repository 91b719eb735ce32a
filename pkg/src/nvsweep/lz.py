"""Landau-Zener and double-passage formulas for the NV--nucleus avoided crossings.

Sweep rates ``v`` are given in MHz/ms, as in the scenario files, and converted
to MHz/us here. Because frequencies are ordinary (not angular) MHz values, the
adiabatic parameter carries an explicit factor 2 pi.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import loggamma

from .hamiltonians import nv_eigensystem

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class LZPoint:
    mu: float
    p_l: float
    phi_s: float
    omega_res: float
    gap: float


def adiabatic_parameter(a_x: float, eta: float, v: float) -> float:
    """Adiabatic parameter of the ``|chi_-,up> <-> |chi_+,down>`` crossing.

    ``mu = 2 pi (sqrt3 a_x sin(eta) / 2)^2 / |2 v cos(eta)|``, with ``v`` in MHz/ms.
    The diabatic (Landau-Zener) probability is ``exp(-2 pi mu)``.
    """
    cos_eta = np.cos(eta)
    if abs(cos_eta) < 1e-12:
        raise ValueError("adiabatic parameter is singular at cos(eta) = 0 (zero-field crossing)")
    if v == 0:
        raise ValueError("sweep rate must be non-zero")
    rate = abs(2 * (v / 1000.0) * cos_eta)  # MHz/us
    half_gap = SQRT3 * a_x * np.sin(eta) / 2
    return float(2 * np.pi * half_gap**2 / rate)


def lz_probability(mu) -> np.ndarray | float:
    """Single-passage diabatic probability ``exp(-2 pi mu)``."""
    return np.exp(-2 * np.pi * np.asarray(mu, dtype=float))


def stokes_phase(mu):
    """``-pi/4 + mu (ln mu - 1) + arg Gamma(1 - i mu)``, continuous at ``mu = 0``."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mu must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(mu > 0, mu * (np.log(np.where(mu > 0, mu, 1.0)) - 1), 0.0)
    out = -np.pi / 4 + log_term + np.imag(loggamma(1 - 1j * mu))
    return float(out) if out.ndim == 0 else out


def double_passage(p_l, Phi: float | str = "averaged"):
    """Transfer probability after two crossings.

    ``P = 4 p_l (1 - p_l)`` is the interference envelope. With a numeric phase
    ``Phi`` the result is ``P sin^2(Phi)``; ``"averaged"`` returns ``P / 2``.
    """
    p_l = np.asarray(p_l, dtype=float)
    if np.any((p_l < 0) | (p_l > 1)):
        raise ValueError("p_l must lie in [0, 1]")
    envelope = 4 * p_l * (1 - p_l)
    if isinstance(Phi, str):
        if Phi != "averaged":
            raise ValueError(f"Phi must be a number or 'averaged', got {Phi!r}")
        out = envelope / 2
    else:
        out = envelope * np.sin(Phi) ** 2
    return float(out) if out.ndim == 0 else out


def hartmann_hahn(Qbar: float, E_perp: float) -> tuple[float, ...]:
    """Field values where the dressed NV splitting matches the nuclear one.

    Returns ``(-w, w)`` with ``w = sqrt((|Q|/4)^2 - E_perp^2)``, ``(0.0,)`` when
    the two are equal and ``()`` when there is no crossing.
    """
    q4 = abs(Qbar) / 4
    e = abs(E_perp)
    if np.isclose(e, q4, rtol=0, atol=1e-12):
        return (0.0,)
    if e > q4:
        return ()
    w = float(np.sqrt(q4**2 - e**2))
    return (-w, w)


def lz_point(a_x: float, E_perp: float, v: float, Qbar: float) -> LZPoint | None:
    """LZ quantities at the positive-field crossing, or ``None`` without a usable crossing."""
    roots = hartmann_hahn(Qbar, E_perp)
    if len(roots) != 2:
        return None
    w_res = roots[1]
    _, _, eta = nv_eigensystem(w_res, E_perp)
    mu = adiabatic_parameter(a_x, eta, v)
    return LZPoint(
        mu=mu,
        p_l=float(lz_probability(mu)),
        phi_s=stokes_phase(mu),
        omega_res=w_res,
        gap=float(SQRT3 * a_x * np.sin(eta)),
    )


def transfer_map(
    ax_grid: Sequence[float], eperp_grid: Sequence[float], v: float, Qbar: float
) -> np.ndarray:
    """Envelope ``P = 4 p_l (1 - p_l)`` on an ``(a_x, E_perp)`` grid; zero where no crossing."""
    ax_grid = np.atleast_1d(np.asarray(ax_grid, dtype=float))
    eperp_grid = np.atleast_1d(np.asarray(eperp_grid, dtype=float))
    if ax_grid.size == 0 or eperp_grid.size == 0:
        raise ValueError("grids must be non-empty")
    out = np.zeros((ax_grid.size, eperp_grid.size))
    for j, e in enumerate(eperp_grid):
        for i, a in enumerate(ax_grid):
            pt = lz_point(a, e, v, Qbar)
            if pt is not None:
                out[i, j] = 4 * pt.p_l * (1 - pt.p_l)
    return out


def write_transfer_map(path, ax_grid, eperp_grid, P, precision: int = 6) -> None:
    """CSV with a header row of ``E_perp`` values and ``a_x`` in the first column."""
    fmt = f"{{:.{precision}g}}"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a_x\\E_perp"] + [fmt.format(e) for e in eperp_grid])
        for a, row in zip(ax_grid, P):
            w.writerow([fmt.format(a)] + [fmt.format(p) for p in row])
