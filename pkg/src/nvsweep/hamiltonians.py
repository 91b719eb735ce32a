"""Hamiltonians for an NV centre in its {|+1>, |-1>} manifold coupled to
quadrupolar nuclei near zero field.

Conventions
-----------
* NV basis ``{|m_s=+1>, |m_s=-1>}``; ``sigma_z`` has eigenvalues +1/-1.
* Effective nuclear pseudo-spin basis ``{|up>, |down>}`` with ``|up> = |m_I=+-3/2>``
  and ``|down> = |m_I=+-1/2>`` for 11B. ``I_z~`` and ``I_x~`` are half Pauli matrices.
* Rotated (dressed) NV operators ``sigma_z~``/``sigma_x~`` are also half Pauli
  matrices, in the basis ``{|chi_+>, -|chi_->}``. The sign on ``|chi_->`` makes
  the change of basis from :func:`lab_frame_system` reproduce the coupling
  ``2 (sigma_z~ cos eta - sigma_x~ sin eta)`` exactly; it is a phase choice and
  has no physical consequence.
* Frequencies are ordinary MHz values (the "(2 pi) x" is implicit).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spin import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SpinSystem,
    Subsystem,
    embed,
    embed_many,
    partial_trace,
    spin_operators,
)

SQRT3 = np.sqrt(3.0)

I_X = SIGMA_X / 2
I_Y = SIGMA_Y / 2
I_Z = SIGMA_Z / 2


@dataclass(frozen=True)
class NVParams:
    """NV centre parameters in MHz / us / nm."""

    D: float = 2870.0
    E_z: float = 0.0
    E_x: float = 0.0
    E_y: float = 0.0
    T2: float = np.inf
    d_NV: float = 2.0

    def __post_init__(self):
        if not self.T2 > 0:
            raise ValueError(f"T2 must be positive, got {self.T2}")

    @property
    def E_perp(self) -> float:
        return float(np.hypot(self.E_x, self.E_y))


@dataclass(frozen=True)
class NuclearSpecies:
    name: str
    I: float
    Qbar: float
    zeta: float = 0.0
    gamma_n: float = 0.0  # MHz/T
    abundance: float = 1.0
    # degeneracy of the (|up>, |down>) effective levels, for reporting only
    degeneracy: tuple[int, int] = (2, 2)


BORON_11 = NuclearSpecies("11B", I=1.5, Qbar=2.9, zeta=0.0, gamma_n=13.66, abundance=0.8)
NITROGEN_14 = NuclearSpecies(
    "14N", I=1.0, Qbar=-5.01, zeta=0.0, gamma_n=3.077, abundance=0.996, degeneracy=(2, 1)
)
SPECIES = {"11B": BORON_11, "14N": NITROGEN_14}


@dataclass(frozen=True)
class HyperfineParams:
    """Host 14N hyperfine and quadrupole constants (MHz)."""

    A_par: float = -2.14
    A_perp: float = -2.7
    Pbar: float = -5.01


@dataclass(frozen=True)
class P1Params:
    g1: float = 0.0
    g2: float = 0.0
    alpha1: float = np.pi / 4
    phi1: float = np.pi / 4
    alpha2: float = np.pi / 4
    phi2: float = np.pi / 4

    def __post_init__(self):
        if self.g1 < 0 or self.g2 < 0:
            raise ValueError("P1 dipolar constants g1, g2 must be non-negative")


def nv_two_level(omega: float, E_perp: float) -> np.ndarray:
    """``omega * sigma_z + E_perp * sigma_x`` on ``{|+1>, |-1>}``."""
    return omega * SIGMA_Z + E_perp * SIGMA_X


def nv_eigensystem(omega: float, E_perp: float) -> tuple[float, float, float]:
    """Return ``(w_plus, w_minus, eta)`` of :func:`nv_two_level`.

    ``eta = atan2(E_perp, omega)``, so ``sin eta = E_perp / w_plus`` and
    ``cos eta = omega / w_plus``; ``eta`` lies in [0, pi] for ``E_perp >= 0``.
    """
    w = float(np.hypot(omega, E_perp))
    if w == 0.0:
        raise ValueError("NV levels are degenerate at omega = E_perp = 0")
    return w, -w, float(np.arctan2(E_perp, omega))


def nv_eigenvectors(omega: float, E_perp: float) -> tuple[np.ndarray, np.ndarray]:
    """``|chi_+> = cos(eta/2)|+1> + sin(eta/2)|-1>``, ``|chi_-> = sin(eta/2)|+1> - cos(eta/2)|-1>``."""
    _, _, eta = nv_eigensystem(omega, E_perp)
    c, s = np.cos(eta / 2), np.sin(eta / 2)
    return np.array([c, s], dtype=complex), np.array([s, -c], dtype=complex)


def dressed_basis(omega: float, E_perp: float) -> np.ndarray:
    """Unitary with columns ``|chi_+>`` and ``-|chi_->`` (lab components)."""
    chi_p, chi_m = nv_eigenvectors(omega, E_perp)
    return np.column_stack([chi_p, -chi_m])


def coupled_effective(omega, E_perp, Qbar, a_x, a_z=0.0) -> np.ndarray:
    """NV--nucleus Hamiltonian in the dressed basis ``{chi_+, chi_-} x {up, down}``.

    ``H = w_e sz~ + (Q/2) Iz~ + 2 (sz~ cos eta - sx~ sin eta)(sqrt3 a_x Ix~ + 2 a_z Iz~)``
    with ``w_e = 2 sqrt(omega^2 + E_perp^2)``.
    """
    w, _, eta = nv_eigensystem(omega, E_perp)
    sz_t, sx_t = SIGMA_Z / 2, SIGMA_X / 2
    nuc = SQRT3 * a_x * I_X + 2 * a_z * I_Z
    return (
        2 * w * np.kron(sz_t, np.eye(2))
        + Qbar / 2 * np.kron(np.eye(2), I_Z)
        + 2 * np.kron(sz_t * np.cos(eta) - sx_t * np.sin(eta), nuc)
    )


def _nv_nuclear_static(E_perp, Qbar, a_x, a_z) -> np.ndarray:
    return (
        E_perp * np.kron(SIGMA_X, np.eye(2))
        + Qbar / 2 * np.kron(np.eye(2), I_Z)
        + np.kron(SIGMA_Z, SQRT3 * a_x * I_X + 2 * a_z * I_Z)
    )


def lab_frame_system(nv: NVParams, species: NuclearSpecies, a_x, a_z, omega) -> np.ndarray:
    """NV--nucleus Hamiltonian in the fixed ``{|+1>, |-1>} x {up, down}`` basis.

    ``H = E_perp sx + omega sz + (Q/2) Iz~ + sz (sqrt3 a_x Ix~ + 2 a_z Iz~)``.
    Rotating the NV factor with :func:`dressed_basis` gives :func:`coupled_effective`.
    """
    return omega * np.kron(SIGMA_Z, np.eye(2)) + _nv_nuclear_static(nv.E_perp, species.Qbar, a_x, a_z)


def with_host_14N(omega, E_perp, hf: HyperfineParams = HyperfineParams()) -> np.ndarray:
    """NV (2) x host 14N (3) Hamiltonian ``E sx + w sz + P Iz'^2 + A_par sz Iz'``."""
    _, _, iz = spin_operators(1)
    return (
        np.kron(nv_two_level(omega, E_perp), np.eye(3))
        + hf.Pbar * np.kron(np.eye(2), iz @ iz)
        + hf.A_par * np.kron(SIGMA_Z, iz)
    )


def host_14N_eigenenergies(omega, E_perp, hf: HyperfineParams = HyperfineParams()) -> dict:
    """Closed-form levels of :func:`with_host_14N`, keyed by ``(chi sign, m_I)``."""
    out = {}
    for m, shift in ((0, 0.0), (1, hf.Pbar), (-1, hf.Pbar)):
        r = np.hypot(omega + m * hf.A_par, E_perp)
        out[(+1, m)] = r + shift
        out[(-1, m)] = -r + shift
    return out


def _unit(alpha, phi):
    return np.array([np.sin(alpha) * np.cos(phi), np.sin(alpha) * np.sin(phi), np.cos(alpha)])


def _dipolar(a_ops, b_ops, rhat, system, a_site, b_site):
    a_r = sum(r * op for r, op in zip(rhat, a_ops))
    b_r = sum(r * op for r, op in zip(rhat, b_ops))
    out = 3 * embed_many({a_site: a_r, b_site: b_r}, system)
    for a, b in zip(a_ops, b_ops):
        out = out - embed_many({a_site: a, b_site: b}, system)
    return out


def with_p1(base: np.ndarray, p1: P1Params, system: SpinSystem) -> np.ndarray:
    """Add NV--P1 and nucleus--P1 dipolar couplings to ``base``.

    Spin vectors are projected onto the effective two-level spaces: the NV
    spin becomes ``(0, 0, sigma_z)`` (S_x, S_y have no matrix elements inside
    ``{|+1>, |-1>}``), the nucleus ``(sqrt3 Ix~, sqrt3 Iy~, 2 Iz~)``, and the P1
    electron keeps its spin-1/2 operators. No P1 Zeeman term is added.
    """
    p1_subs = system.with_role("p1")
    if not p1_subs:
        raise ValueError("system has no P1 subsystem")
    p1_site = p1_subs[0].label
    nv_site = system.nv.label
    s_nv = (np.zeros((2, 2), complex), np.zeros((2, 2), complex), SIGMA_Z)
    s_p1 = (I_X, I_Y, I_Z)
    out = np.array(base, dtype=complex)
    out = out + p1.g1 * _dipolar(s_nv, s_p1, _unit(p1.alpha1, p1.phi1), system, nv_site, p1_site)
    nuclei = system.with_role("nuclear")
    if nuclei and p1.g2:
        i_eff = (SQRT3 * I_X, SQRT3 * I_Y, 2 * I_Z)
        out = out + p1.g2 * _dipolar(
            s_p1, i_eff, _unit(p1.alpha2, p1.phi2), system, p1_site, nuclei[0].label
        )
    return out


@dataclass(frozen=True)
class SweepHamiltonian:
    """Field-swept Hamiltonian ``H(omega) = static + omega * field``.

    ``gap`` optionally records the smallest avoided-crossing gap (MHz) that a
    sweep must resolve; it feeds the automatic step size.
    """

    system: SpinSystem
    static: np.ndarray
    field: np.ndarray
    gap: float | None = None

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if omega.ndim == 0:
            return self.static + float(omega) * self.field
        return self.static[None] + omega[:, None, None] * self.field[None]

    def tilted(self, theta: float = 0.0, delta_b: float = 0.0) -> "SweepHamiltonian":
        """Field at angle ``theta`` to the NV axis plus a static offset ``delta_b``.

        The NV sees ``(delta_b + omega cos theta) sigma_z``.
        """
        return SweepHamiltonian(
            self.system, self.static + delta_b * self.field, np.cos(theta) * self.field, self.gap
        )

    def nv_reference(self) -> "SweepHamiltonian":
        """The NV-only part, obtained by tracing out every other factor."""
        nv = self.system.nv
        rest = self.system.dim // nv.dim
        sys2 = SpinSystem([nv])
        # partial_trace of an operator / dim(rest) is the NV restriction of its mean
        st = partial_trace(self.static, self.system, {nv.label}) / rest
        fd = partial_trace(self.field, self.system, {nv.label}) / rest
        return SweepHamiltonian(sys2, st, fd)


def sweep_hamiltonian(
    E_perp: float,
    species: NuclearSpecies = BORON_11,
    a_x: float = 0.047,
    a_z: float = 0.0,
    host: HyperfineParams | None = None,
    p1: P1Params | None = None,
) -> SweepHamiltonian:
    """Lab-frame NV + target nucleus model, optionally with host 14N and a P1 centre."""
    subs = [Subsystem("nv", 2, "nv"), Subsystem(species.name, 2, "nuclear")]
    if host is not None:
        subs.append(Subsystem("host14N", 3, "host-14n"))
    if p1 is not None:
        subs.append(Subsystem("p1", 2, "p1"))
    system = SpinSystem(subs)
    nv, nuc = "nv", species.name
    static = (
        E_perp * embed(SIGMA_X, system, nv)
        + species.Qbar / 2 * embed(I_Z, system, nuc)
        + embed_many({nv: SIGMA_Z, nuc: SQRT3 * a_x * I_X + 2 * a_z * I_Z}, system)
    )
    if host is not None:
        _, _, iz = spin_operators(1)
        static = static + host.Pbar * embed(iz @ iz, system, "host14N")
        static = static + host.A_par * embed_many({nv: SIGMA_Z, "host14N": iz}, system)
    if p1 is not None:
        static = with_p1(static, p1, system)
    gap = None
    wres2 = (abs(species.Qbar) / 4) ** 2 - E_perp**2
    if a_x > 0 and wres2 > 0:
        gap = SQRT3 * a_x * E_perp / (abs(species.Qbar) / 4) if E_perp > 0 else None
    return SweepHamiltonian(system, static, embed(SIGMA_Z, system, nv), gap)


HamiltonianBuilder = Callable[[float], np.ndarray]
