"""Independent reference computations used by the tests."""

import numpy as np
from scipy.optimize import minimize_scalar

from nvsweep.hamiltonians import coupled_effective

# Lanczos approximation, g = 7, n = 9 (Numerical Recipes / Godfrey coefficients)
_LANCZOS_G = 7
_LANCZOS = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
]


def lanczos_loggamma(z: complex) -> complex:
    """log Gamma(z) for Re z > 0.5, principal branch continued along the real axis."""
    z = complex(z) - 1
    x = _LANCZOS[0]
    for i in range(1, _LANCZOS_G + 2):
        x += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * np.log(2 * np.pi) + (z + 0.5) * np.log(t) - t + np.log(x)


def stokes_phase_oracle(mu: float) -> float:
    if mu == 0:
        return -np.pi / 4
    return -np.pi / 4 + mu * (np.log(mu) - 1) + lanczos_loggamma(1 - 1j * mu).imag


def middle_gap(omega, E_perp, Qbar, a_x, a_z=0.0):
    e = np.linalg.eigvalsh(coupled_effective(omega, E_perp, Qbar, a_x, a_z))
    return e[2] - e[1]


def min_gap_location(E_perp, Qbar, a_x, guess, width=0.2):
    """Field of the smallest splitting of the two middle levels near ``guess``."""
    res = minimize_scalar(
        lambda w: middle_gap(w, E_perp, Qbar, a_x),
        bounds=(guess - width, guess + width),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x), float(res.fun)


def truncated_gaussian_std(sigma, lo, hi):
    """Standard deviation of N(0, sigma) restricted to [lo, hi], from the closed-form moments."""
    from scipy.stats import norm

    a, b = lo / sigma, hi / sigma
    Z = norm.cdf(b) - norm.cdf(a)
    m1 = (norm.pdf(a) - norm.pdf(b)) / Z
    m2 = 1 + (a * norm.pdf(a) - b * norm.pdf(b)) / Z
    return sigma * np.sqrt(m2 - m1**2)


def sphere_average_trapezoid(f, n=10_001):
    """(1/2) int_0^pi f(phi) sin(phi) dphi by the trapezoid rule."""
    phi = np.linspace(0, np.pi, n)
    return float(np.trapezoid(f(phi) * np.sin(phi), phi) / 2)


def isolated_crossing_transfer(a_x, E_perp, v, Qbar=2.9, omega_end=6.0):
    """Numerically propagated population moved ``|chi_-,up> -> |chi_+,down>`` through
    the positive-field crossing only.

    The sweep starts at zero field in the eigenstate of the coupled Hamiltonian
    closest to ``|chi_->|up>``, so no population is set in motion by switching
    on the coupling.
    """
    from nvsweep.dynamics import SweepSchedule, propagate_sweep
    from nvsweep.hamiltonians import NuclearSpecies, sweep_hamiltonian

    species = NuclearSpecies("X", 1.5, Qbar)
    H = sweep_hamiltonian(E_perp, species, a_x)
    _, nv0 = np.linalg.eigh(H.nv_reference()(0.0))
    start = np.kron(nv0[:, 0], [1, 0])
    _, vecs = np.linalg.eigh(H(0.0))
    psi0 = vecs[:, np.argmax(np.abs(vecs.conj().T @ start))]
    tr = propagate_sweep(H, np.outer(psi0, psi0.conj()), SweepSchedule(0.0, omega_end, v))
    _, nv1 = np.linalg.eigh(H.nv_reference()(omega_end))
    target = np.kron(nv1[:, 1], [0, 1])
    return float(np.real(target.conj() @ tr.final_state @ target)), tr
