"""Compiled inner loops for density-matrix propagation."""

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def unitary_chunk(rho, U, Ud):
    """Apply ``rho <- U[k] rho U[k]^dagger`` for k = 0..n-1."""
    for k in range(U.shape[0]):
        rho = U[k] @ rho @ Ud[k]
    return rho


@nb.njit(cache=True, nogil=True)
def strang_chunk(rho, U, Ud, mask):
    """Half-step unitary, dephasing mask, half-step unitary, for each k.

    ``U`` holds half-step propagators; ``mask`` multiplies matrix elements
    elementwise and encodes the exact dephasing channel over a full step.
    """
    for k in range(U.shape[0]):
        rho = U[k] @ rho @ Ud[k]
        rho = rho * mask
        rho = U[k] @ rho @ Ud[k]
    return rho


def half_step_propagators(H: np.ndarray, tau: float):
    """Batched ``exp(-i 2 pi H tau)`` and its adjoint, both C-contiguous."""
    w, v = np.linalg.eigh(H)
    U = (v * np.exp(-2j * np.pi * tau * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return np.ascontiguousarray(U), np.ascontiguousarray(np.conj(np.swapaxes(U, -1, -2)))
