import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvsweep.hamiltonians import (
    BORON_11,
    NITROGEN_14,
    HyperfineParams,
    NVParams,
    P1Params,
    coupled_effective,
    dressed_basis,
    host_14N_eigenenergies,
    lab_frame_system,
    nv_eigensystem,
    nv_two_level,
    sweep_hamiltonian,
    with_host_14N,
    with_p1,
)
from nvsweep.spin import SIGMA_X, SpinSystem, Subsystem, is_hermitian

finite = st.floats(-10, 10, allow_nan=False)
positive = st.floats(0.01, 3)


def test_species_presets():
    assert BORON_11.I == 1.5 and BORON_11.Qbar == 2.9 and BORON_11.zeta == 0
    assert NITROGEN_14.Qbar == -5.01


def test_two_level_examples():
    assert np.allclose(nv_two_level(0, 0.4), 0.4 * SIGMA_X)
    assert np.allclose(nv_two_level(6, 0), np.diag([6, -6]))


def test_eigensystem_examples():
    wp, wm, eta = nv_eigensystem(3, 4)
    assert (wp, wm) == (5, -5) and np.isclose(eta, np.arcsin(0.8))
    wp, wm, eta = nv_eigensystem(0, 0.4)
    assert np.isclose(wp, 0.4) and np.isclose(eta, np.pi / 2)
    with pytest.raises(ValueError):
        nv_eigensystem(0, 0)


@settings(max_examples=50, deadline=None)
@given(finite, positive)
def test_eigensystem_matches_diagonalization(omega, e):
    h = nv_two_level(omega, e)
    assert is_hermitian(h)
    wp, wm, _ = nv_eigensystem(omega, e)
    assert np.allclose(np.linalg.eigvalsh(h), [wm, wp], atol=1e-12)


def test_coupled_uncoupled_diagonal():
    w = np.hypot(0.3, 0.4)
    h = coupled_effective(0.3, 0.4, 2.9, 0.0, 0.0)
    assert np.allclose(h, np.diag(np.diag(h)))
    expected = [w + 2.9 / 4, w - 2.9 / 4, -w + 2.9 / 4, -w - 2.9 / 4]
    assert np.allclose(np.diag(h).real, expected)


def test_coupled_zero_field_flip_element():
    h = coupled_effective(0.0, 0.4, 2.9, 0.047)
    # basis {chi+, chi-} x {up, down}: |chi-,up> = 2, |chi+,down> = 1
    assert np.isclose(abs(h[2, 1]), np.sqrt(3) * 0.047 / 2)


@settings(max_examples=50, deadline=None)
@given(finite, positive, st.floats(-6, 6), st.floats(0, 0.1), st.floats(-0.1, 0.1))
def test_dressed_rotation_matches_effective(omega, e, q, ax, az):
    species = BORON_11.__class__("x", 1.5, q)
    lab = lab_frame_system(NVParams(E_x=e), species, ax, az, omega)
    U = np.kron(dressed_basis(omega, e), np.eye(2))
    assert is_hermitian(coupled_effective(omega, e, q, ax, az))
    assert np.max(np.abs(U.conj().T @ lab @ U - coupled_effective(omega, e, q, ax, az))) < 1e-12


def test_lab_frame_zero_strain_diagonal():
    h = lab_frame_system(NVParams(), BORON_11, 0.0, 0.02, 1.3)
    assert np.allclose(h, np.diag(np.diag(h)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), finite)
def test_spectrum_depends_on_strain_magnitude_only(ex, ey, omega):
    a = lab_frame_system(NVParams(E_x=ex, E_y=ey), BORON_11, 0.047, 0.01, omega)
    b = lab_frame_system(NVParams(E_x=ey, E_y=ex), BORON_11, 0.047, 0.01, omega)
    assert np.allclose(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b), atol=1e-12)


@pytest.mark.parametrize("omega", np.linspace(-6, 6, 25))
def test_host_14N_closed_forms(omega):
    levels = host_14N_eigenenergies(omega, 0.4)
    numeric = np.linalg.eigvalsh(with_host_14N(omega, 0.4))
    assert np.max(np.abs(np.sort(list(levels.values())) - numeric)) < 1e-10


def test_host_14N_without_hyperfine():
    hf = HyperfineParams(A_par=0.0)
    w = np.hypot(1.1, 0.4)
    expected = sorted([w, -w, w + hf.Pbar, -w + hf.Pbar, w + hf.Pbar, -w + hf.Pbar])
    assert np.allclose(np.linalg.eigvalsh(with_host_14N(1.1, 0.4, hf)), expected)


def test_host_14N_mirror_symmetry():
    for omega in (0.3, 1.7, 4.0):
        a, b = host_14N_eigenenergies(omega, 0.4), host_14N_eigenenergies(-omega, 0.4)
        for s in (1, -1):
            assert np.isclose(a[(s, 1)], b[(s, -1)])


def test_p1_zero_couplings_leave_base():
    H = sweep_hamiltonian(0.4, p1=P1Params())
    assert np.allclose(with_p1(H.static, P1Params(), H.system), H.static)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10))
def test_p1_hermitian(g1, g2):
    H = sweep_hamiltonian(0.4, p1=P1Params())
    assert is_hermitian(with_p1(H.static, P1Params(g1, g2), H.system))


def test_p1_needs_subsystem():
    sys2 = SpinSystem([Subsystem("nv", 2, "nv"), Subsystem("11B", 2, "nuclear")])
    with pytest.raises(ValueError):
        with_p1(np.zeros((4, 4)), P1Params(1.0), sys2)
    with pytest.raises(ValueError):
        P1Params(g1=-1)


def test_sweep_hamiltonian_matches_lab_frame():
    H = sweep_hamiltonian(0.4, BORON_11, 0.047, 0.01)
    assert np.allclose(H(2.0), lab_frame_system(NVParams(E_x=0.4), BORON_11, 0.047, 0.01, 2.0))
    batch = H(np.array([0.0, 2.0]))
    assert np.allclose(batch[1], H(2.0))


def test_tilted_field():
    H = sweep_hamiltonian(0.4)
    T = H.tilted(np.pi / 3, 0.5)
    assert np.allclose(T(2.0), H(0.5 + 2.0 * np.cos(np.pi / 3)))


def test_nv_reference_is_two_level():
    H = sweep_hamiltonian(0.4, host=HyperfineParams())
    ref = H.nv_reference()(1.5)
    # identity offsets from traced-out terms do not change the NV eigenvectors
    assert np.allclose(ref - np.trace(ref) / 2 * np.eye(2), nv_two_level(1.5, 0.4))
