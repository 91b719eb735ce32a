import numpy as np
import pytest

from nvsweep.dynamics import (
    DephasingSpec,
    StepSizeError,
    SweepSchedule,
    Trajectory,
    initial_state,
    nuclear_polarization,
    nv_state,
    propagate_sweep,
    reinit_nv,
    run_protocol,
    suggest_dt,
    with_step_doubling,
)
from nvsweep.hamiltonians import HyperfineParams, P1Params, sweep_hamiltonian
from nvsweep.lz import lz_point
from nvsweep.spin import SpinSystem, Subsystem, partial_trace, product_state, purity
from oracles import isolated_crossing_transfer

def random_density(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


UP = np.diag([1.0, 0.0])
DOWN = np.diag([0.0, 1.0])


@pytest.fixture(scope="module")
def fig1e_runs():
    H = sweep_hamiltonian(0.4)
    return {T2: run_protocol(H, SweepSchedule(), DephasingSpec.from_T2(T2)) for T2 in (10.0, 0.4)}


def test_schedule_basics():
    s = SweepSchedule(-6, 6, 30, cycles=2)
    assert s.rate == 0.03 and s.duration == pytest.approx(400.0)
    assert s.sweeps() == [(-6, 6), (6, -6)] * 2
    for bad in (dict(omega_end=-6), dict(v=0), dict(cycles=0), dict(reinit_state="up")):
        with pytest.raises(ValueError):
            SweepSchedule(**bad)


def test_dephasing_spec():
    assert DephasingSpec.from_T2(np.inf).Gamma_e == 0
    assert DephasingSpec.from_T2(4.0).Gamma_e == 0.25
    with pytest.raises(ValueError):
        DephasingSpec(-1.0)


def test_nuclear_polarization_examples():
    H = sweep_hamiltonian(0.4)
    sys2 = H.system
    mixed = np.eye(4) / 4
    assert nuclear_polarization(mixed, sys2, "11B") == 0
    up = product_state({"nv": np.eye(2) / 2, "11B": UP}, sys2)
    down = product_state({"nv": np.eye(2) / 2, "11B": DOWN}, sys2)
    assert nuclear_polarization(up, sys2, "11B") == pytest.approx(1)
    assert nuclear_polarization(down, sys2, "11B") == pytest.approx(-1)
    with pytest.raises(ValueError):
        nuclear_polarization(mixed, sys2, "nv")


def test_nv_state_partial_and_negative():
    H = sweep_hamiltonian(0.4)
    full = nv_state(H, -6.0)
    assert purity(full) == pytest.approx(1)
    # at -6 MHz chi_- is mostly |+1>
    assert full[0, 0].real > 0.99
    half = nv_state(H, -6.0, p_nv=0.5)
    assert np.allclose(half, 0.5 * full + 0.25 * np.eye(2))
    assert np.allclose(nv_state(H, -6.0, p_nv=-1), nv_state(H, -6.0, "chi_plus"))
    with pytest.raises(ValueError):
        nv_state(H, -6.0, p_nv=1.5)


def test_reinit_idempotent_and_preserving():
    rng = np.random.default_rng(3)
    sys3 = SpinSystem([Subsystem("a", 2, "nuclear"), Subsystem("nv", 2, "nv"), Subsystem("h", 3, "host-14n")])
    target = np.array([0.6, 0.8])
    t = np.outer(target, target)
    rho = product_state({"nv": t, "a": random_density(2, rng), "h": random_density(3, rng)}, sys3)
    assert np.max(np.abs(reinit_nv(rho, sys3, target) - rho)) < 1e-12

    rho = random_density(12, rng)
    out = reinit_nv(rho, sys3, target)
    assert np.trace(out) == pytest.approx(1)
    keep = ["a", "h"]
    assert np.max(np.abs(partial_trace(out, sys3, keep) - partial_trace(rho, sys3, keep))) < 1e-12
    assert np.allclose(partial_trace(out, sys3, ["nv"]), t)


def test_decoupled_nucleus_keeps_polarization():
    H = sweep_hamiltonian(0.4, a_x=0.0)
    rho0 = product_state({"nv": nv_state(H, -6.0), "11B": np.diag([0.8, 0.2])}, H.system)
    tr = propagate_sweep(H, rho0, SweepSchedule(-6, 6, 30))
    assert np.max(np.abs(tr.polarization["11B"] - 0.6)) < 1e-9


def test_unitary_sweep_keeps_purity():
    H = sweep_hamiltonian(0.4)
    rho0 = initial_state(H, SweepSchedule())
    tr = propagate_sweep(H, rho0, SweepSchedule(-6, 6, 30))
    assert np.max(np.abs(tr.purity - tr.purity[0])) < 1e-8
    assert np.max(np.abs(tr.trace - 1)) < 1e-9


def test_dephasing_keeps_trace_and_positivity():
    H = sweep_hamiltonian(0.4)
    tr = propagate_sweep(H, initial_state(H, SweepSchedule()), SweepSchedule(), DephasingSpec.from_T2(2.0))
    assert np.max(np.abs(tr.trace - 1)) < 1e-6
    assert np.linalg.eigvalsh(tr.final_state).min() > -1e-6
    assert tr.purity[-1] < tr.purity[0]


def test_adiabatic_limit():
    # 4 E^2 / v = 4 * 1.0 / 0.03 > 100
    H = sweep_hamiltonian(1.0, a_x=0.0)
    tr = propagate_sweep(H, initial_state(H, SweepSchedule()), SweepSchedule(-6, 6, 30))
    assert tr.p_chi_minus[-1] >= 0.99


def test_isolated_crossing_matches_lz():
    T, tr = isolated_crossing_transfer(0.047, 0.4, 30)
    assert T == pytest.approx(1 - lz_point(0.047, 0.4, 30, 2.9).p_l, abs=0.02)
    assert tr.step_doubling_error < 1e-6


def test_fig1e_sign_and_T2_ordering(fig1e_runs):
    p10 = fig1e_runs[10.0].segment_end_polarization("11B")
    p04 = fig1e_runs[0.4].segment_end_polarization("11B")
    assert np.all(p10 < 0)
    assert abs(p10[-1]) > abs(p04[-1])
    assert fig1e_runs[10.0].step_doubling_error < 1e-6


def test_chi_plus_reinit_flips_sign(fig1e_runs):
    H = sweep_hamiltonian(0.4)
    tr = run_protocol(H, SweepSchedule(reinit_state="chi_plus"), DephasingSpec.from_T2(10.0))
    assert tr.final_polarization("11B") > 0
    assert tr.final_polarization("11B") == pytest.approx(-fig1e_runs[10.0].final_polarization("11B"), rel=0.05)


def test_direction_independent_sign():
    H = sweep_hamiltonian(0.4)
    fwd = run_protocol(H, SweepSchedule(-6, 6, 30), DephasingSpec.from_T2(10.0), n_sweeps=1)
    bwd = run_protocol(H, SweepSchedule(6, -6, 30), DephasingSpec.from_T2(10.0), n_sweeps=1)
    assert fwd.final_polarization() < 0 and bwd.final_polarization() < 0


def test_explicit_step_doubling():
    H = sweep_hamiltonian(0.4)
    s = SweepSchedule()
    dt = suggest_dt(H, s.omega_start, s.omega_end, s.v)
    a = run_protocol(H, s, dt=dt, stride=1000, n_sweeps=1)
    b = run_protocol(H, s, dt=dt / 2, stride=2000, n_sweeps=1)
    assert np.allclose(a.t, b.t)
    assert np.max(np.abs(a.polarization["11B"] - b.polarization["11B"])) < 1e-6


def test_step_doubling_failure_suggests_dt():
    H = sweep_hamiltonian(0.4)
    s = SweepSchedule(v=300)
    rho0 = initial_state(H, s)

    def run(dt, factor):
        return propagate_sweep(H, rho0, s, dt=dt / factor, stride=factor)

    with pytest.raises(StepSizeError) as err:
        with_step_doubling(run, 5.0, tol=1e-12, max_refine=1)
    assert err.value.suggested_dt == pytest.approx(1.25)


def test_bad_inputs():
    H = sweep_hamiltonian(0.4)
    with pytest.raises(ValueError):
        propagate_sweep(H, np.eye(2), SweepSchedule())
    with pytest.raises(ValueError):
        run_protocol(H, SweepSchedule(), dt=-1.0)


def test_host_and_p1_runs():
    base = run_protocol(sweep_hamiltonian(0.4), SweepSchedule(), DephasingSpec.from_T2(10.0), n_sweeps=1)
    p1 = run_protocol(sweep_hamiltonian(0.4, a_x=0.04, p1=P1Params(g1=6.0)), SweepSchedule(), DephasingSpec.from_T2(10.0))
    assert np.all(p1.segment_end_polarization("11B") < 0)
    host = run_protocol(sweep_hamiltonian(0.4, host=HyperfineParams()), SweepSchedule(), DephasingSpec.from_T2(10.0), n_sweeps=1)
    assert host.final_polarization("11B") == pytest.approx(base.final_polarization("11B"), rel=0.1)


def test_trajectory_columns_and_csv(tmp_path, fig1e_runs):
    tr = fig1e_runs[10.0]
    cols = tr.columns()
    assert list(cols)[:2] == ["t_us", "omega_MHz"] and "pol_11B" in cols
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    text = open(path, "rb").read()
    assert b"\r" not in text and text.count(b"\n") == len(tr) + 1
    assert isinstance(Trajectory.concatenate([tr, tr]), Trajectory)
