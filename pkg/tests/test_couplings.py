import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wstate.couplings import (
    CalibrationError,
    IonDrivePhase,
    MSConfig,
    SidebandConfig,
    apply_calibration_error,
    ms_effective_hamiltonian,
    ms_hamiltonian,
    ms_ideal_propagator,
    ms_propagator,
    ms_spin_operator,
    rabi_from_lamb_dicke,
    sideband_hamiltonian,
)
from wstate.lindblad import evolve_pure
from wstate.qcore import HBAR, HilbertSpace, propagator
from wstate.wbasis import LABELS, WLabel, w_basis, w_state

US = 1e-6


def test_chiral_phases_are_center_referenced():
    p = IonDrivePhase.chiral(1)
    assert np.allclose(p.phases, (-2 * np.pi / 3, 0, 2 * np.pi / 3))
    for ds in (-1, 0, 1):
        assert IonDrivePhase.chiral(ds, global_phase=0.4).chirality() == ds


def test_geometry_phases():
    d = 3.0e-6
    dk = 2 * np.pi / 3 / d
    p = IonDrivePhase.from_geometry(dk, [-d, 0.0, d], [1.0, 1.0, 1.0])
    assert p.chirality() == 1
    # an out-of-phase centre ion adds pi and breaks the pattern
    assert IonDrivePhase.from_geometry(dk, [-d, 0.0, d], [1.0, -1.0, 1.0]).chirality() is None
    # alternating signs with spacing pi/3 phase steps realize chirality -1 (pi + pi/3 = -2pi/3 mod 2pi)
    dk2 = (np.pi / 3) / d
    assert IonDrivePhase.from_geometry(dk2, [-d, 0.0, d], [1.0, -1.0, 1.0]).chirality() == -1


def test_sideband_config_validation():
    with pytest.raises(ValueError):
        SidebandConfig("green", (1.0,) * 3, IonDrivePhase.chiral(0))
    with pytest.raises(ValueError):
        SidebandConfig("red", (1.0, 1.0), IonDrivePhase.chiral(0))
    with pytest.raises(ValueError):
        SidebandConfig("red", (1.0,) * 3, IonDrivePhase.chiral(1), chirality_change=-1)


def _spin_part(ds):
    """sum_j f_j sigma_plus^(j) on three qubits."""
    space = HilbertSpace.ions(3)
    s = ms_spin_operator(IonDrivePhase.chiral(ds), space).data
    return np.tril(s)  # raising part: maps lower basis index to higher


@pytest.mark.parametrize("ds", [-1, 0, 1])
def test_sideband_selection_rule(ds):
    sp = _spin_part(ds)
    for a in LABELS:
        for b in LABELS:
            if b.n_up != a.n_up + 1:
                continue
            amp = np.vdot(w_state(b).amplitudes, sp @ w_state(a).amplitudes)
            allowed = (b.s - a.s - ds) % 3 == 0
            assert (abs(amp) > 1e-9) == allowed, (a, b, ds)


@pytest.mark.parametrize("s", [1, -1])
def test_chiral_target_is_dark_under_its_red_sideband(s):
    space = HilbertSpace.ions(3, 2, 3)
    h = sideband_hamiltonian(SidebandConfig.chiral("red", 1e5, -s), space).data
    v = np.kron(w_state(WLabel(1, s)).amplitudes, np.eye(4)[0])
    assert np.abs(h @ v).max() < 1e-12 * np.abs(h).max()
    # and W20 with no phonon is coupled into the target with one phonon
    src = np.kron(w_state(WLabel(2, 0)).amplitudes, np.eye(4)[0])
    dst = np.kron(w_state(WLabel(1, s)).amplitudes, np.eye(4)[1])
    assert abs(np.vdot(dst, h @ src)) > 0.1 * HBAR * 1e5


def test_sideband_hamiltonian_is_hermitian_and_scaled():
    space = HilbertSpace.ions(3, 2, 2)
    cfg = SidebandConfig("blue", (1.0, 2.0, 3.0), IonDrivePhase.chiral(1))
    h = sideband_hamiltonian(cfg, space)
    assert h.is_hermitian()
    h2 = sideband_hamiltonian(SidebandConfig("blue", (2.0, 4.0, 6.0), IonDrivePhase.chiral(1)), space)
    assert np.allclose(h2.data, 2 * h.data)


def _block(ds):
    chain = [WLabel(0, 0), WLabel(1, -ds), WLabel(2, ds), WLabel(3, 0)]
    return [LABELS.index(c) for c in chain]


@pytest.mark.parametrize("ds", [-1, 0, 1])
@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=-np.pi, max_value=np.pi))
def test_ideal_propagator_matches_closed_form(ds, dphi):
    u = np.exp(2j * dphi)
    b = w_basis()
    m = b.conj().T @ ms_ideal_propagator(u, ds).data @ b
    r3 = math.sqrt(3) / 2
    want = np.exp(1j * np.pi / 8) * np.array([
        [0.5, 0, -r3 * np.conj(u), 0],
        [0, -0.5, 0, -r3 * np.conj(u)],
        [-r3 * u, 0, -0.5, 0],
        [0, -r3 * u, 0, 0.5],
    ])
    idx = _block(ds)
    assert np.abs(m[np.ix_(idx, idx)] - want).max() < 1e-12
    rest = [i for i in range(8) if i not in idx]
    assert np.abs(m[np.ix_(rest, rest)] - np.exp(1j * np.pi / 8) * np.eye(4)).max() < 1e-12
    assert np.abs(m[np.ix_(idx, rest)]).max() < 1e-12
    p = abs(np.vdot(w_state(WLabel(2, ds)).amplitudes,
                    ms_ideal_propagator(u, ds).data @ w_state(WLabel(0, 0)).amplitudes)) ** 2
    assert p == pytest.approx(0.75, abs=1e-12)


def test_ideal_propagator_validation():
    with pytest.raises(ValueError):
        ms_ideal_propagator(2.0, 0)
    with pytest.raises(ValueError):
        ms_ideal_propagator(1.0, 2)


def test_effective_generator_reproduces_ideal_propagator():
    rabi = math.pi / (30 * US) / math.sqrt(2)
    space = HilbertSpace.ions(3)
    for ds in (-1, 0, 1):
        cfg = MSConfig.ideal(rabi, IonDrivePhase.chiral(-ds, global_phase=0.3))
        u = propagator(ms_effective_hamiltonian(cfg, space), cfg.duration).data
        assert np.allclose(u, ms_ideal_propagator(cfg.u, ds).data, atol=1e-12)
        assert cfg.is_ideal
    with pytest.raises(ValueError):
        MSConfig(1.0, 0.0, 1.0, IonDrivePhase.chiral(0))


def test_ms_propagator_matches_independent_rk4():
    rabi = 2 * math.pi * 10e3
    space = HilbertSpace.ions(3, 2, 4)
    cfg = MSConfig.ideal(rabi, IonDrivePhase.chiral(1, global_phase=0.2))
    u = ms_propagator(cfg, space, max_step=cfg.duration / 2000).data
    cols = np.eye(space.dim, dtype=complex)[:, :6]
    ref, _ = evolve_pure(lambda t: ms_hamiltonian(cfg, space, t), cols, cfg.duration, cfg.duration / 2000)
    assert np.abs(u[:, :6] - ref).max() < 1e-9
    assert np.abs(u.conj().T @ u - np.eye(space.dim)).max() < 1e-9


def test_full_ms_returns_motion_and_matches_ideal_gate():
    rabi = math.pi / (30 * US) / math.sqrt(2)
    space = HilbertSpace.ions(3, 2, 8)
    cfg = MSConfig.ideal(rabi, IonDrivePhase.chiral(0, global_phase=0.25))
    u = ms_propagator(cfg, space).data
    ideal = ms_ideal_propagator(cfg.u, 0).data
    vac = np.eye(9)[0]
    for lab in LABELS:
        v = w_state(lab).amplitudes
        out = u @ np.kron(v, vac)
        want = np.kron(ideal @ v, vac)
        assert abs(np.vdot(want, out)) ** 2 > 0.999


def test_null_calibration_error_is_identity():
    cfg = SidebandConfig.chiral("red", 1.0, -1)
    assert apply_calibration_error(cfg, CalibrationError()) is cfg


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=-0.5, max_value=0.5), st.floats(min_value=0.5, max_value=1.5))
def test_calibration_error_model(dphi, ratio):
    cfg = SidebandConfig.chiral("red", 2.0, -1)
    out = apply_calibration_error(cfg, CalibrationError(dphi, ratio))
    assert np.mean(out.rabi) == pytest.approx(2.0)
    assert out.rabi[1] == pytest.approx(2.0 * ratio)
    assert out.rabi[0] == pytest.approx(out.rabi[2])
    # phase step magnitude grows by dphi, direction set by the chirality change
    steps = np.diff(out.phases.phases)
    assert np.allclose(steps, -(2 * np.pi / 3 + dphi))
    if abs(dphi) > 1e-6:
        assert out.chirality_change is None


def test_calibration_error_validation():
    with pytest.raises(ValueError):
        CalibrationError(0.0, 0.0)


def test_rabi_from_lamb_dicke():
    assert rabi_from_lamb_dicke(2.0, [0.1, 0.2]) == (0.2, 0.4)
