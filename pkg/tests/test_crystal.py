import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants

from wstate import crystal
from wstate.crystal import (
    K4_MAX,
    UV_PER_UM2,
    CrystalConfig,
    CrystalError,
    IonSpecies,
    equilibrium_positions,
    harmonic_k2_for_frequency,
    heating_coupling,
    net_forces,
    normal_modes,
    tune_k2,
)

AMU = constants.atomic_mass
E = constants.e
KC = E**2 / (4 * np.pi * constants.epsilon_0)


def uniform(n, a=40):
    return tuple(IonSpecies(f"X{j}", a * AMU) for j in range(n))


def test_single_pair_positions_and_frequencies():
    # two equal ions: q k2 x = kc / (2x)^2, COM at w0 and stretch at sqrt(3) w0
    k2 = 10 * UV_PER_UM2
    m = 40 * AMU
    modes = normal_modes(CrystalConfig(uniform(2), k2))
    x = (KC / (4 * E * k2)) ** (1 / 3)
    assert np.allclose(modes.positions, [-x, x], rtol=1e-10)
    w0 = np.sqrt(E * k2 / m)
    assert np.allclose(modes.frequencies, [w0, np.sqrt(3) * w0], rtol=1e-9)


def test_three_ion_frequency_ratios():
    modes = normal_modes(CrystalConfig(uniform(3), 5 * UV_PER_UM2))
    r = modes.frequencies / modes.frequencies[0]
    assert np.allclose(r, [1, np.sqrt(3), np.sqrt(29 / 5)], rtol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.sampled_from([9, 25, 40, 88, 138]), min_size=2, max_size=6),
       st.floats(min_value=0.5, max_value=40.0), st.floats(min_value=0.0, max_value=1.0))
def test_equilibrium_is_force_free_and_sum_rule_holds(masses, k2, k4_frac):
    sp = tuple(IonSpecies(str(m), m * AMU) for m in masses)
    cfg = CrystalConfig(sp, k2 * UV_PER_UM2, k4_frac * K4_MAX)
    modes = normal_modes(cfg)
    scale = E * cfg.k2 * np.max(np.abs(modes.positions))
    assert np.max(np.abs(net_forces(cfg, modes.positions))) < 1e-9 * scale
    assert np.all(np.diff(modes.positions) > 0)
    assert np.allclose(modes.vectors.T @ modes.vectors, np.eye(len(sp)), atol=1e-10)
    # completeness of the mode vectors fixes the sum of couplings
    assert modes.couplings.sum() == pytest.approx(np.sum(1 / cfg.masses), rel=1e-9)


def test_equal_mass_harmonic_only_in_phase_mode_couples():
    modes = normal_modes(CrystalConfig(uniform(5), 3 * UV_PER_UM2))
    m = 40 * AMU
    assert modes.couplings[0] == pytest.approx(5 / m, rel=1e-10)
    assert np.all(modes.couplings[1:] < 1e-10 * modes.couplings[0])
    assert heating_coupling(modes, 0)[1] == pytest.approx(1.0, rel=1e-10)


def test_harmonic_scaling_with_curvature():
    sp = crystal.chain("MBBBM")
    a = normal_modes(CrystalConfig(sp, 2 * UV_PER_UM2))
    b = normal_modes(CrystalConfig(sp, 16 * UV_PER_UM2))
    assert np.allclose(b.positions, a.positions / 2, rtol=1e-9)
    assert np.allclose(b.frequencies, a.frequencies * np.sqrt(8), rtol=1e-9)
    assert np.allclose(np.abs(b.vectors), np.abs(a.vectors), atol=1e-9)
    k2 = harmonic_k2_for_frequency(sp, 1e6)
    assert normal_modes(CrystalConfig(sp, k2)).frequencies_hz[0] == pytest.approx(1e6, rel=1e-10)


def test_double_well_is_supported_and_unbound_rejected():
    cfg = CrystalConfig(crystal.chain("MBBBM"), -0.729 * UV_PER_UM2, K4_MAX)
    x = equilibrium_positions(cfg)
    assert np.allclose(x, -x[::-1], atol=1e-15)
    with pytest.raises(CrystalError):
        CrystalConfig(uniform(3), -1 * UV_PER_UM2, 0.0)
    with pytest.raises(CrystalError):
        normal_modes(CrystalConfig(uniform(3), 1e-3 * UV_PER_UM2, -K4_MAX))


def test_species_lookup():
    assert crystal.species("Ca").mass == pytest.approx(40 * AMU)
    assert crystal.species("Ca", "isotopic").mass == pytest.approx(39.96259086 * AMU)
    assert [s.name for s in crystal.chain("Ba-Yb-Ba")] == ["Ba138", "Yb171", "Ba138"]
    with pytest.raises(KeyError):
        crystal.species("Xx")


def test_tune_rejects_large_k4_and_empty_bracket():
    sp = crystal.chain("MBBBM")
    with pytest.raises(ValueError):
        tune_k2(sp, 2 * K4_MAX, "highest", [1, 2, 3])
    with pytest.raises(CrystalError):
        tune_k2(sp, K4_MAX, "highest", [1, 2, 3], bracket=(20 * UV_PER_UM2, 30 * UV_PER_UM2))


@pytest.mark.parametrize("chain_, sign, mode, k2, f_mhz, c_ratio", [
    ("MBBBM", +1, "highest", -0.729, 2.56, 0.0542),
    ("BMMMB", -1, "highest", 25.0, 6.00, 0.153),
    ("Ba-Yb-Yb-Yb-Ba", -1, "lowest", 19.2, 0.527, 1.00),
])
def test_tuned_crystals(chain_, sign, mode, k2, f_mhz, c_ratio):
    res = tune_k2(crystal.chain(chain_), sign * K4_MAX, mode, [1, 2, 3])
    z = np.abs(res.modes.amplitudes[1:4, res.mode_index])
    assert (z.max() - z.min()) / z.mean() < 1e-4
    assert res.k2_uV_per_um2 == pytest.approx(k2, rel=0.02)
    assert res.frequency_hz / 1e6 == pytest.approx(f_mhz, abs=0.02)
    assert heating_coupling(res.modes, res.mode_index)[1] == pytest.approx(c_ratio, rel=0.05)
