import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from wstate.qcore import (
    HBAR,
    SIGMA_PLUS,
    DensityMatrix,
    HilbertSpace,
    Operator,
    StateVector,
    annihilation,
    embed,
    fidelity,
    number,
    partial_trace,
    propagator,
    tensor,
    transition,
)

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_rho(rng, dim, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    r = g @ g.conj().T
    return r / np.trace(r)


def random_hermitian(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


def test_space_layout():
    s = HilbertSpace.ions(3, 3, 4)
    assert s.dims == (3, 3, 3, 5)
    assert s.dim == 135
    assert s.motional_index == 3
    assert s.ion_indices == (0, 1, 2)
    assert s.n_max == 4
    assert HilbertSpace.ions(2).motional_index is None


def test_sigma_plus_raises_down_to_up():
    down, up = np.array([1, 0]), np.array([0, 1])
    assert np.allclose(SIGMA_PLUS @ down, up)
    assert np.allclose(SIGMA_PLUS @ up, 0)


def test_embed_matches_kron():
    s = HilbertSpace.ions(2, 3, 2)
    m = np.arange(9).reshape(3, 3).astype(complex)
    want = np.kron(np.kron(np.eye(3), m), np.eye(3))
    assert np.array_equal(embed(m, 1, s).data, want)
    with pytest.raises(ValueError):
        embed(np.eye(2), 1, s)
    with pytest.raises(IndexError):
        embed(m, 5, s)


def test_ladder_operators():
    a = annihilation(5).data
    comm = a @ a.conj().T - a.conj().T @ a
    # truncation spoils only the last diagonal entry
    assert np.allclose(np.diag(comm)[:-1], 1)
    assert np.allclose(a.conj().T @ a, number(5).data)
    with pytest.raises(ValueError):
        annihilation(0)


def test_transition_matrix():
    t = transition(2, 1, 3)
    assert t[2, 1] == 1 and np.count_nonzero(t) == 1


def test_tensor_type_mismatch():
    s = HilbertSpace.ions(1)
    with pytest.raises(TypeError):
        tensor(Operator.identity(s), StateVector.basis(s, [0]))


def test_state_and_density_validation():
    s = HilbertSpace.ions(1)
    with pytest.raises(ValueError):
        StateVector(s, np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        DensityMatrix(s, np.array([[0.5, 0.0], [0.0, 0.4]]))
    with pytest.raises(ValueError):
        DensityMatrix(s, np.array([[1.2, 0.0], [0.0, -0.2]]))
    with pytest.raises(ValueError):
        DensityMatrix(s, np.array([[0.5, 0.1], [0.3, 0.5]]))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    sa, sb = HilbertSpace.ions(1, 3), HilbertSpace.mode(3)
    ra, rb = random_rho(rng, 3), random_rho(rng, 4)
    joint = tensor(DensityMatrix(sa, ra), DensityMatrix(sb, rb))
    assert np.allclose(partial_trace(joint, [0]).data, ra, atol=1e-12)
    assert np.allclose(partial_trace(joint, [1]).data, rb, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_partial_trace_preserves_trace(seed):
    rng = np.random.default_rng(seed)
    s = HilbertSpace.from_dims((2, 3, 2))
    rho = DensityMatrix(s, random_rho(rng, 12))
    for keep in ([0], [1], [2], [0, 2]):
        assert partial_trace(rho, keep).trace() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(min_value=-3.0, max_value=3.0))
def test_propagator_matches_expm(seed, t):
    rng = np.random.default_rng(seed)
    s = HilbertSpace.from_dims((6,))
    h = HBAR * random_hermitian(rng, 6)
    u = propagator(Operator(s, h), t).data
    assert np.allclose(u, expm(-1j * h * t / HBAR), atol=1e-10)
    assert np.allclose(u @ u.conj().T, np.eye(6), atol=1e-12)


def test_propagator_rejects_non_hermitian():
    s = HilbertSpace.from_dims((2,))
    with pytest.raises(ValueError):
        propagator(Operator(s, np.array([[0, 1], [0, 0]]) * HBAR), 1.0)


def test_fidelity_traces_motion_and_pads_levels():
    ions3 = HilbertSpace.ions(1, 3, 2)
    psi = StateVector(HilbertSpace.ions(1), np.array([1, 1]) / np.sqrt(2))
    v = np.zeros(9, dtype=complex)
    v[[0, 3]] = 1 / np.sqrt(2)  # (|0> + |1>)/sqrt2 on the ion, motion in |0>
    rho = DensityMatrix(ions3, np.outer(v, v.conj()))
    assert fidelity(rho, psi) == pytest.approx(1.0, abs=1e-12)
    w = np.zeros(9, dtype=complex)
    w[6] = 1.0  # ion in level 2: no overlap with the qubit target
    assert fidelity(DensityMatrix(ions3, np.outer(w, w)), psi) == pytest.approx(0.0, abs=1e-15)


def test_expectation_matches_trace():
    rng = np.random.default_rng(3)
    s = HilbertSpace.from_dims((5,))
    rho = DensityMatrix(s, random_rho(rng, 5))
    a = random_hermitian(rng, 5) + 0.3j * random_hermitian(rng, 5)
    assert rho.expect(Operator(s, a)) == pytest.approx(np.trace(a @ rho.data), abs=1e-12)
