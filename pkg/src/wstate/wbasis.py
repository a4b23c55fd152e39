"""The three-qubit W basis, the chirality operator and noiseless-subsystem encoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .qcore import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    HilbertSpace,
    Operator,
    StateVector,
    embed,
)

W = np.exp(2j * np.pi / 3)
QUBITS = HilbertSpace.ions(3)

_VALID = ((0, 0), (1, 0), (1, 1), (1, -1), (2, 0), (2, 1), (2, -1), (3, 0))
_SUFFIX = {0: "0", 1: "p", -1: "m"}


@dataclass(frozen=True, order=True)
class WLabel:
    n_up: int
    s: int

    def __post_init__(self) -> None:
        if (self.n_up, self.s) not in _VALID:
            raise ValueError(f"invalid W label (n_up={self.n_up}, s={self.s})")

    @property
    def chiral(self) -> bool:
        return self.s != 0

    @property
    def tag(self) -> str:
        """Compact name such as ``W1p`` (s=+1) or ``W20``."""
        return f"W{self.n_up}{_SUFFIX[self.s]}"

    @classmethod
    def parse(cls, text: str) -> "WLabel":
        t = text.strip().removeprefix("W")
        if len(t) != 2 and not (len(t) == 3 and t[1] in "+-"):
            raise ValueError(f"cannot parse W label {text!r}")
        n = int(t[0])
        rest = t[1:]
        s = {"0": 0, "p": 1, "+": 1, "m": -1, "-": -1, "+1": 1, "-1": -1}.get(rest)
        if s is None:
            raise ValueError(f"cannot parse W label {text!r}")
        return cls(n, s)

    def __str__(self) -> str:
        return self.tag


LABELS = tuple(WLabel(n, s) for n, s in _VALID)


def _ket(bits: str) -> np.ndarray:
    v = np.array([1.0 + 0j])
    for b in bits:
        v = np.kron(v, [0.0, 1.0] if b == "u" else [1.0, 0.0])
    return v


def _amplitudes(label: WLabel) -> np.ndarray:
    n, s = label.n_up, label.s
    if n == 0:
        return _ket("ddd")
    if n == 3:
        return _ket("uuu")
    # the single flipped (n=1) or unflipped (n=2) qubit sits at position 0, 1, 2
    kets = ["udd", "dud", "ddu"] if n == 1 else ["duu", "udu", "uud"]
    # s=+1 carries (w*, 1, w); s=-1 the conjugate pattern
    coeffs = [W ** (-s), 1.0, W ** s]
    return sum(c * _ket(k) for c, k in zip(coeffs, kets)) / np.sqrt(3)


def w_state(label: WLabel | tuple[int, int]) -> StateVector:
    if not isinstance(label, WLabel):
        label = WLabel(*label)
    return StateVector(QUBITS, _amplitudes(label))


def w_basis() -> np.ndarray:
    """8x8 matrix whose columns are the W states in ``LABELS`` order."""
    return np.column_stack([_amplitudes(lab) for lab in LABELS])


def chirality_operator() -> Operator:
    pauli = (SIGMA_X, SIGMA_Y, SIGMA_Z)
    chi = np.zeros((8, 8), dtype=complex)
    for perm in itertools.permutations(range(3)):
        sign = np.linalg.det(np.eye(3)[list(perm)])
        term = np.eye(1)
        for a in perm:
            term = np.kron(term, pauli[a])
        chi += sign * term
    return Operator(QUBITS, chi / (2 * np.sqrt(3)))


@dataclass(frozen=True)
class NoiseDirection:
    n_vec: tuple[float, float, float]

    def __post_init__(self) -> None:
        v = tuple(float(x) for x in self.n_vec)
        if len(v) != 3:
            raise ValueError("noise direction must be a 3-vector")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"noise direction must be a unit vector, got norm {np.linalg.norm(v)}")
        object.__setattr__(self, "n_vec", v)

    @classmethod
    def from_vector(cls, v) -> "NoiseDirection":
        v = np.asarray(v, dtype=float)
        return cls(tuple(v / np.linalg.norm(v)))


def global_noise_operator(direction: NoiseDirection) -> Operator:
    nx, ny, nz = direction.n_vec
    local = nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z
    out = Operator.zero(QUBITS)
    for j in range(3):
        out = out + embed(local, j, QUBITS)
    return out


@dataclass(frozen=True)
class LogicalState:
    alpha: complex
    beta: complex
    g1: complex = 1.0
    g2: complex = 0.0

    def __post_init__(self) -> None:
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1) > 1e-10:
            raise ValueError("|alpha|^2 + |beta|^2 must be 1")
        if abs(abs(self.g1) ** 2 + abs(self.g2) ** 2 - 1) > 1e-10:
            raise ValueError("|G1|^2 + |G2|^2 must be 1")


def nss_encode(state: LogicalState) -> StateVector:
    a, b = state.alpha, state.beta
    amp = state.g1 * (a * _amplitudes(WLabel(1, 1)) + b * _amplitudes(WLabel(1, -1)))
    amp = amp + state.g2 * (a * _amplitudes(WLabel(2, 1)) + b * _amplitudes(WLabel(2, -1)))
    return StateVector.normalized(QUBITS, amp)


def logical_readout(psi: StateVector, tol: float = 1e-9) -> tuple[complex, complex, float]:
    """Return (alpha_L, beta_L, separability defect) of a state in the chiral subspace.

    The 2x2 coefficient matrix M[n_up-1, chirality] is Schmidt-decomposed; the dominant
    right singular vector is the logical qubit, fixed so that alpha_L is real and >= 0
    (beta_L instead when alpha_L vanishes). The defect is 1 - sigma_max^2.
    """
    a = psi.amplitudes
    m = np.array(
        [[np.vdot(_amplitudes(WLabel(n, s)), a) for s in (1, -1)] for n in (1, 2)]
    )
    outside = np.linalg.norm(a) ** 2 - np.sum(np.abs(m) ** 2)
    if outside > tol:
        raise ValueError(f"state has weight {outside:.2e} outside the chiral W subspace")
    _, sv, vh = np.linalg.svd(m)
    q = vh[0]
    ref = q[0] if abs(q[0]) > 1e-12 else q[1]
    q = q * np.conj(ref) / abs(ref)
    defect = float(max(0.0, 1.0 - sv[0] ** 2 / np.sum(sv**2)))
    return complex(q[0]), complex(q[1]), defect
