"""Hilbert-space plumbing: tensor structure, operators, states and exponentials.

Conventions used everywhere in the package:

* two-level ions are ordered (|down>, |up>) so ``|down> = [1, 0]``; three-level
  ions append a third level (the auxiliary ``r`` or leakage ``L`` level);
* ion factors come first in crystal order, the motional mode (if any) last;
* Hamiltonians are energies in joules, rates in 1/s, times in s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.constants import hbar

HBAR = hbar

# single-ion matrices in the (down, up) ordering
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
SIGMA_Y = -1j * (SIGMA_PLUS - SIGMA_MINUS)
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)

DOWN, UP = 0, 1


class Factor(NamedTuple):
    label: str
    dim: int
    motional: bool = False


@dataclass(frozen=True)
class HilbertSpace:
    factors: tuple[Factor, ...]

    def __post_init__(self) -> None:
        facs = tuple(Factor(*f) for f in self.factors)
        object.__setattr__(self, "factors", facs)
        if not facs:
            raise ValueError("a Hilbert space needs at least one factor")
        for f in facs:
            if int(f.dim) != f.dim or f.dim < 2:
                raise ValueError(f"factor {f.label!r} has dimension {f.dim}; need an integer >= 2")
        if sum(f.motional for f in facs) > 1:
            raise ValueError("at most one motional factor is allowed")

    @classmethod
    def ions(cls, n_ions: int, levels: int = 2, n_max: int | None = None) -> "HilbertSpace":
        """``n_ions`` identical ion factors, optionally followed by one mode."""
        facs = [Factor(f"ion{j}", levels) for j in range(n_ions)]
        if n_max is not None:
            facs.append(Factor("mode", n_max + 1, True))
        return cls(tuple(facs))

    @classmethod
    def mode(cls, n_max: int) -> "HilbertSpace":
        return cls((Factor("mode", n_max + 1, True),))

    @classmethod
    def from_dims(cls, dims: Sequence[int], motional_last: bool = False) -> "HilbertSpace":
        facs = [Factor(f"f{j}", d) for j, d in enumerate(dims)]
        if motional_last:
            facs[-1] = Factor("mode", dims[-1], True)
        return cls(tuple(facs))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def motional_index(self) -> int | None:
        for j, f in enumerate(self.factors):
            if f.motional:
                return j
        return None

    @property
    def ion_indices(self) -> tuple[int, ...]:
        return tuple(j for j, f in enumerate(self.factors) if not f.motional)

    @property
    def n_max(self) -> int | None:
        m = self.motional_index
        return None if m is None else self.factors[m].dim - 1

    def subspace(self, keep: Sequence[int]) -> "HilbertSpace":
        return HilbertSpace(tuple(self.factors[j] for j in sorted(keep)))

    def __add__(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(self.factors + other.factors)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _single(dim: int) -> HilbertSpace:
    return HilbertSpace((Factor("q", dim),))


@dataclass(frozen=True)
class Operator:
    space: HilbertSpace
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        d = _frozen(self.data)
        n = self.space.dim
        if d.shape != (n, n):
            raise ValueError(f"operator shape {d.shape} does not match space dimension {n}")
        object.__setattr__(self, "data", d)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Operator":
        """Wrap a bare square matrix as an operator on a single factor."""
        m = np.asarray(m)
        return cls(_single(m.shape[0]), m)

    @classmethod
    def identity(cls, space: HilbertSpace) -> "Operator":
        return cls(space, np.eye(space.dim))

    @classmethod
    def zero(cls, space: HilbertSpace) -> "Operator":
        return cls(space, np.zeros((space.dim, space.dim)))

    def dag(self) -> "Operator":
        return Operator(self.space, self.data.conj().T)

    def hermiticity_error(self) -> float:
        return float(np.abs(self.data - self.data.conj().T).max())

    def is_hermitian(self, rtol: float = 1e-10) -> bool:
        scale = float(np.abs(self.data).max())
        return self.hermiticity_error() <= rtol * max(scale, np.finfo(float).tiny)

    def _check(self, other: "Operator") -> None:
        if other.space.dims != self.space.dims:
            raise ValueError(f"space mismatch: {self.space.dims} vs {other.space.dims}")

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.data + other.data)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.data - other.data)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.data)

    def __mul__(self, c: complex) -> "Operator":
        return Operator(self.space, self.data * c)

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> "Operator":
        return Operator(self.space, self.data / c)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.data @ other.data)
        if isinstance(other, StateVector):
            if other.space.dims != self.space.dims:
                raise ValueError("space mismatch")
            # result is generally unnormalized, so hand back the raw vector
            return self.data @ other.amplitudes
        return NotImplemented


@dataclass(frozen=True)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = _frozen(self.amplitudes).reshape(-1)
        if a.shape[0] != self.space.dim:
            raise ValueError(f"state length {a.shape[0]} does not match space dimension {self.space.dim}")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm {norm:.3e} differs from 1; use StateVector.normalized")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def normalized(cls, space: HilbertSpace, amplitudes: np.ndarray) -> "StateVector":
        a = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(a)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(space, a / norm)

    @classmethod
    def basis(cls, space: HilbertSpace, levels: Sequence[int]) -> "StateVector":
        """Product basis state, one level index per factor."""
        if len(levels) != len(space.factors):
            raise ValueError("need one level per factor")
        idx = np.ravel_multi_index(tuple(levels), space.dims)
        a = np.zeros(space.dim, dtype=complex)
        a[idx] = 1.0
        return cls(space, a)

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> Operator:
        return Operator(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    space: HilbertSpace
    data: np.ndarray = field(repr=False)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        d = _frozen(self.data)
        n = self.space.dim
        if d.shape != (n, n):
            raise ValueError(f"density matrix shape {d.shape} does not match space dimension {n}")
        object.__setattr__(self, "data", d)
        if self.check:
            herm = float(np.abs(d - d.conj().T).max())
            if herm > 1e-10:
                raise ValueError(f"density matrix not Hermitian (error {herm:.2e})")
            tr = self.trace()
            if abs(tr - 1.0) > 1e-8:
                raise ValueError(f"density matrix trace {tr!r} differs from 1")
            lam = self.min_eigenvalue()
            if lam < -1e-8:
                raise ValueError(f"density matrix has negative eigenvalue {lam:.2e}")

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        a = psi.amplitudes
        return cls(psi.space, np.outer(a, a.conj()))

    @classmethod
    def maximally_mixed(cls, space: HilbertSpace) -> "DensityMatrix":
        return cls(space, np.eye(space.dim) / space.dim)

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def expect(self, op: Operator) -> complex:
        return complex(np.sum(op.data.T * self.data))


def tensor(a, b, *more):
    """Kronecker product of operators, states or density matrices of one kind."""
    out = _tensor2(a, b)
    for m in more:
        out = _tensor2(out, m)
    return out


def _tensor2(a, b):
    if type(a) is not type(b):
        raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    space = a.space + b.space
    if isinstance(a, Operator):
        return Operator(space, np.kron(a.data, b.data))
    if isinstance(a, StateVector):
        return StateVector(space, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix):
        return DensityMatrix(space, np.kron(a.data, b.data), check=a.check and b.check)
    raise TypeError(f"unsupported type {type(a).__name__}")


def embed(op, index: int, space: HilbertSpace) -> Operator:
    """Place a single-factor operator at ``index``, identity elsewhere."""
    m = op.data if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    if not 0 <= index < len(space.factors):
        raise IndexError(f"factor index {index} out of range")
    d = space.dims[index]
    if m.shape != (d, d):
        raise ValueError(f"operator of shape {m.shape} cannot act on factor of dimension {d}")
    left = int(np.prod(space.dims[:index]))
    right = int(np.prod(space.dims[index + 1:]))
    full = np.kron(np.kron(np.eye(left), m), np.eye(right))
    return Operator(space, full)


def annihilation(n_max: int) -> Operator:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)
    return Operator(HilbertSpace.mode(n_max), a)


def number(n_max: int) -> Operator:
    return Operator(HilbertSpace.mode(n_max), np.diag(np.arange(n_max + 1, dtype=float)))


def transition(upper: int, lower: int, dim: int) -> np.ndarray:
    """Single-ion |upper><lower| of a ``dim``-level ion."""
    m = np.zeros((dim, dim), dtype=complex)
    m[upper, lower] = 1.0
    return m


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    keep = sorted(set(int(k) for k in keep))
    nf = len(rho.space.factors)
    if not keep:
        raise ValueError("keep must be nonempty")
    if keep[0] < 0 or keep[-1] >= nf:
        raise IndexError(f"factor indices {keep} out of range for {nf} factors")
    dims = rho.space.dims
    t = rho.data.reshape(dims + dims)
    traced = [j for j in range(nf) if j not in keep]
    # trace out from the highest axis down so earlier axis numbers stay valid
    cur = nf
    for j in reversed(traced):
        t = np.trace(t, axis1=j, axis2=j + cur)
        cur -= 1
    kd = int(np.prod([dims[j] for j in keep]))
    return DensityMatrix(rho.space.subspace(keep), t.reshape(kd, kd), check=rho.check)


def _lift(target: StateVector, dims: Sequence[int]) -> np.ndarray:
    """Pad each factor of ``target`` with empty levels up to ``dims``."""
    t = target.amplitudes.reshape(target.space.dims)
    out = np.zeros(dims, dtype=complex)
    out[tuple(slice(0, d) for d in target.space.dims)] = t
    return out.reshape(-1)


def fidelity(rho: DensityMatrix, target: StateVector) -> float:
    """<psi|rho|psi>; the motional factor of ``rho`` is traced out if the target has none.

    Ion factors of ``rho`` may carry extra levels (auxiliary or leakage levels) which
    the target is taken to have zero amplitude on.
    """
    red = rho
    m = rho.space.motional_index
    if m is not None and target.space.motional_index is None:
        red = partial_trace(rho, [j for j in range(len(rho.space.factors)) if j != m])
    if len(red.space.dims) != len(target.space.dims) or any(
        dt > dr for dt, dr in zip(target.space.dims, red.space.dims)
    ):
        raise ValueError(f"target dims {target.space.dims} incompatible with state dims {red.space.dims}")
    psi = _lift(target, red.space.dims)
    f = float(np.real(np.vdot(psi, red.data @ psi)))
    return min(1.0, max(0.0, f))


def propagator(h: Operator, t: float, rtol: float = 1e-9) -> Operator:
    """exp(-i h t / hbar) for a Hermitian (energy-valued) ``h``."""
    if not h.is_hermitian(rtol):
        raise ValueError(f"propagator needs a Hermitian generator (error {h.hermiticity_error():.2e})")
    hh = 0.5 * (h.data + h.data.conj().T)
    w, v = np.linalg.eigh(hh)
    u = (v * np.exp(-1j * w * t / HBAR)) @ v.conj().T
    return Operator(h.space, u)
