"""Fixed-step Lindblad master-equation integration over segment schedules.

The density matrix is propagated in row-major vectorized form, where
``vec(A rho B) = kron(A, B.T) vec(rho)``. Each segment's Liouvillian is assembled once
as a sparse matrix; time-dependent Hamiltonians given as operator/envelope sums add
one sparse commutator superoperator per term. Operators themselves stay dense; only
the Liouville-space generator (dimension D^2) is stored sparsely.

Steps are classical RK4. For a constant generator an RK4 step is exactly the
fourth-order Taylor polynomial of exp(hL), which is what the adjoint pass transposes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence, Union

import numpy as np
import scipy.sparse as sps

from .qcore import HBAR, DensityMatrix, HilbertSpace, Operator

TRACE_TOL = 1e-6
POSITIVITY_TOL = -1e-6


@dataclass(frozen=True)
class JumpOperator:
    op: Operator
    name: str = ""

    @classmethod
    def with_rate(cls, rate: float, op: Operator, name: str = "") -> "JumpOperator":
        if rate < 0:
            raise ValueError(f"jump rate for {name or 'operator'} must be nonnegative")
        return cls(op * math.sqrt(rate), name)


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """H(t) = static + sum_k envelope_k(t) * op_k."""

    terms: tuple[tuple[Operator, Callable[[float], complex]], ...]
    static: Operator | None = None

    def __call__(self, t: float) -> Operator:
        out = self.static.data.copy() if self.static is not None else 0
        for op, env in self.terms:
            out = out + env(t) * op.data
        return Operator(self.terms[0][0].space, out)


HamiltonianLike = Union[Operator, TimeDependentHamiltonian, Callable[[float], Operator], None]


@dataclass(frozen=True)
class Segment:
    hamiltonian: HamiltonianLike
    jumps: tuple[JumpOperator, ...]
    duration: float
    record_stride: float | None = None
    max_step: float | None = None
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "jumps", tuple(self.jumps))
        if not self.duration > 0:
            raise ValueError(f"segment {self.label!r}: duration must be positive")
        if self.record_stride is not None and not 0 < self.record_stride <= self.duration * (1 + 1e-12):
            raise ValueError(f"segment {self.label!r}: record stride must be in (0, duration]")

    @property
    def time_dependent(self) -> bool:
        return self.hamiltonian is not None and not isinstance(self.hamiltonian, Operator)


@dataclass(frozen=True)
class SegmentSchedule:
    segments: tuple[Segment, ...]
    initial: DensityMatrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        dims = self.initial.space.dims
        for seg in self.segments:
            for op in _segment_operators(seg):
                if op.space.dims != dims:
                    raise ValueError(f"segment {seg.label!r} acts on {op.space.dims}, state on {dims}")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


def _segment_operators(seg: Segment):
    h = seg.hamiltonian
    if isinstance(h, Operator):
        yield h
    elif isinstance(h, TimeDependentHamiltonian):
        for op, _ in h.terms:
            yield op
        if h.static is not None:
            yield h.static
    for j in seg.jumps:
        yield j.op


@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    segment_ends: list[int]
    final_state: DensityMatrix
    states: list[np.ndarray] | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.observables[name]


class EvolutionError(RuntimeError):
    def __init__(self, message: str, time: float, last_good: DensityMatrix | None):
        super().__init__(message)
        self.time = time
        self.last_good = last_good


class DepletionResult(NamedTuple):
    state: DensityMatrix
    elapsed: float
    depleted: bool


# ---------------------------------------------------------------- superoperators

def commutator_superop(h: np.ndarray) -> sps.csr_matrix:
    """-(i/hbar)[H, .] as a sparse Liouville-space matrix."""
    n = h.shape[0]
    hs = sps.csr_matrix(h / HBAR)
    eye = sps.identity(n, dtype=complex, format="csr")
    return (-1j * (sps.kron(hs, eye) - sps.kron(eye, hs.T))).tocsr()


def dissipator_superop(jumps: Sequence[np.ndarray], n: int) -> sps.csr_matrix:
    eye = sps.identity(n, dtype=complex, format="csr")
    out = sps.csr_matrix((n * n, n * n), dtype=complex)
    for l in jumps:
        ls = sps.csr_matrix(l)
        ldl = (ls.conj().T @ ls).tocsr()
        out = out + sps.kron(ls, ls.conj()) - 0.5 * sps.kron(ldl, eye) - 0.5 * sps.kron(eye, ldl.T)
    return out.tocsr()


def liouvillian(h: Operator | None, jumps: Sequence[JumpOperator], n: int | None = None) -> sps.csr_matrix:
    if n is None:
        n = h.space.dim if h is not None else jumps[0].op.space.dim
    out = dissipator_superop([j.op.data for j in jumps], n)
    if h is not None:
        out = out + commutator_superop(h.data)
    out = out.tocsr()
    out.eliminate_zeros()
    return out


class _Generator:
    """Liouville-space right-hand side for one segment."""

    def __init__(self, seg: Segment, n: int):
        self.n = n
        h = seg.hamiltonian
        static = h if isinstance(h, Operator) else (h.static if isinstance(h, TimeDependentHamiltonian) else None)
        self.l0 = liouvillian(static, seg.jumps, n)
        self.terms: list[tuple[sps.csr_matrix, Callable[[float], complex]]] = []
        self.callable = None
        if isinstance(h, TimeDependentHamiltonian):
            self.terms = [(commutator_superop(op.data), env) for op, env in h.terms]
        elif h is not None and not isinstance(h, Operator):
            self.callable = h

    @property
    def constant(self) -> bool:
        return not self.terms and self.callable is None

    def apply(self, v: np.ndarray, t: float) -> np.ndarray:
        out = self.l0 @ v
        for lk, env in self.terms:
            out += env(t) * (lk @ v)
        if self.callable is not None:
            rho = v.reshape(self.n, self.n)
            hm = self.callable(t).data / HBAR
            out += (-1j * (hm @ rho - rho @ hm)).reshape(-1)
        return out

    def step(self, v: np.ndarray, t: float, h: float) -> np.ndarray:
        if self.constant:
            # RK4 on a linear autonomous system: sum_{k<=4} (hL)^k / k!
            out = v.copy()
            term = v
            for k in range(1, 5):
                term = (h / k) * (self.l0 @ term)
                out += term
            return out
        k1 = self.apply(v, t)
        k2 = self.apply(v + 0.5 * h * k1, t + 0.5 * h)
        k3 = self.apply(v + 0.5 * h * k2, t + 0.5 * h)
        k4 = self.apply(v + h * k3, t + h)
        return v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def step_adjoint(self, a: np.ndarray, h: float) -> np.ndarray:
        if not self.constant:
            raise NotImplementedError("adjoint stepping supports constant segments only")
        lt = self.l0.T
        out = a.copy()
        term = a
        for k in range(1, 5):
            term = (h / k) * (lt @ term)
            out += term
        return out


class _GeneratorCache:
    """Reuse assembled generators when a schedule repeats the same Segment object."""

    def __init__(self, n: int):
        self.n = n
        self._gens: dict[int, tuple[Segment, _Generator]] = {}

    def __call__(self, seg: Segment) -> _Generator:
        hit = self._gens.get(id(seg))
        if hit is None or hit[0] is not seg:
            hit = (seg, _Generator(seg, self.n))
            self._gens[id(seg)] = hit
        return hit[1]


def _n_steps(seg: Segment, dt: float) -> int:
    cap = dt if seg.max_step is None else min(dt, seg.max_step)
    return max(1, math.ceil(seg.duration / cap - 1e-9))


# ---------------------------------------------------------------- observables

ObservableLike = Union[Operator, Callable[[np.ndarray], float]]


class _Recorder:
    def __init__(self, space: HilbertSpace, observables: Mapping[str, ObservableLike] | None, keep_states: bool):
        self.space = space
        self.n = space.dim
        self.ops: dict[str, np.ndarray] = {}
        self.funcs: dict[str, Callable[[np.ndarray], float]] = {}
        for name, ob in (observables or {}).items():
            if isinstance(ob, Operator):
                # Tr(A rho) = vec(A^T) . vec(rho)
                self.ops[name] = np.ascontiguousarray(ob.data.T).reshape(-1)
            else:
                self.funcs[name] = ob
        self.times: list[float] = []
        self.values: dict[str, list[float]] = {k: [] for k in [*self.ops, *self.funcs, "trace", "min_eig"]}
        self.states: list[np.ndarray] | None = [] if keep_states else None
        self.last_good: np.ndarray | None = None

    def record(self, t: float, v: np.ndarray, check: bool) -> None:
        rho = v.reshape(self.n, self.n)
        tr = float(np.trace(rho).real)
        lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        if check and (abs(tr - 1) > TRACE_TOL or lam < POSITIVITY_TOL):
            raise EvolutionError(
                f"state left the physical set at t = {t:.6e} s (trace {tr:.9f}, min eigenvalue {lam:.3e}); "
                "reduce dt or check the generators",
                t,
                None if self.last_good is None else _dm(self.last_good, self.space),
            )
        self.times.append(t)
        self.values["trace"].append(tr)
        self.values["min_eig"].append(lam)
        for k, a in self.ops.items():
            self.values[k].append(float(np.real(a @ v)))
        for k, f in self.funcs.items():
            self.values[k].append(float(f(rho)))
        if self.states is not None:
            self.states.append(rho.copy())
        self.last_good = v.copy()


def _dm(v: np.ndarray, space: HilbertSpace) -> DensityMatrix:
    n = space.dim
    return DensityMatrix(space, v.reshape(n, n), check=False)


# ---------------------------------------------------------------- evolution

def evolve(
    schedule: SegmentSchedule,
    dt: float = 1e-7,
    observables: Mapping[str, ObservableLike] | None = None,
    keep_states: bool = False,
    check: bool = True,
) -> Trajectory:
    """Integrate the master equation over every segment of ``schedule``.

    Time-dependent generators see a clock that restarts at zero in every segment.
    Observables are sampled at t=0, every ``record_stride`` within a segment (rounded
    to whole steps) and at each segment end. Trace and minimum eigenvalue are always
    recorded; leaving the physical set beyond 1e-6 raises ``EvolutionError``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    shortest = min(s.duration for s in schedule.segments)
    if dt > shortest * (1 + 1e-9):
        raise ValueError(f"dt = {dt:.3e} s exceeds the shortest segment ({shortest:.3e} s)")
    space = schedule.initial.space
    n = space.dim
    rec = _Recorder(space, observables, keep_states)
    v = np.array(schedule.initial.data, dtype=complex).reshape(-1)
    t = 0.0
    rec.record(t, v, check)
    ends = []
    cache = _GeneratorCache(n)
    for seg in schedule.segments:
        gen = cache(seg)
        steps = _n_steps(seg, dt)
        h = seg.duration / steps
        stride = steps if seg.record_stride is None else max(1, round(seg.record_stride / h))
        t0 = t
        for k in range(1, steps + 1):
            v = gen.step(v, (k - 1) * h, h)  # segment-local clock
            if k % stride == 0 or k == steps:
                rec.record(t0 + k * h, v, check)
        t = t0 + seg.duration
        ends.append(len(rec.times) - 1)
    return Trajectory(
        times=np.array(rec.times),
        observables={k: np.array(x) for k, x in rec.values.items()},
        segment_ends=ends,
        final_state=_dm(v, space),
        states=rec.states,
    )


def final_state(segments: Sequence[Segment], initial: DensityMatrix, dt: float = 1e-7) -> DensityMatrix:
    """Propagate without recording (no per-step diagnostics)."""
    n = initial.space.dim
    v = np.array(initial.data, dtype=complex).reshape(-1)
    cache = _GeneratorCache(n)
    for seg in segments:
        gen = cache(seg)
        steps = _n_steps(seg, dt)
        h = seg.duration / steps
        for k in range(steps):
            v = gen.step(v, k * h, h)
    return _dm(v, initial.space)


def evolve_adjoint(segments: Sequence[Segment], observable: Operator, dt: float = 1e-7) -> Operator:
    """Heisenberg-picture pull-back of ``observable`` through the discrete propagation.

    Returns O with Tr(O rho0) = Tr(A rho(T)) for every initial rho0, where rho(T) is
    what ``evolve`` would produce with the same dt. Constant segments only.
    """
    n = observable.space.dim
    a = np.ascontiguousarray(observable.data.T).reshape(-1).astype(complex)
    cache = _GeneratorCache(n)
    gens = [(cache(seg), seg) for seg in segments]
    for gen, seg in reversed(gens):
        steps = _n_steps(seg, dt)
        h = seg.duration / steps
        for _ in range(steps):
            a = gen.step_adjoint(a, h)
    return Operator(observable.space, a.reshape(n, n).T)


def depletion_evolve(
    segment: Segment,
    initial: DensityMatrix,
    watch: Operator,
    threshold: float,
    dt: float = 1e-7,
    cap: float | None = None,
) -> DepletionResult:
    """Run ``segment``'s generator until Tr(watch rho) < threshold or the time cap.

    The cap defaults to the segment duration. Reaching it is reported through
    ``depleted=False`` rather than raised.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    cap = segment.duration if cap is None else cap
    n = initial.space.dim
    w = np.ascontiguousarray(watch.data.T).reshape(-1)
    v = np.array(initial.data, dtype=complex).reshape(-1)
    if float(np.real(w @ v)) < threshold:
        return DepletionResult(initial, 0.0, True)
    gen = _Generator(segment, n)
    t = 0.0
    while t < cap - 1e-15:
        h = min(dt, cap - t)
        v = gen.step(v, t, h)
        t += h
        if float(np.real(w @ v)) < threshold:
            return DepletionResult(_dm(v, initial.space), t, True)
    return DepletionResult(_dm(v, initial.space), t, False)


def evolve_pure(
    hamiltonian: HamiltonianLike,
    psi0: np.ndarray,
    duration: float,
    max_step: float = 1e-8,
    record_every: int | None = None,
) -> tuple[np.ndarray, list[tuple[float, np.ndarray]]]:
    """RK4 Schrodinger integration of one or several state columns.

    ``psi0`` may be a vector or a (D, k) array of columns. Returns the final array and,
    if ``record_every`` is set, (time, state) samples every that many steps.
    """
    steps = max(1, math.ceil(duration / max_step - 1e-9))
    h = duration / steps
    if isinstance(hamiltonian, TimeDependentHamiltonian):
        static = None if hamiltonian.static is None else sps.csr_matrix(hamiltonian.static.data / HBAR)
        terms = [(sps.csr_matrix(op.data / HBAR), env) for op, env in hamiltonian.terms]

        def rhs(t, y):
            out = -1j * (static @ y) if static is not None else np.zeros_like(y)
            for m, env in terms:
                out = out - 1j * env(t) * (m @ y)
            return out
    elif isinstance(hamiltonian, Operator):
        hm = sps.csr_matrix(hamiltonian.data / HBAR)
        rhs = lambda t, y: -1j * (hm @ y)
    else:
        rhs = lambda t, y: -1j * (hamiltonian(t).data / HBAR) @ y
    y = np.array(psi0, dtype=complex)
    samples = [(0.0, y.copy())] if record_every else []
    for k in range(steps):
        t = k * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if record_every and ((k + 1) % record_every == 0 or k + 1 == steps):
            samples.append(((k + 1) * h, y.copy()))
    return y, samples
