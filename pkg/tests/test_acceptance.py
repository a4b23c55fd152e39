"""Acceptance suite: criteria 1-9 at their stated tolerances.

Each test records its sub-checks in RESULTS; conftest prints one PASS/FAIL line per
criterion at the end of the session. Run directly (``python3 tests/test_acceptance.py``)
to get the same lines without pytest.
"""

from __future__ import annotations

import functools
import math
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from wstate.cli import presets
from wstate.cli.presets import Check, Context, at_least, holds, within
from wstate.cli.runs import parallel_map, run_job
from wstate.couplings import IonDrivePhase, MSConfig, ms_ideal_propagator, ms_propagator
from wstate.lindblad import JumpOperator, Segment, SegmentSchedule, evolve, final_state
from wstate.protocols import SchemeAConfig, SchemeBConfig, run_scheme_a, run_scheme_b, single_pass_transfer
from wstate.protocols import scheme_a, scheme_b
from wstate.qcore import HBAR, DensityMatrix, HilbertSpace, Operator, StateVector, annihilation, number
from wstate.wbasis import (
    LABELS,
    QUBITS,
    LogicalState,
    NoiseDirection,
    WLabel,
    chirality_operator,
    global_noise_operator,
    logical_readout,
    nss_encode,
    w_basis,
    w_state,
)

TITLES = {
    1: "W-basis suite",
    2: "MS gate",
    3: "dissipation oracle",
    4: "repump scheme, 100 repumping steps",
    5: "sideband scheme, clean run",
    6: "ground-state-cooling limit table",
    7: "crystal modes and tuning table",
    8: "scattering pair consistency",
    9: "property suite",
}
RESULTS: dict[int, list[Check]] = {}


def verdict(n: int, checks: list[Check]) -> None:
    RESULTS[n] = checks
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)


def summary_lines() -> list[str]:
    lines = []
    for n in sorted(RESULTS):
        checks = RESULTS[n]
        ok = all(c.passed for c in checks)
        bad = [c.name for c in checks if not c.passed]
        tail = f"  failing: {', '.join(bad)}" if bad else ""
        lines.append(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {TITLES[n]} ({len(checks)} checks){tail}")
    return lines


@functools.lru_cache(maxsize=None)
def clean_reference(dt: float = 100e-9, n_max: int = 6):
    return run_scheme_b(SchemeBConfig(dt=dt, n_max=n_max))


@functools.lru_cache(maxsize=None)
def cooling_limit_reports():
    base = SchemeBConfig()
    cfgs = [replace(base, gamma_gsc=n * base.kappa) for n, _ in presets.TABLE1]
    return parallel_map(run_job, [(c, None) for c in cfgs], None)


@pytest.fixture
def ctx(tmp_path):
    return Context(tmp_path)


# ---------------------------------------------------------------- 1

def criterion_1() -> list[Check]:
    b = w_basis()
    gram = np.abs(b.conj().T @ b - np.eye(8)).max()
    chi = chirality_operator().data
    eig = max(np.abs(chi @ w_state(l).amplitudes - l.s * w_state(l).amplitudes).max() for l in LABELS)
    rng = np.random.default_rng(2024)
    worst_defect, worst_shift = 0.0, 0.0
    for _ in range(200):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        alpha, beta = a[:2] / np.linalg.norm(a[:2])
        g1, g2 = a[2:] / np.linalg.norm(a[2:])
        # readout fixes the global phase so that alpha is real and nonnegative
        ph = np.exp(-1j * np.angle(alpha))
        psi = nss_encode(LogicalState(alpha * ph, beta * ph, g1, g2))
        n = rng.normal(size=3)
        u = expm(-0.5j * rng.uniform(0, 4 * np.pi) * global_noise_operator(NoiseDirection.from_vector(n)).data)
        a0, b0, _ = logical_readout(psi)
        a1, b1, d1 = logical_readout(StateVector.normalized(QUBITS, u @ psi.amplitudes))
        worst_defect = max(worst_defect, d1)
        worst_shift = max(worst_shift, abs(a1 - a0), abs(b1 - b0))
    return [
        Check("gram_deviation", float(gram), "< 1e-12", gram < 1e-12),
        Check("chirality_eigen_residual", float(eig), "< 1e-12", eig < 1e-12),
        Check("nss_defect_after_global_noise", float(worst_defect), "< 1e-9", worst_defect < 1e-9),
        Check("nss_logical_shift", float(worst_shift), "< 1e-9", worst_shift < 1e-9),
    ]


def test_criterion_1():
    verdict(1, criterion_1())


# ---------------------------------------------------------------- 2

def criterion_2() -> list[Check]:
    checks = []
    for ds in (-1, 0, 1):
        u = ms_ideal_propagator(np.exp(0.3j), ds).data
        p = abs(np.vdot(w_state(WLabel(2, ds)).amplitudes, u @ w_state(WLabel(0, 0)).amplitudes)) ** 2
        checks.append(within(f"analytic_transfer_ds{ds:+d}", p, 0.75, 1e-12))
    rabi = math.pi / (30e-6) / math.sqrt(2)
    cfg = MSConfig.ideal(rabi, IonDrivePhase.chiral(1, global_phase=0.2))
    space = HilbertSpace.ions(3, 2, 10)
    u = ms_propagator(cfg, space).data
    ideal = ms_ideal_propagator(cfg.u, -1).data
    vac = np.eye(11)[0]
    worst = 1.0
    for lab in LABELS:
        v = w_state(lab).amplitudes
        out = (u @ np.kron(v, vac)).reshape(8, 11)
        rho = out @ out.conj().T  # motion traced out
        want = ideal @ v
        worst = min(worst, float(np.real(np.vdot(want, rho @ want))))
    checks.append(at_least("full_ms_min_basis_fidelity_nmax10", worst, 0.999))
    return checks


def test_criterion_2():
    verdict(2, criterion_2())


# ---------------------------------------------------------------- 3

def _oracle_error(seed: int) -> float:
    rng = np.random.default_rng(seed)
    n = 6
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 1e5 * (g + g.conj().T) / 2
    cs = [np.sqrt(1e5 / n) * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) for _ in range(2)]
    r = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho0 = r @ r.conj().T
    rho0 /= np.trace(rho0)
    i = np.eye(n)
    sup = -1j * (np.kron(i, h) - np.kron(h.T, i))  # column-stacking
    for c in cs:
        cdc = c.conj().T @ c
        sup += np.kron(c.conj(), c) - 0.5 * np.kron(i, cdc) - 0.5 * np.kron(cdc.T, i)
    t = 20e-6
    want = (expm(sup * t) @ rho0.reshape(-1, order="F")).reshape(n, n, order="F")
    sp = HilbertSpace.from_dims((n,))
    seg = Segment(Operator(sp, HBAR * h), tuple(JumpOperator(Operator(sp, c)) for c in cs), t)
    return float(np.abs(final_state([seg], DensityMatrix(sp, rho0), 1e-8).data - want).max())


def criterion_3() -> list[Check]:
    checks = []
    n_max, kappa = 30, 2 / 30e-6
    space = HilbertSpace.mode(n_max)
    a = annihilation(n_max)
    rho0 = np.zeros((n_max + 1, n_max + 1))
    rho0[0, 0] = 1
    for nbar in (0.01, 0.1, 0.3):
        gamma = nbar * kappa
        jumps = (JumpOperator.with_rate(kappa, a), JumpOperator.with_rate(gamma, a), JumpOperator.with_rate(gamma, a.dag()))
        seg = Segment(None, jumps, 40 / (kappa - gamma))
        traj = evolve(SegmentSchedule((seg,), DensityMatrix(space, rho0)), 2e-7, {"n": number(n_max)})
        checks.append(within(f"steady_state_mean_n_{nbar:g}", float(traj["n"][-1]), nbar, 0.01, relative=True))
    err = max(_oracle_error(s) for s in range(5))
    checks.append(Check("integrator_vs_superoperator_expm", err, "< 1e-7", err < 1e-7))
    return checks


def test_criterion_3():
    verdict(3, criterion_3())


# ---------------------------------------------------------------- 4

def criterion_4() -> list[Check]:
    cfg = SchemeAConfig(cycles=50)
    rep = run_scheme_a(cfg)
    f = rep.iteration_fidelities
    return [
        holds("repumping_steps_is_100", len(f) == 100, "100 repump steps"),
        within("fidelity_after_100_repumps", rep.final_fidelity, 0.980, 0.005),
        holds("monotone_at_repump_ends", bool(np.all(np.diff(f) >= -1e-12)), "nondecreasing"),
    ]


def test_criterion_4():
    verdict(4, criterion_4())


# ---------------------------------------------------------------- 5

def criterion_5() -> list[Check]:
    cfg = SchemeBConfig()
    rep = clean_reference()
    checks = [
        at_least("single_pass_transfer", single_pass_transfer(cfg), 0.99),
        at_least("fidelity_after_20_iterations", rep.final_fidelity, 0.999),
    ]
    for n in (1, 2, 3):
        checks.append(within(f"iteration_{n}_vs_1_minus_4^-n", float(rep.iteration_fidelities[n - 1]),
                             1 - 0.25**n, 0.01))
    return checks


def test_criterion_5():
    verdict(5, criterion_5())


# ---------------------------------------------------------------- 6

def criterion_6() -> list[Check]:
    return [within(f"fidelity_n_gsc_{n:g}", r.final_fidelity, f, 0.005)
            for (n, f), r in zip(presets.TABLE1, cooling_limit_reports())]


def test_criterion_6():
    verdict(6, criterion_6())


# ---------------------------------------------------------------- 7

def criterion_7(ctx: Context) -> list[Check]:
    return presets.fig2(ctx).checks + presets.table2(ctx).checks


def test_criterion_7(ctx):
    verdict(7, criterion_7(ctx))


# ---------------------------------------------------------------- 8

def criterion_8(ctx: Context) -> list[Check]:
    return presets.fig5d(ctx).checks


def test_criterion_8(ctx):
    verdict(8, criterion_8(ctx))


# ---------------------------------------------------------------- 9

def criterion_9() -> list[Check]:
    checks = []
    for target in (WLabel(1, 1), WLabel(1, -1), WLabel(2, 1), WLabel(2, -1)):
        rep = run_scheme_b(SchemeBConfig(target=target, iterations=3), ions=w_state(target))
        worst = float(rep.trajectory["fidelity"].min())
        checks.append(Check(f"dark_state_{target.tag}", worst, "> 1 - 1e-6 throughout", worst > 1 - 1e-6))
    _, fids = scheme_b.basis_convergence(SchemeBConfig(iterations=30))
    checks.append(Check("sideband_scheme_64_basis_min_after_30", float(fids.min()), "> 0.999", fids.min() > 0.999))
    _, fids_a = scheme_a.basis_convergence(SchemeAConfig(cycles=75))
    checks.append(Check("repump_scheme_64_basis_min_after_150", float(fids_a.min()), "> 0.95", fids_a.min() > 0.95))

    ref = clean_reference()
    top = ref.meta["max_top2_fock"]
    checks.append(Check("top2_fock_clean_run", top, "< 1e-5", top < 1e-5))
    for (n, _), r in zip(presets.TABLE1, cooling_limit_reports()):
        top = r.meta["max_top2_fock"]
        checks.append(Check(f"top2_fock_n_gsc_{n:g}", top, "< 1e-5", top < 1e-5))
    d = abs(clean_reference(n_max=12).final_fidelity - ref.final_fidelity)
    checks.append(Check("nmax_doubling_clean_run", d, "< 1e-4", d < 1e-4))
    hot = SchemeBConfig(gamma_gsc=0.3 * SchemeBConfig().kappa, record_stride=10e-6)
    d = abs(run_scheme_b(replace(hot, n_max=12)).final_fidelity - cooling_limit_reports()[-1].final_fidelity)
    checks.append(Check("nmax_doubling_n_gsc_0.3", d, "< 1e-4", d < 1e-4))
    d = abs(clean_reference(dt=50e-9).final_fidelity - ref.final_fidelity)
    checks.append(Check("dt_halving_clean_run", d, "< 1e-6", d < 1e-6))
    return checks


def test_criterion_9():
    verdict(9, criterion_9())


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        for n, fn in enumerate((criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
                                criterion_7, criterion_8, criterion_9), start=1):
            sub = Path(tmp) / str(n)
            sub.mkdir()
            RESULTS[n] = fn(Context(sub)) if n in (7, 8) else fn()
            for c in RESULTS[n]:
                print("    " + c.line())
            print(summary_lines()[-1], flush=True)
    print()
    print("\n".join(summary_lines()))
