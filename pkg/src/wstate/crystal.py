"""Axial mechanics of a linear mixed-species ion crystal.

Trap potential per unit charge: V(x) = k2 x^2 / 2 + k4 x^4 / 4. Equilibrium positions
come from a damped Newton minimization of the total energy, normal modes from the
mass-weighted Hessian. Lengths are in m, frequencies in rad/s, masses in kg.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import constants
from scipy.optimize import bisect, brentq

Q_E = constants.e
K_COULOMB = 1.0 / (4 * np.pi * constants.epsilon_0)
AMU = constants.atomic_mass

UV_PER_UM2 = 1e-6 / 1e-12
UV_PER_UM4 = 1e-6 / 1e-24
K4_MAX = 0.0156 * UV_PER_UM4
GAP_WARNING_HZ = 130e3


@dataclass(frozen=True)
class IonSpecies:
    name: str
    mass: float

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise ValueError(f"species {self.name}: mass must be positive")


# (mass number, atomic mass in u)
_ISOTOPES = {
    "Be9": (9, 9.0121831),
    "Mg25": (25, 24.98583696),
    "Ca40": (40, 39.96259086),
    "Ca43": (43, 42.9587666),
    "Sr88": (88, 87.9056125),
    "Ba138": (138, 137.9052472),
    "Yb171": (171, 170.9363302),
}
_ALIASES = {"Be": "Be9", "Mg": "Mg25", "Ca": "Ca40", "Sr": "Sr88", "Ba": "Ba138", "Yb": "Yb171"}
# single-letter chain codes used in crystal names like "MBBBM"
CHAIN_CODES = {"B": "Be9", "M": "Mg25", "C": "Ca40", "S": "Sr88"}


def species(name: str, mass_model: Literal["mass_number", "isotopic"] = "mass_number") -> IonSpecies:
    """Look up an ion. ``mass_model='mass_number'`` uses A times the atomic mass unit."""
    key = _ALIASES.get(name, name)
    if key not in _ISOTOPES:
        raise KeyError(f"unknown ion species {name!r}; known: {sorted(_ISOTOPES)}")
    a, exact = _ISOTOPES[key]
    if mass_model == "mass_number":
        return IonSpecies(key, a * AMU)
    if mass_model == "isotopic":
        return IonSpecies(key, exact * AMU)
    raise ValueError(f"unknown mass model {mass_model!r}")


def chain(names: Sequence[str] | str, mass_model: str = "mass_number") -> tuple[IonSpecies, ...]:
    if isinstance(names, str):
        names = [CHAIN_CODES[c] for c in names] if names.isupper() and "-" not in names else names.split("-")
    return tuple(species(n, mass_model) for n in names)


class CrystalError(ValueError):
    pass


@dataclass(frozen=True)
class CrystalConfig:
    species: tuple[IonSpecies, ...]
    k2: float
    k4: float = 0.0
    charge: float = Q_E

    def __post_init__(self) -> None:
        object.__setattr__(self, "species", tuple(self.species))
        if len(self.species) < 2:
            raise ValueError("a crystal needs at least two ions")
        if self.charge <= 0:
            raise ValueError("charge must be positive")
        if self.k2 <= 0 and self.k4 <= 0:
            raise CrystalError("potential is not confining: need k2 > 0 or k4 > 0")

    @classmethod
    def from_lab_units(cls, species_list, k2_uV_per_um2: float, k4_uV_per_um4: float = 0.0) -> "CrystalConfig":
        if isinstance(species_list, str) or not isinstance(species_list[0], IonSpecies):
            species_list = chain(species_list)
        return cls(tuple(species_list), k2_uV_per_um2 * UV_PER_UM2, k4_uV_per_um4 * UV_PER_UM4)

    @property
    def n_ions(self) -> int:
        return len(self.species)

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.species])


@dataclass(frozen=True)
class NormalModes:
    positions: np.ndarray
    frequencies: np.ndarray
    vectors: np.ndarray      # columns are modes
    amplitudes: np.ndarray   # z_j^(l), columns are modes
    couplings: np.ndarray    # C^(l) in 1/kg
    masses: np.ndarray

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.frequencies / (2 * np.pi)

    def index(self, selector: Literal["highest", "lowest"] | int) -> int:
        n = len(self.frequencies)
        if selector == "highest":
            return n - 1
        if selector == "lowest":
            return 0
        l = int(selector)
        if not -n <= l < n:
            raise IndexError(f"mode index {l} out of range for {n} modes")
        return l % n

    def gap(self, l: int) -> float:
        """Distance (rad/s) from mode l to its nearest neighbour in frequency."""
        others = np.delete(self.frequencies, l)
        return float(np.min(np.abs(others - self.frequencies[l])))


# ---------------------------------------------------------------- equilibrium

def _length_scale(cfg: CrystalConfig) -> float:
    kc = K_COULOMB * cfg.charge**2
    if cfg.k2 > 0:
        return (kc / (cfg.charge * cfg.k2)) ** (1 / 3)
    # balance q (k2 l^3 + k4 l^5) = kc for a double well
    f = lambda l: cfg.charge * (cfg.k2 * l**3 + cfg.k4 * l**5) - kc
    hi = 1e-6
    while f(hi) < 0:
        hi *= 2
    return brentq(f, np.sqrt(max(-cfg.k2, 0) / cfg.k4) if cfg.k4 > 0 else 0, hi)


def _scaled(cfg: CrystalConfig, ell: float) -> tuple[float, float]:
    kc = K_COULOMB * cfg.charge**2
    return cfg.charge * cfg.k2 * ell**3 / kc, cfg.charge * cfg.k4 * ell**5 / kc


def _energy(y, a2, a4):
    d = np.diff(y)
    if np.any(d <= 0):
        return np.inf
    dd = np.abs(y[:, None] - y[None, :])
    iu = np.triu_indices(len(y), 1)
    return float(np.sum(a2 * y**2 / 2 + a4 * y**4 / 4) + np.sum(1 / dd[iu]))


def _grad_hess(y, a2, a4):
    d = y[:, None] - y[None, :]
    np.fill_diagonal(d, np.inf)
    g = a2 * y + a4 * y**3 - np.sum(np.sign(d) / d**2, axis=1)
    off = -2 / np.abs(d) ** 3
    np.fill_diagonal(off, 0)
    h = off.copy()
    h[np.diag_indices_from(h)] = a2 + 3 * a4 * y**2 - off.sum(axis=1)
    return g, h


def _harmonic_unit_positions(n: int) -> np.ndarray:
    y = np.linspace(-1, 1, n) * max(1.0, 0.8 * n**0.56)
    return _minimize(y, 1.0, 0.0)


def _minimize(y, a2, a4, max_iter=500):
    e = _energy(y, a2, a4)
    for _ in range(max_iter):
        g, h = _grad_hess(y, a2, a4)
        if np.max(np.abs(g)) < 1e-14:
            return y
        lam = np.linalg.eigvalsh(h)[0]
        shift = 0.0 if lam > 1e-8 else 1e-3 - lam
        step = -np.linalg.solve(h + shift * np.eye(len(y)), g)
        t = 1.0
        while t > 1e-12:
            y_new = y + t * step
            e_new = _energy(y_new, a2, a4)
            if e_new <= e + 1e-4 * t * float(g @ step) or (shift == 0 and t == 1.0 and np.max(np.abs(step)) < 1e-9):
                break
            t *= 0.5
        else:
            raise CrystalError("equilibrium solver failed to make progress")
        y, e = y_new, e_new
        if np.max(np.abs(y)) > 1e6:
            raise CrystalError("ions escape: potential is unbound")
    raise CrystalError("equilibrium solver did not converge")


def equilibrium_positions(cfg: CrystalConfig) -> np.ndarray:
    """Ordered equilibrium positions (m) of the ions along the trap axis."""
    ell = _length_scale(cfg)
    a2, a4 = _scaled(cfg, ell)
    y0 = _harmonic_unit_positions(cfg.n_ions)
    if a2 <= 0:
        # start outside the double-well minima so the chain is compressed inward
        y0 = y0 * max(1.0, np.sqrt(-a2 / a4) / max(abs(y0[0]), 1e-12) * 1.5)
    y = _minimize(y0, a2, a4)
    if a4 < 0 and np.max(np.abs(y)) ** 2 >= -a2 / a4:
        raise CrystalError("equilibrium lies beyond the potential barrier: unbound")
    _, h = _grad_hess(y, a2, a4)
    if np.linalg.eigvalsh(h)[0] <= 0:
        raise CrystalError("stationary point is not a minimum (Hessian not positive definite)")
    x = y * ell
    if cfg.species == cfg.species[::-1]:
        x = 0.5 * (x - x[::-1])  # enforce exact inversion symmetry
    return x


def net_forces(cfg: CrystalConfig, x: np.ndarray) -> np.ndarray:
    kc = K_COULOMB * cfg.charge**2
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, np.inf)
    return -cfg.charge * (cfg.k2 * x + cfg.k4 * x**3) + kc * np.sum(np.sign(d) / d**2, axis=1)


def hessian(cfg: CrystalConfig, x: np.ndarray) -> np.ndarray:
    kc = K_COULOMB * cfg.charge**2
    d = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(d, np.inf)
    a = -2 * kc / d**3
    np.fill_diagonal(a, 0)
    a[np.diag_indices_from(a)] = cfg.charge * (cfg.k2 + 3 * cfg.k4 * x**2) - a.sum(axis=1)
    return a


# ---------------------------------------------------------------- modes

def _orient(v: np.ndarray) -> np.ndarray:
    """Fix each column's sign: first clearly nonzero entry positive."""
    out = v.copy()
    for l in range(v.shape[1]):
        col = v[:, l]
        j = int(np.argmax(np.abs(col) > 1e-6 * np.max(np.abs(col))))
        if col[j] < 0:
            out[:, l] = -col
    return out


def normal_modes(cfg: CrystalConfig) -> NormalModes:
    x = equilibrium_positions(cfg)
    m = cfg.masses
    a = hessian(cfg, x)
    dm = a / np.sqrt(np.outer(m, m))
    w2, v = np.linalg.eigh(0.5 * (dm + dm.T))
    if w2[0] <= 0:
        raise CrystalError(f"unstable configuration: negative curvature {w2[0]:.3e}")
    v = _orient(v)
    w = np.sqrt(w2)
    z = np.sqrt(constants.hbar / (2 * m[:, None] * w[None, :])) * v
    c = (v / np.sqrt(m)[:, None]).sum(axis=0) ** 2
    return NormalModes(x, w, v, z, c, m)


def harmonic_reference_coupling(masses: Sequence[float]) -> float:
    """C of the lowest (in-phase) mode of the same ions in a purely harmonic well.

    Harmonic mode vectors do not depend on the well depth, so any k2 > 0 works.
    """
    sp = tuple(IonSpecies(f"ion{j}", float(mj)) for j, mj in enumerate(masses))
    modes = normal_modes(CrystalConfig(sp, 1.0 * UV_PER_UM2, 0.0))
    return float(modes.couplings[0])


def heating_coupling(modes: NormalModes, l: int) -> tuple[float, float]:
    """(C^(l), C^(l)/C0) with C0 from the harmonic in-phase reference."""
    l = modes.index(l)
    c = float(modes.couplings[l])
    return c, c / harmonic_reference_coupling(modes.masses)


def lamb_dicke(modes: NormalModes, l: int, delta_k: float) -> np.ndarray:
    if delta_k < 0:
        raise ValueError("delta_k must be nonnegative")
    return delta_k * np.abs(modes.amplitudes[:, modes.index(l)])


def harmonic_k2_for_frequency(species_list: Sequence[IonSpecies], frequency_hz: float, mode: int = 0) -> float:
    """k2 (V/m^2) placing harmonic mode ``mode`` at ``frequency_hz`` (frequencies scale as sqrt(k2))."""
    ref = CrystalConfig(tuple(species_list), UV_PER_UM2, 0.0)
    f_ref = normal_modes(ref).frequencies_hz[mode]
    return UV_PER_UM2 * (frequency_hz / f_ref) ** 2


# ---------------------------------------------------------------- k2 tuning

# -5 ... 60 uV/um^2 in 0.5 steps; covers double wells and typical single-ion wells
DEFAULT_SCAN = np.linspace(-5.0, 60.0, 131) * UV_PER_UM2


@dataclass(frozen=True)
class TuneResult:
    k2: float
    k4: float
    mode_index: int
    modes: NormalModes
    uniformity: float
    gap_hz: float
    gap_flag: bool

    @property
    def frequency_hz(self) -> float:
        return float(self.modes.frequencies_hz[self.mode_index])

    @property
    def k2_uV_per_um2(self) -> float:
        return self.k2 / UV_PER_UM2


def participation_asymmetry(species_list, k2: float, k4: float, mode_selector, qubit_indices) -> float:
    """|z_center| - |z_outer| (m) for the selected mode; zero at uniform participation."""
    modes = normal_modes(CrystalConfig(tuple(species_list), k2, k4))
    l = modes.index(mode_selector)
    q = list(qubit_indices)
    z = np.abs(modes.amplitudes[:, l])
    return float(z[q[len(q) // 2]] - z[q[0]])


def tune_k2(
    species_list: Sequence[IonSpecies],
    k4: float,
    mode_selector: Literal["highest", "lowest"] | int,
    qubit_indices: Sequence[int],
    bracket: tuple[float, float] | None = None,
    k4_limit: float = K4_MAX,
) -> TuneResult:
    """Bisect k2 inside ``bracket`` (V/m^2) until the qubit ions participate equally.

    Without a bracket, k2 is scanned over ``DEFAULT_SCAN`` and the single interval where
    the asymmetry changes sign is used; zero or several candidates raise.
    """
    if abs(k4) > k4_limit * (1 + 1e-12):
        raise ValueError(f"|k4| = {abs(k4):.4g} exceeds the enforced bound {k4_limit:.4g} V/m^4")
    if bracket is None:
        found = scan_sign_changes(species_list, k4, mode_selector, qubit_indices, DEFAULT_SCAN)
        if len(found) != 1:
            raise CrystalError(f"expected one sign change in the default k2 scan, found {len(found)}; pass a bracket")
        bracket = found[0]
    lo, hi = sorted(bracket)
    f = lambda k2: participation_asymmetry(species_list, k2, k4, mode_selector, qubit_indices)
    try:
        flo, fhi = f(lo), f(hi)
    except CrystalError as exc:
        raise CrystalError(f"unstable crystal at the bracket ends: {exc}") from exc
    if flo * fhi > 0:
        raise CrystalError(f"no sign change of the participation asymmetry in [{lo:.4g}, {hi:.4g}] V/m^2")
    try:
        k2 = bisect(f, lo, hi, xtol=1e-12 * max(abs(lo), abs(hi)), rtol=1e-14, maxiter=200)
    except CrystalError as exc:
        raise CrystalError(f"unstable crystal inside the bracket: {exc}") from exc
    modes = normal_modes(CrystalConfig(tuple(species_list), k2, k4))
    l = modes.index(mode_selector)
    z = np.abs(modes.amplitudes[list(qubit_indices), l])
    uniformity = float((z.max() - z.min()) / z.mean())
    if uniformity >= 1e-4:
        raise CrystalError(f"bisection ended at a discontinuity (uniformity {uniformity:.2e}); mode crossing?")
    gap = modes.gap(l) / (2 * np.pi)
    return TuneResult(k2, k4, l, modes, uniformity, gap, gap < GAP_WARNING_HZ)


def scan_sign_changes(species_list, k4, mode_selector, qubit_indices, k2_grid) -> list[tuple[float, float]]:
    """Adjacent grid intervals where the asymmetry changes sign (unstable points skipped)."""
    vals = []
    for k2 in k2_grid:
        try:
            vals.append((k2, participation_asymmetry(species_list, k2, k4, mode_selector, qubit_indices)))
        except CrystalError:
            vals.append((k2, None))
    out = []
    for (a, fa), (b, fb) in zip(vals, vals[1:]):
        if fa is not None and fb is not None and fa * fb <= 0:
            out.append((a, b))
    return out
