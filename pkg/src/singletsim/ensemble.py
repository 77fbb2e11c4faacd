"""Domain types, initial states, and squeezing metrics for unpolarized ensembles.

The collective system of N spin-j atoms plus one polarized light pulse is
described in the scaled operator basis

    R = (Jx/sqrt(J), Jy/sqrt(J), Jz/sqrt(J), Sx/sqrt(S0), Sy/sqrt(S0), Sz/sqrt(S0))

with J = N*j, by a 6-vector of means and the symmetric covariance matrix

    Gamma_mn = <R_m R_n + R_n R_m>/2 - <R_m><R_n>.

The generalized squeezing parameter

    xi^2 = (var Jx + var Jy + var Jz) / J = Gamma_11 + Gamma_22 + Gamma_33

equals j+1 for the completely mixed state, 1 for a product of oppositely
polarized halves, and 0 only for a many-body singlet; xi^2 < 1 witnesses
entanglement, and N*xi^2 bounds the number of unentangled particles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# Axis slots of the scaled basis.
JX, JY, JZ, SX, SY, SZ = range(6)

# Numeric hygiene for repeated congruence transforms.
SYMMETRY_TOL = 1e-12
PSD_EIGENVALUE_FLOOR = -1e-9


@dataclass(frozen=True)
class EnsembleParams:
    """Atom number and single-atom spin; J = N*j and n_j = j(j+1)/3 derived."""

    n_atoms: int
    j: float

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        two_j = 2 * self.j
        if two_j <= 0 or abs(two_j - round(two_j)) > 1e-12:
            raise ValueError(f"j must be a positive half-integer, got {self.j}")

    @property
    def collective_j(self) -> float:
        return self.n_atoms * self.j

    @property
    def n_j(self) -> float:
        """Single-axis variance of one fully mixed spin-j atom, j(j+1)/3."""
        return self.j * (self.j + 1.0) / 3.0


def default_q(j: float) -> float:
    """Level-structure decoherence factor: 1 for spin-1/2, 8/9 for spin-1.

    No general formula is available for other j; callers must supply one.
    """
    if abs(j - 0.5) < 1e-12:
        return 1.0
    if abs(j - 1.0) < 1e-12:
        return 8.0 / 9.0
    raise ValueError(f"no default level-structure factor for j={j}; pass q_factor explicitly")


@dataclass(frozen=True)
class PulseParams:
    """Probe pulse: Stokes photon number S0, coupling rate Omega, optical depth alpha.

    alpha = inf represents the lossless limit (eta forced to 0).  q_factor is
    the level-structure decoherence factor Q in eta = Q kappa^2 / alpha.
    """

    s0: float
    omega: float = 1.0
    alpha: float = math.inf
    q_factor: float | None = None

    def __post_init__(self):
        if self.s0 <= 0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.q_factor is not None and not 0.0 < self.q_factor <= 1.0:
            raise ValueError(f"q_factor must lie in (0, 1], got {self.q_factor}")

    def tau_for(self, ensemble: EnsembleParams) -> float:
        """Characteristic interaction time 1/(Omega sqrt(S0 J))."""
        return 1.0 / (self.omega * math.sqrt(self.s0 * ensemble.collective_j))

    def resolve_q(self, ensemble: EnsembleParams) -> float:
        return self.q_factor if self.q_factor is not None else default_q(ensemble.j)


def finalize_covariance(cov: np.ndarray) -> np.ndarray:
    """Symmetrize and clip a covariance matrix produced by a linear map.

    Raises ArithmeticError when asymmetry exceeds SYMMETRY_TOL or an
    eigenvalue falls below PSD_EIGENVALUE_FLOOR; residual negative
    eigenvalues inside the floor are clipped to zero.
    """
    cov = np.asarray(cov, dtype=float)
    asym = np.max(np.abs(cov - cov.T))
    if asym > SYMMETRY_TOL:
        raise ArithmeticError(f"covariance asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    cov = (cov + cov.T) / 2.0
    w, v = np.linalg.eigh(cov)
    if w.min() < PSD_EIGENVALUE_FLOOR:
        raise ArithmeticError(f"covariance eigenvalue {w.min():.3e} below {PSD_EIGENVALUE_FLOOR}")
    if w.min() < 0.0:
        w = np.clip(w, 0.0, None)
        cov = (v * w) @ v.T
        cov = (cov + cov.T) / 2.0
    return cov


@dataclass(frozen=True)
class GaussianState:
    """Gaussian state over R: scaled covariance plus means in raw operator units.

    mean_raw holds (<Jx>, <Jy>, <Jz>, <Sx>, <Sy>, <Sz>); the scaled mean
    vector <R> used by the linear maps is exposed via mean_scaled.  Storing
    raw units avoids rescaling when S0 differs between pulses.
    """

    mean_raw: np.ndarray
    cov: np.ndarray
    ensemble: EnsembleParams
    pulse: PulseParams

    def __post_init__(self):
        object.__setattr__(self, "mean_raw", np.asarray(self.mean_raw, dtype=float).copy())
        object.__setattr__(self, "cov", finalize_covariance(self.cov))
        if self.mean_raw.shape != (6,) or self.cov.shape != (6, 6):
            raise ValueError("GaussianState requires a 6-vector mean and 6x6 covariance")

    @property
    def scales(self) -> np.ndarray:
        sj = math.sqrt(self.ensemble.collective_j)
        ss = math.sqrt(self.pulse.s0)
        return np.array([sj, sj, sj, ss, ss, ss])

    @property
    def mean_scaled(self) -> np.ndarray:
        return self.mean_raw / self.scales

    def with_(self, *, mean_raw=None, mean_scaled=None, cov=None, pulse=None) -> "GaussianState":
        if mean_scaled is not None:
            if mean_raw is not None:
                raise ValueError("pass either mean_raw or mean_scaled, not both")
            mean_raw = np.asarray(mean_scaled, dtype=float) * self.scales
        return replace(
            self,
            mean_raw=self.mean_raw if mean_raw is None else mean_raw,
            cov=self.cov if cov is None else cov,
            pulse=self.pulse if pulse is None else pulse,
        )


@dataclass(frozen=True)
class SqueezingReport:
    """xi^2 with per-axis variances in raw units and the separability bound."""

    xi_squared: float
    var_x: float
    var_y: float
    var_z: float
    unentangled_bound: float
    entangled_flag: bool


def _light_block() -> np.ndarray:
    # <Sx> = S0 is treated as classical (zero variance); transverse components
    # carry the coherent-state value 1/2 in scaled units.
    return np.diag([0.0, 0.5, 0.5])


def _assemble(atomic_diag, ensemble: EnsembleParams, pulse: PulseParams) -> GaussianState:
    cov = np.zeros((6, 6))
    cov[:3, :3] = np.diag(atomic_diag)
    cov[3:, 3:] = _light_block()
    mean_raw = np.zeros(6)
    mean_raw[SX] = pulse.s0
    return GaussianState(mean_raw=mean_raw, cov=cov, ensemble=ensemble, pulse=pulse)


def make_completely_mixed(ensemble: EnsembleParams, pulse: PulseParams) -> GaussianState:
    """Completely mixed atomic state: per-axis scaled variance n_j/j, xi^2 = j+1."""
    v = ensemble.n_j / ensemble.j
    return _assemble([v, v, v], ensemble, pulse)


def make_product_updown(ensemble: EnsembleParams, pulse: PulseParams) -> GaussianState:
    """Product state with half the atoms fully up and half fully down along z.

    Transverse variance per atom is j/2, so the scaled atomic block is
    diag(1/2, 1/2, 0) and xi^2 = 1.  Requires even N.
    """
    if ensemble.n_atoms % 2 != 0:
        raise ValueError(f"product up/down state needs even n_atoms, got {ensemble.n_atoms}")
    return _assemble([0.5, 0.5, 0.0], ensemble, pulse)


def xi_squared(state: GaussianState) -> SqueezingReport:
    """Squeezing report: xi^2 = Gamma_11 + Gamma_22 + Gamma_33 (division by J implicit)."""
    j_total = state.ensemble.collective_j
    g = np.diag(state.cov)[:3]
    xi2 = float(g.sum())
    return SqueezingReport(
        xi_squared=xi2,
        var_x=float(g[0] * j_total),
        var_y=float(g[1] * j_total),
        var_z=float(g[2] * j_total),
        unentangled_bound=state.ensemble.n_atoms * xi2,
        entangled_flag=xi2 < 1.0,
    )


def field_sensitivity(state: GaussianState, direction, beta: float) -> tuple[float, float]:
    """Fidelity decrease ~ var(J_n) beta^2 under a small collective rotation.

    Returns (delta_f, bound) where bound = beta^2 * J * xi^2 >= delta_f for
    every unit direction n (Rayleigh-quotient bound on the atomic block).
    """
    n = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector, |n| = {np.linalg.norm(n)}")
    j_total = state.ensemble.collective_j
    var_n = j_total * float(n @ state.cov[:3, :3] @ n)
    report = xi_squared(state)
    return var_n * beta**2, beta**2 * j_total * report.xi_squared


def fisher_upper_bound(state: GaussianState) -> float:
    """Upper bound 4 J xi^2 = 4 (var Jx + var Jy + var Jz) on the QFI."""
    return 4.0 * state.ensemble.collective_j * xi_squared(state).xi_squared
