"""QND squeezing engine: interaction map, losses, measurement update, scheduler.

A pulse of duration t couples Jx to the light Stokes component Sz with
H = Omega*Jx*Sz; in the scaled basis and to leading order in 1/sqrt(S0) the
second moments transform by the linear map M = identity except
M[Sy,Jx] = kappa*<R4>/sqrt(S0), kappa = t/tau, tau = 1/(Omega*sqrt(S0*J)).
Measuring Sy then conditions the Gaussian state (Schur complement), losses
mix the atomic block toward the completely mixed state, and the scheduler
repeats the cycle along x, y, z.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .ensemble import (
    JX,
    SX,
    SY,
    EnsembleParams,
    GaussianState,
    PulseParams,
    SqueezingReport,
    finalize_covariance,
    xi_squared,
)

RANK_TOL = 1e-12  # Gamma_55 below this is treated as a deterministic light quadrature

_AXIS_SLOT = {"x": 0, "y": 1, "z": 2}

# Cyclic permutations (determinant +1) bringing the requested axis into slot 1.
_ROTATIONS = {
    "x": np.eye(3),
    "y": np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
    "z": np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
}


def interaction_matrix(kappa: float, r4_scaled: float, s0: float) -> np.ndarray:
    """Linearized map: identity except M[Sy, Jx] = kappa * <R4> / sqrt(S0)."""
    m = np.eye(6)
    m[SY, JX] = kappa * r4_scaled / math.sqrt(s0)
    return m


def evolve(state: GaussianState, kappa: float) -> GaussianState:
    """Apply the pulse congruence Gamma -> M Gamma M^T, mean -> M mean."""
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    r4 = state.mean_scaled[SX]
    m = interaction_matrix(kappa, r4, state.pulse.s0)
    cov = finalize_covariance(m @ state.cov @ m.T)
    return state.with_(mean_scaled=m @ state.mean_scaled, cov=cov)


def eta_from_kappa(kappa: float, alpha: float, q: float) -> float:
    """Spontaneous-excitation probability eta = Q kappa^2 / alpha, clipped at 1."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    eta = q * kappa**2 / alpha
    if eta > 1.0:
        warnings.warn(f"eta = {eta:.4g} clipped to 1 (pulse beyond full depolarization)")
        return 1.0
    return eta


@dataclass(frozen=True)
class LossChannel:
    """Damping of the atomic block toward the mixed state with weight eta."""

    eta: float
    noise_level: float  # n_j/j, the scaled variance of the mixed state

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")

    @classmethod
    def for_pulse(cls, kappa: float, ensemble: EnsembleParams, pulse: PulseParams,
                  alpha: float | None = None) -> "LossChannel":
        a = pulse.alpha if alpha is None else alpha
        eta = 0.0 if math.isinf(a) else eta_from_kappa(kappa, a, pulse.resolve_q(ensemble))
        return cls(eta=eta, noise_level=ensemble.n_j / ensemble.j)


def apply_losses(state: GaussianState, channel: LossChannel) -> GaussianState:
    """Gamma -> (1-eta D) Gamma (1-eta D) + eta(2-eta) D Gamma_noise, D = atomic selector.

    Atomic means are damped by (1-eta); light rows are untouched except for
    the (1-eta) damping of atom-light cross terms from the congruence.
    """
    eta = channel.eta
    if eta == 0.0:
        return state
    d = np.diag([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    damp = np.eye(6) - eta * d
    cov = damp @ state.cov @ damp + eta * (2.0 - eta) * (d * channel.noise_level)
    mean_raw = state.mean_raw.copy()
    mean_raw[:3] *= 1.0 - eta
    return state.with_(mean_raw=mean_raw, cov=finalize_covariance(cov))


def measure_sy(state: GaussianState, mode: str = "deterministic",
               rng: np.random.Generator | None = None) -> tuple[GaussianState, float]:
    """Condition the state on a homodyne measurement of the light Sy.

    The projector P_y Gamma P_y has the single entry Gamma_55, so the
    Moore-Penrose update reduces to Gamma -> Gamma - (Gamma e5)(e5 Gamma)/Gamma_55.
    In sampled mode the outcome is drawn from N(mean5, Gamma_55) (scaled units)
    and the mean receives the conditional-Gaussian shift; deterministic mode
    returns the unconditional mean as outcome and leaves the mean unchanged.
    """
    g55 = state.cov[SY, SY]
    mean = state.mean_scaled
    if g55 <= RANK_TOL:
        warnings.warn("Gamma_55 at numerical rank deficiency; measurement is a no-op")
        return state, float(mean[SY])
    column = state.cov[:, SY].copy()
    cov = finalize_covariance(state.cov - np.outer(column, column) / g55)
    if mode == "deterministic":
        return state.with_(cov=cov), float(mean[SY])
    if mode == "sampled":
        rng = np.random.default_rng() if rng is None else rng
        outcome = rng.normal(mean[SY], math.sqrt(g55))
        shifted = mean + (outcome - mean[SY]) / g55 * column
        return state.with_(mean_scaled=shifted, cov=cov), float(outcome)
    raise ValueError(f"unknown measurement mode {mode!r}")


def feedback_reset(state: GaussianState, noise_c: float = 0.0) -> GaussianState:
    """Rotate the collective spin back to <J> = 0 using the measurement record.

    With noise_c > 0 the imperfect feedback adds c*sqrt(N)/J to the
    measured-axis scaled variance (slot 1).
    """
    mean_raw = state.mean_raw.copy()
    mean_raw[:3] = 0.0
    cov = state.cov
    if noise_c > 0.0:
        cov = cov.copy()
        cov[JX, JX] += noise_c * math.sqrt(state.ensemble.n_atoms) / state.ensemble.collective_j
    return state.with_(mean_raw=mean_raw, cov=cov)


def rotate_to_axis(state: GaussianState, axis: str) -> GaussianState:
    """Rotate the atomic block so the requested component occupies slot 1."""
    if axis not in _ROTATIONS:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    return _rotate_atomic(state, _ROTATIONS[axis])


def _rotate_atomic(state: GaussianState, r3: np.ndarray) -> GaussianState:
    o = np.eye(6)
    o[:3, :3] = r3
    cov = finalize_covariance(o @ state.cov @ o.T)
    return state.with_(mean_raw=o @ state.mean_raw, cov=cov)


def fresh_light(state: GaussianState, pulse: PulseParams | None = None) -> GaussianState:
    """Replace the light with a new fully polarized pulse; atoms untouched."""
    pulse = state.pulse if pulse is None else pulse
    cov = state.cov.copy()
    cov[3:, :] = 0.0
    cov[:, 3:] = 0.0
    cov[3:, 3:] = np.diag([0.0, 0.5, 0.5])
    mean_raw = state.mean_raw.copy()
    mean_raw[3:] = [pulse.s0, 0.0, 0.0]
    return state.with_(mean_raw=mean_raw, cov=finalize_covariance(cov), pulse=pulse)


@dataclass(frozen=True)
class Segment:
    axis: str
    duration: float  # units of tau
    grid: tuple[float, ...]  # strictly increasing sample times within [0, duration]

    def __post_init__(self):
        if self.axis not in _AXIS_SLOT:
            raise ValueError(f"axis must be one of x, y, z, got {self.axis!r}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        g = np.asarray(self.grid, dtype=float)
        if g.size < 1 or np.any(np.diff(g) <= 0) or g[0] < 0 or g[-1] > self.duration:
            raise ValueError("grid must be strictly increasing within [0, duration]")


@dataclass(frozen=True)
class MeasurementSchedule:
    """Ordered measurement segments plus loss and feedback configuration.

    alpha = None defers to the pulse's own optical depth; math.inf is lossless.
    feedback_mode is one of "reset", "reset-with-noise", "postselect".
    """

    segments: tuple[Segment, ...]
    alpha: float | None = None
    feedback_mode: str = "reset"
    noise_c: float = 0.0
    postselect_rule: object | None = None

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        if self.feedback_mode not in ("reset", "reset-with-noise", "postselect"):
            raise ValueError(f"unknown feedback mode {self.feedback_mode!r}")
        if self.feedback_mode == "postselect" and self.postselect_rule is None:
            raise ValueError("postselect feedback requires a rule")


def make_schedule(axes: str = "xyz", duration: float = 2.0, points: int = 64,
                  alpha: float | None = None, feedback_mode: str = "reset",
                  noise_c: float = 0.0, postselect_rule=None) -> MeasurementSchedule:
    """Uniform-grid schedule; the grid always ends exactly at the duration."""
    if points < 2:
        raise ValueError(f"need at least 2 grid points per segment, got {points}")
    grid = tuple(np.linspace(0.0, duration, points)[1:])  # kappa = 0 row added by the runner
    segments = tuple(Segment(axis=a, duration=duration, grid=grid) for a in axes)
    return MeasurementSchedule(segments=segments, alpha=alpha, feedback_mode=feedback_mode,
                               noise_c=noise_c, postselect_rule=postselect_rule)


@dataclass(frozen=True)
class TrajectoryRow:
    t_total: float  # cumulative interaction time, units of tau
    xi_squared: float
    gamma_xx: float
    gamma_yy: float
    gamma_zz: float
    eta: float
    validity_warning: bool


@dataclass(frozen=True)
class Trajectory:
    rows: tuple[TrajectoryRow, ...]
    final_state: GaussianState

    @property
    def final_report(self) -> SqueezingReport:
        return xi_squared(self.final_state)


def _record(state: GaussianState, back_rotation: np.ndarray, t_total: float,
            eta: float, warning: bool) -> TrajectoryRow:
    lab = _rotate_atomic(state, back_rotation)
    g = np.diag(lab.cov)
    return TrajectoryRow(
        t_total=t_total,
        xi_squared=float(g[0] + g[1] + g[2]),
        gamma_xx=float(g[0]),
        gamma_yy=float(g[1]),
        gamma_zz=float(g[2]),
        eta=eta,
        validity_warning=warning,
    )


def run_sequence(initial: GaussianState, schedule: MeasurementSchedule,
                 mode: str = "deterministic", seed: int | None = None) -> Trajectory:
    """Run the sequential measurement schedule and record the trajectory.

    Each segment rotates its axis into slot 1 and attaches a fresh pulse.
    A pulse of duration t is a single Gaussian measurement of strength
    kappa = t/tau: every grid point is evolved independently from the
    segment-start state, so intermediate rows never double-count
    measurement information.  The state committed to the next segment is
    the one measured at the final grid time, after feedback.
    """
    rng = np.random.default_rng(seed)
    state = initial
    rows: list[TrajectoryRow] = []
    offset = 0.0
    for index, seg in enumerate(schedule.segments):
        rotation = _ROTATIONS[seg.axis]
        state = _rotate_atomic(state, rotation)
        state = fresh_light(state)
        prior_var = state.cov[JX, JX]
        committed = state
        grid = seg.grid if index > 0 else (0.0,) + seg.grid
        for t in grid:
            kappa = t  # durations are in units of tau
            channel = LossChannel.for_pulse(kappa, state.ensemble, state.pulse,
                                            alpha=schedule.alpha)
            probed = evolve(state, kappa)
            probed = apply_losses(probed, channel)
            probed, _ = measure_sy(probed, mode=mode, rng=rng)
            warning = approximation_terms(state, kappa).validity_warning
            rows.append(_record(probed, rotation.T, offset + t, channel.eta, warning))
            if t == seg.grid[-1]:
                committed = probed
        if schedule.feedback_mode == "postselect":
            from .postselect import apply_postselection

            cov = committed.cov.copy()
            cov[JX, JX] = apply_postselection(prior_var, cov[JX, JX], schedule.postselect_rule)
            mean_raw = committed.mean_raw.copy()
            mean_raw[:3] = 0.0  # retained runs are centered by the threshold window
            committed = committed.with_(mean_raw=mean_raw, cov=finalize_covariance(cov))
        else:
            noise = schedule.noise_c if schedule.feedback_mode == "reset-with-noise" else 0.0
            committed = feedback_reset(committed, noise_c=noise)
        state = _rotate_atomic(committed, rotation.T)
        offset += seg.duration
    return Trajectory(rows=tuple(rows), final_state=state)


@dataclass(frozen=True)
class ApproximationTerms:
    """Magnitudes of the dropped second-moment terms and a validity flag.

    quartic ~ kappa^2/S0 <(dR4)^2 (dR1)^2> under Gaussian factorization;
    cubic is the r.m.s. scale of kappa/sqrt(S0) <dR1 {dR4, dR5}> (the mean
    of a centered Gaussian third moment vanishes identically).  The stored
    Gamma_44 = 0 encodes a classical <Sx>; the physical coherent-pulse
    fluctuation 1/2 is used for these estimates instead.
    """

    quartic: float
    cubic: float
    validity_warning: bool


def approximation_terms(state: GaussianState, kappa: float) -> ApproximationTerms:
    s0 = state.pulse.s0
    g = state.cov
    g44 = max(g[SX, SX], 0.5)
    quartic = kappa**2 / s0 * (g44 * g[JX, JX] + 2.0 * g[JX, SX] ** 2)
    cubic = kappa / math.sqrt(s0) * 2.0 * math.sqrt(
        g[JX, JX] * (g44 * g[SY, SY] + g[SX, SY] ** 2)
    )
    breakdown = 0.1 * math.sqrt(state.ensemble.collective_j)
    return ApproximationTerms(
        quartic=float(quartic),
        cubic=float(cubic),
        validity_warning=bool(kappa >= breakdown),
    )
