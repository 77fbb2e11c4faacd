"""Named invariant checks tying every module together; drives `singletsim validate`."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import ensemble as ens
from . import exact, postselect, qnd
from .config import ExperimentConfig, config_from_dict, config_to_dict

PAPER_ALPHA_ENDPOINTS = {50.0: 0.737, 75.0: 0.609, 100.0: 0.540}
ALPHA_ENDPOINT_TOL = 0.005


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    observed: str
    expected: str
    detail: str = ""


def _result(name, passed, observed, expected, detail="") -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), observed=str(observed),
                       expected=str(expected), detail=detail)


def _random_psd(rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((6, 6))
    return a @ a.T / 6.0


def _mixed_state(j=1.0, n_atoms=1_000_000, s0=5e7) -> ens.GaussianState:
    params = ens.EnsembleParams(n_atoms=n_atoms, j=j)
    pulse = ens.PulseParams(s0=s0)
    return ens.make_completely_mixed(params, pulse)


def _state_with_cov(cov: np.ndarray) -> ens.GaussianState:
    base = _mixed_state()
    return base.with_(cov=cov)


# ---------------------------------------------------------------------------
# closed-form endpoint recursion (independent of the pipeline implementation)
# ---------------------------------------------------------------------------

def measured_axis_value(v0: float, kappa: float, eta: float) -> float:
    """One damped pulse + conditioning from the mixed fixed point v0."""
    damped = v0 * (1.0 - eta) ** 2 + eta * (2.0 - eta) * v0  # = v0
    return damped - (kappa * v0 * (1.0 - eta)) ** 2 / (0.5 + kappa**2 * v0)


def endpoint_recursion(j: float, q: float, alpha: float, kappa: float = 2.0,
                       n_axes: int = 3) -> float:
    """Final xi^2 of the sequential schedule from the per-axis recursion.

    Every axis sits at the loss fixed point v0 = n_j/j until measured, is
    measured once, then is damped by each later segment's loss channel.
    """
    v0 = (j + 1.0) / 3.0
    eta = 0.0 if math.isinf(alpha) else q * kappa**2 / alpha
    m = measured_axis_value(v0, kappa, eta)
    total = 0.0
    for later_segments in range(n_axes):
        v = m
        for _ in range(later_segments):
            v = v * (1.0 - eta) ** 2 + eta * (2.0 - eta) * v0
        total += v
    return total


# ---------------------------------------------------------------------------
# individual checks
# ---------------------------------------------------------------------------

def _check_constructors() -> list[CheckResult]:
    out = []
    worst = 0.0
    for j, expect in ((0.5, 1.5), (1.0, 2.0), (2.0, 3.0)):
        st = _mixed_state(j=j, n_atoms=100)
        worst = max(worst, abs(ens.xi_squared(st).xi_squared - expect))
        cross = np.max(np.abs(st.cov[:3, 3:]))
        worst = max(worst, cross)
    init2 = ens.make_product_updown(ens.EnsembleParams(100, 1.0), ens.PulseParams(s0=1e4))
    worst = max(worst, abs(ens.xi_squared(init2).xi_squared - 1.0))
    out.append(_result("constructor-closed-forms", worst <= 1e-12, f"max dev {worst:.2e}",
                       "xi^2 = j+1 (mixed), 1 (up/down); zero cross block; <= 1e-12"))
    return out


def _check_rotation_invariance(rng, cases: int) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        cov = _random_psd(rng)
        st = _state_with_cov(cov)
        o3 = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        full = np.eye(6)
        full[:3, :3] = o3
        rotated = st.with_(cov=ens.finalize_covariance(full @ st.cov @ full.T))
        worst = max(worst, abs(ens.xi_squared(rotated).xi_squared
                               - ens.xi_squared(st).xi_squared))
    return _result("rotation-trace-invariance", worst <= 1e-11,
                   f"max dev {worst:.2e} over {cases} rotations", "<= 1e-11")


def _check_field_sensitivity(rng, cases: int) -> CheckResult:
    worst = -math.inf
    for _ in range(cases):
        st = _state_with_cov(_random_psd(rng))
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        beta = rng.uniform(0.0, 1e-3)
        delta_f, bound = ens.field_sensitivity(st, n, beta)
        worst = max(worst, delta_f - bound)
    return _result("field-sensitivity-rayleigh-bound", worst <= 1e-12,
                   f"max excess {worst:.2e} over {cases} cases", "delta_f <= beta^2 J xi^2")


def _check_measurement_fuzz(rng, cases: int) -> list[CheckResult]:
    bad_contract = 0
    bad_psd = 0
    bad_fixed = 0
    noise = 2.0 / 3.0
    for _ in range(cases):
        cov = _random_psd(rng)
        st = _state_with_cov(cov)
        measured, _ = qnd.measure_sy(st)
        if np.any(np.diag(measured.cov) > np.diag(st.cov) + 1e-12):
            bad_contract += 1
        if np.linalg.eigvalsh(measured.cov).min() < ens.PSD_EIGENVALUE_FLOOR:
            bad_psd += 1
        mixed_cov = cov.copy()
        mixed_cov[:3, :3] = np.diag([noise] * 3)
        mixed_cov[:3, 3:] = 0.0
        mixed_cov[3:, :3] = 0.0
        st2 = _state_with_cov(ens.finalize_covariance(mixed_cov))
        eta = rng.uniform(0.0, 1.0)
        lost = qnd.apply_losses(st2, qnd.LossChannel(eta=eta, noise_level=noise))
        if np.max(np.abs(np.diag(lost.cov)[:3] - noise)) > 1e-12:
            bad_fixed += 1
    return [
        _result("measurement-contraction", bad_contract == 0,
                f"{bad_contract}/{cases} violations", "diagonal never increases"),
        _result("measurement-psd-preservation", bad_psd == 0,
                f"{bad_psd}/{cases} violations", f"eigmin >= {ens.PSD_EIGENVALUE_FLOOR}"),
        _result("loss-fixed-point", bad_fixed == 0,
                f"{bad_fixed}/{cases} violations", "mixed block invariant for any eta"),
    ]


def _check_evolve_properties(rng, cases: int) -> list[CheckResult]:
    worst_atomic = 0.0
    for _ in range(cases):
        st = _state_with_cov(_random_psd(rng))
        kappa = rng.uniform(0.0, 3.0)
        evolved = qnd.evolve(st, kappa)
        worst_atomic = max(worst_atomic, np.max(np.abs(evolved.cov[:3, :3] - st.cov[:3, :3])))
    st = _mixed_state()
    identity_dev = np.max(np.abs(qnd.evolve(st, 0.0).cov - st.cov))
    lossless = np.max(np.abs(
        qnd.apply_losses(st, qnd.LossChannel(eta=0.0, noise_level=2.0 / 3.0)).cov - st.cov))
    return [
        _result("evolve-preserves-atomic-block", worst_atomic <= 1e-12,
                f"max dev {worst_atomic:.2e} over {cases} cases", "<= 1e-12"),
        _result("evolve-kappa0-identity", identity_dev == 0.0, f"dev {identity_dev:.2e}", "0"),
        _result("loss-eta0-identity", lossless == 0.0, f"dev {lossless:.2e}", "0"),
    ]


def _check_monotone_kappa() -> CheckResult:
    st = _mixed_state()
    kappas = np.linspace(0.0, 20.0, 81)
    values = []
    for kappa in kappas:
        probed, _ = qnd.measure_sy(qnd.evolve(st, kappa))
        values.append(probed.cov[0, 0])
    diffs = np.diff(values)
    ok = np.all(diffs <= 1e-15) and values[-1] < values[0]
    return _result("measured-axis-monotone-in-kappa", ok,
                   f"Gamma_11 {values[0]:.4f} -> {values[-1]:.6f}",
                   "strictly decreasing toward 0")


def _check_sampled_mode(rng, samples: int) -> list[CheckResult]:
    st = qnd.fresh_light(_mixed_state())
    evolved = qnd.evolve(st, 2.0)
    det, _ = qnd.measure_sy(evolved, mode="deterministic")
    shifts = np.zeros((samples, 6))
    cov_equal = True
    for i in range(samples):
        sampled, _ = qnd.measure_sy(evolved, mode="sampled", rng=rng)
        cov_equal = cov_equal and np.array_equal(sampled.cov, det.cov)
        shifts[i] = sampled.mean_scaled - det.mean_scaled
    g55 = evolved.cov[qnd.SY, qnd.SY]
    sigma = np.abs(evolved.cov[:, qnd.SY]) / math.sqrt(g55) / math.sqrt(samples)
    mean_shift = np.abs(shifts.mean(axis=0))
    within = np.all(mean_shift <= 3.0 * sigma + 1e-15)
    return [
        _result("sampled-covariance-equals-deterministic", cov_equal,
                "outcome-independent update", "bitwise equal covariances"),
        _result("sampled-mean-shift-unbiased", within,
                f"max |mean shift| {mean_shift.max():.3e} over {samples} samples",
                "within 3 sigma of zero"),
    ]


def _check_arithmetic_examples() -> list[CheckResult]:
    out = []
    eta = qnd.eta_from_kappa(2.0, 100.0, 8.0 / 9.0)
    out.append(_result("eta-example-j1", abs(eta - 0.035556) <= 5e-7,
                       f"{eta:.6f}", "0.035556 +- 5e-7"))
    eta2 = qnd.eta_from_kappa(1.0, 50.0, 1.0)
    out.append(_result("eta-example-spin-half", abs(eta2 - 0.02) <= 1e-12,
                       f"{eta2:.6f}", "0.02"))
    st = _mixed_state()
    cov = st.cov.copy()
    cov[0, 0] = 0.14448
    st = st.with_(cov=cov)
    lost = qnd.apply_losses(st, qnd.LossChannel(eta=0.035556, noise_level=2.0 / 3.0))
    out.append(_result("loss-channel-example", abs(lost.cov[0, 0] - 0.18095) <= 2e-5,
                       f"{lost.cov[0, 0]:.6f}", "0.18095 +- 2e-5"))
    measured, _ = qnd.measure_sy(qnd.evolve(st.with_(cov=_mixed_state().cov), 2.0))
    out.append(_result("measured-axis-example", abs(measured.cov[0, 0] - 2.0 / 19.0) <= 1e-12,
                       f"{measured.cov[0, 0]:.10f}", "2/19"))
    return out


def _check_endpoints(config: ExperimentConfig) -> list[CheckResult]:
    out = []
    params = config.ensemble_params()
    pulse = config.pulse_params()
    q = pulse.resolve_q(params)
    schedule = config.schedule_for(alpha=math.inf)
    mixed = ens.make_completely_mixed(params, pulse)
    xi_mixed = qnd.run_sequence(mixed, schedule).final_report.xi_squared
    expect = endpoint_recursion(config.ensemble.j, q, math.inf)
    out.append(_result("lossless-endpoint-pipeline-vs-recursion",
                       abs(xi_mixed - expect) <= 1e-9,
                       f"{xi_mixed:.9f} vs {expect:.9f}", "equal to 1e-9"))
    for alpha in config.loss.alphas:
        traj = qnd.run_sequence(mixed, config.schedule_for(alpha=alpha))
        xi = traj.final_report.xi_squared
        rec = endpoint_recursion(config.ensemble.j, q, alpha)
        out.append(_result(f"alpha{alpha:g}-pipeline-vs-recursion", abs(xi - rec) <= 1e-9,
                           f"{xi:.9f} vs {rec:.9f}", "equal to 1e-9"))
        target = PAPER_ALPHA_ENDPOINTS.get(alpha)
        if target is not None:
            margin = abs(xi - target)
            out.append(_result(f"alpha{alpha:g}-endpoint-value", margin <= ALPHA_ENDPOINT_TOL,
                               f"{xi:.6f} (margin {margin:.6f})",
                               f"{target} +- {ALPHA_ENDPOINT_TOL}"))
    return out


def _check_postselect(mc_draws: int, seed) -> list[CheckResult]:
    out = []
    grid = np.linspace(0.05, 5.0, 60)
    rules = [postselect.make_rule(b) for b in grid]
    qs = np.array([r.q for r in rules])
    mus = np.array([r.mu for r in rules])
    mono = np.all(np.diff(qs) > 0) and np.all(np.diff(mus) > 0)
    out.append(_result("postselect-monotone", mono and np.all(mus < qs),
                       "q, mu strictly increasing; mu < q", "monotone on B/Delta in [0.05, 5]"))
    worst = 0.0
    for b in grid:
        for power in (0, 2):
            closed = postselect.truncated_integral(power, b, "closed")
            quad = postselect.truncated_integral(power, b, "quad")
            worst = max(worst, abs(closed - quad) / max(abs(closed), 1e-300))
    out.append(_result("postselect-closed-vs-quadrature", worst <= 1e-10,
                       f"max rel dev {worst:.2e}", "<= 1e-10"))
    rule = postselect.make_rule(0.678)
    acc, var = postselect.rejection_sample(rule, mc_draws, seed=seed)
    sig_q = math.sqrt(rule.q * (1.0 - rule.q) / mc_draws)
    b = rule.threshold_ratio
    i4, _ = integrate.quad(lambda x: x**4 * math.exp(-x**2 / 2.0), -b, b)
    e4 = i4 / postselect.truncated_integral(0, b, "quad")
    sig_mu = math.sqrt(max(e4 - rule.mu**2, 0.0) / (rule.q * mc_draws))
    ok = abs(acc - rule.q) <= 3 * sig_q and abs(var - rule.mu) <= 3 * sig_mu
    out.append(_result("postselect-monte-carlo-consistency", ok,
                       f"acceptance {acc:.5f} vs {rule.q:.5f}; variance {var:.5f} vs {rule.mu:.5f}",
                       f"within 3 sigma ({mc_draws} draws)"))
    return out


def _check_exact_model(quick: bool) -> list[CheckResult]:
    out = []
    state = exact.TwoGroupState(n1=10_000, n2=10_000)
    j_total = state.j_total
    ts = np.geomspace(0.1, math.sqrt(j_total), 5 if quick else 9)
    worst_bound = -math.inf
    values = []
    try:
        for t in ts:
            var = exact.var_jx_exact(state, float(t), method="both")
            kernel = exact.KernelG.for_state(state, float(t))
            worst_bound = max(worst_bound,
                              var - min(kernel.sigma_sq, state.prior_variance))
            values.append(exact.xi_exact(state, float(t)))
        out.append(_result("exact-closed-vs-quadrature", True,
                           f"agreement to {exact.QUADRATURE_RTOL} on {len(ts)} points", "built-in"))
    except ArithmeticError as err:
        out.append(_result("exact-closed-vs-quadrature", False, str(err), "agreement"))
        return out
    out.append(_result("exact-harmonic-bound", worst_bound <= 0.0,
                       f"max excess {worst_bound:.2e}", "var <= min(sigma_G^2, sigma_u^2)"))
    out.append(_result("exact-xi-monotone", np.all(np.diff(values) <= 1e-12),
                       f"xi {values[0]:.4f} -> {values[-1]:.4f}", "nonincreasing in t"))
    levels = (81, 201) if quick else (81, 201, 801)
    cs = [exact.fit_kernel_width(lv, 1.0, 50.0) for lv in levels]
    ok = all(0.97 <= c <= 1.0001 for c in cs) and np.all(np.diff(cs) > 0) \
        and abs(cs[-1] - 1.0) < 0.006
    out.append(_result("kernel-width-constant", ok,
                       "c = " + ", ".join(f"{c:.5f}" for c in cs),
                       "increasing toward 1 with S0"))
    return out


def _check_oracle(quick: bool, seed) -> list[CheckResult]:
    out = []
    # kappa = 0: projection acts on the light only
    res = exact.brute_force_oracle(4, 21, 0.0, initial="init2")
    dev = max(abs(res.var_x - 1.0), abs(res.var_y - 1.0), abs(res.var_z))
    out.append(_result("oracle-kappa0-init2", dev <= 1e-9,
                       f"({res.var_x:.6f}, {res.var_y:.6f}, {res.var_z:.6f})",
                       "(N/4, N/4, 0) for N=4"))
    # pipeline route vs oracle at S0 = 40 (81 levels)
    params = ens.EnsembleParams(n_atoms=6, j=0.5)
    pulse = ens.PulseParams(s0=40.0)
    worst = 0.0
    for kappa in ((1.0,) if quick else (0.5, 1.0, 2.0)):
        st = qnd.evolve(ens.make_product_updown(params, pulse), kappa)
        st, _ = qnd.measure_sy(st)
        var_pipeline = st.cov[0, 0] * params.collective_j
        res = exact.brute_force_oracle(6, 81, kappa, initial="init2")
        worst = max(worst, abs(res.var_x - var_pipeline) / var_pipeline)
    bound = 2.0 / math.sqrt(40.0)
    out.append(_result("oracle-vs-pipeline", worst <= bound,
                       f"max rel dev {worst:.4f}", f"<= 2/sqrt(S0) = {bound:.4f}"))
    # mapped higher spin: j=1 ensemble reduced to spin-1/2 pairs
    eff = exact.map_higher_spin(2, 2, 1.0)
    res = exact.brute_force_oracle(eff[0] + eff[1], 81, 2.0, initial="init2")
    st = qnd.evolve(ens.make_product_updown(ens.EnsembleParams(4, 1.0),
                                            ens.PulseParams(s0=40.0)), 2.0)
    st, _ = qnd.measure_sy(st)
    xi_gauss = ens.xi_squared(st).xi_squared
    out.append(_result("oracle-higher-spin-mapping", abs(res.xi_squared - xi_gauss) <= 0.15,
                       f"xi {res.xi_squared:.4f} vs Gaussian {xi_gauss:.4f}",
                       "agree within the small-scale oracle tolerance 0.15"))
    if quick:
        return out
    sizes = (21, 41, 81)
    mean_err = []
    max_shift_81 = 0.0
    for levels in sizes:
        errs = []
        for n in (2, 4, 6):
            for kappa in (0.5, 1.0, 2.0):
                res = exact.brute_force_oracle(n, levels, kappa, initial="mixed", seed=seed)
                ref = exact.gaussian_reference_var(n, kappa)
                errs.append(abs(res.var_x - ref) / ref)
                if levels == 81:
                    shift = abs(res.transverse_post - res.transverse_pre) / res.transverse_pre
                    max_shift_81 = max(max_shift_81, shift)
        mean_err.append(float(np.mean(errs)))
    trend_ok = mean_err[0] > mean_err[1] > mean_err[2] and mean_err[-1] <= 0.25
    detail = ", ".join(f"S0_levels={lv}: {e:.4f}" for lv, e in zip(sizes, mean_err))
    out.append(_result("oracle-trend-over-sizes", trend_ok, detail,
                       "mean rel err decreasing over the three sizes, final <= 0.25"))
    out.append(_result("oracle-transverse-conservation", max_shift_81 <= 0.05,
                       f"max rel shift {max_shift_81:.2e} at 81 levels", "<= 0.05"))
    return out


def _check_config_roundtrip() -> CheckResult:
    base = ExperimentConfig()
    variants = [base, config_from_dict({"ensemble": {"n_atoms": 10, "j": 0.5},
                                        "loss": {"alphas": []},
                                        "seed": 7})]
    ok = all(config_from_dict(config_to_dict(c)) == c for c in variants)
    return _result("config-round-trip", ok, "parse(dump(config)) == config", "equality")


def run_all_checks(config: ExperimentConfig | None = None, quick: bool = False,
                   seed: int = 20260814) -> list[CheckResult]:
    """Run every module invariant plus the oracle comparisons."""
    config = config or ExperimentConfig()
    rng = np.random.default_rng(seed)
    cases = 200 if quick else 1000
    results: list[CheckResult] = []
    results += _check_constructors()
    results.append(_check_rotation_invariance(rng, 100))
    results.append(_check_field_sensitivity(rng, cases // 2))
    results += _check_measurement_fuzz(rng, cases)
    results += _check_evolve_properties(rng, cases // 2)
    results.append(_check_monotone_kappa())
    results += _check_sampled_mode(rng, 1000 if quick else 10_000)
    results += _check_arithmetic_examples()
    results += _check_endpoints(config)
    results += _check_postselect(100_000 if quick else 1_000_000, seed)
    results += _check_exact_model(quick)
    results += _check_oracle(quick, seed)
    results.append(_check_config_roundtrip())
    return results
