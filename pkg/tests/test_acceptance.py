"""Acceptance gate: one test per headline result, at the stated tolerances.

Run with -v to get one pass/fail line per criterion.
"""

import math

import numpy as np
import pytest

from singletsim import cli
from singletsim import ensemble as ens
from singletsim import exact, postselect, qnd
from singletsim.validate import endpoint_recursion

N_ATOMS = 1_000_000
S0 = 5e7


def _mixed():
    return ens.make_completely_mixed(ens.EnsembleParams(N_ATOMS, 1.0),
                                     ens.PulseParams(s0=S0))


def test_criterion_1_lossless_mixed_endpoint():
    traj = qnd.run_sequence(_mixed(), qnd.make_schedule())
    assert traj.final_report.xi_squared == pytest.approx(6.0 / 19.0, abs=1e-6)


def test_criterion_2_lossless_product_endpoint():
    init2 = ens.make_product_updown(ens.EnsembleParams(N_ATOMS, 1.0),
                                    ens.PulseParams(s0=S0))
    traj = qnd.run_sequence(init2, qnd.make_schedule())
    assert traj.final_report.xi_squared == pytest.approx(0.2, abs=1e-6)


def test_criterion_3_lossy_endpoints_with_recursion_crosscheck():
    q = 8.0 / 9.0
    for alpha, target in ((50.0, 0.737), (75.0, 0.609), (100.0, 0.540)):
        traj = qnd.run_sequence(_mixed(), qnd.make_schedule(alpha=alpha))
        xi = traj.final_report.xi_squared
        assert xi == pytest.approx(target, abs=0.005), f"alpha={alpha}"
        rec = endpoint_recursion(1.0, q, alpha)
        assert round(xi, 3) == round(rec, 3), f"alpha={alpha}: {xi} vs recursion {rec}"


def test_criterion_4_postselection_statistics():
    loose = postselect.make_rule(1.150)
    assert loose.q == pytest.approx(0.750, abs=0.002)
    assert loose.mu == pytest.approx(0.370, abs=0.005)
    tight = postselect.make_rule(0.678)
    assert tight.mu == pytest.approx(0.144, abs=0.002)
    n = 1_000_000
    acc, var = postselect.rejection_sample(tight, n, seed=2026)
    assert abs(acc - tight.q) <= 3.0 * math.sqrt(tight.q * (1 - tight.q) / n)
    assert abs(var - tight.mu) <= 0.002
    # The retention at threshold 0.678 is erf(0.678/sqrt 2)/1 = 0.502228; the
    # threshold whose retention is exactly 1/2 is 0.67449.  The rounded
    # threshold therefore cannot reproduce q to +-0.002, and this assertion
    # records that fact rather than widening the window.
    assert tight.q == pytest.approx(0.500, abs=0.002), (
        "retention at threshold 0.678 is 0.502228, outside 0.500 +- 0.002; "
        "invert_for_q(0.5) gives threshold 0.67449"
    )


def test_criterion_5_exact_model_asymptotics_and_scaling():
    st = exact.TwoGroupState(n1=N_ATOMS // 2, n2=N_ATOMS // 2, j=1.0)
    sqrt_j = math.sqrt(st.j_total)
    for t in (10.0 * sqrt_j, 30.0 * sqrt_j, 100.0 * sqrt_j):
        assert exact.xi_exact(st, t) == pytest.approx(0.500, abs=0.01)
    assert exact.xi_exact(st, 1e-6) == pytest.approx(1.000, abs=1e-6)
    ratios = []
    for j in (100, 10_000, 1_000_000):
        s = exact.TwoGroupState(n1=j // 2, n2=j // 2, j=1.0)
        ratios.append(exact.var_jx_exact(s, j**0.25) / math.sqrt(j))
    assert max(ratios) / min(ratios) < 2.0


def test_criterion_6_oracle_equivalence():
    mean_errs = []
    for levels in (21, 41, 81):
        errs = []
        for n in (2, 4, 6):
            for kappa in (0.5, 1.0, 2.0):
                res = exact.brute_force_oracle(n, levels, kappa, initial="mixed")
                ref = exact.gaussian_reference_var(n, kappa)
                errs.append(abs(res.var_x - ref) / ref)
                if levels == 81:
                    shift = abs(res.transverse_post - res.transverse_pre)
                    assert shift / res.transverse_pre <= 0.05, (n, kappa)
        mean_errs.append(float(np.mean(errs)))
    assert mean_errs[0] > mean_errs[1] > mean_errs[2], mean_errs
    assert mean_errs[2] <= 0.25, mean_errs


def test_criterion_7_structural_invariant_fuzz():
    rng = np.random.default_rng(20260814)
    base = _mixed()
    noise = 2.0 / 3.0
    failures = 0
    for _ in range(1000):
        a = rng.standard_normal((6, 6))
        cov = ens.finalize_covariance(a @ a.T / 6.0)
        st = base.with_(cov=cov)
        measured, _ = qnd.measure_sy(st)
        if np.any(np.diag(measured.cov) > np.diag(cov) + 1e-12):
            failures += 1
        if np.linalg.eigvalsh(measured.cov).min() < ens.PSD_EIGENVALUE_FLOOR:
            failures += 1
        o3 = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        full = np.eye(6)
        full[:3, :3] = o3
        rotated = ens.finalize_covariance(full @ cov @ full.T)
        if abs(np.trace(rotated[:3, :3]) - np.trace(cov[:3, :3])) > 1e-11:
            failures += 1
        mixed_cov = cov.copy()
        mixed_cov[:3, :3] = np.diag([noise] * 3)
        mixed_cov[:3, 3:] = 0.0
        mixed_cov[3:, :3] = 0.0
        st2 = base.with_(cov=ens.finalize_covariance(mixed_cov))
        lost = qnd.apply_losses(st2, qnd.LossChannel(eta=float(rng.uniform(0, 1)),
                                                     noise_level=noise))
        if np.max(np.abs(np.diag(lost.cov)[:3] - noise)) > 1e-12:
            failures += 1
    assert failures == 0


def test_criterion_8_fig2_byte_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["--out", str(out), "--format", "both", "fig2"]) == 0
    files_a = sorted(p.name for p in a.iterdir())
    assert files_a == sorted(p.name for p in b.iterdir())
    assert len(files_a) == 7
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
