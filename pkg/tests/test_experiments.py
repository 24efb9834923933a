import math

import numpy as np
import pytest

from soliton_noise.core import BoxPotential, CriticalConfigurationError, InvalidInputError
from soliton_noise.experiments import (ExperimentConfig, direct_eigenvalue_resolve,
                                       limit_moments, run_creation_probability,
                                       run_diffusion_convergence, run_first_order_validation,
                                       summarize_convergence, summarize_creation,
                                       summarize_first_order)
from soliton_noise.kdv import kdv_bound_solution, kdv_find_eigenvalues
from soliton_noise.nls import nls_find_eigenvalues, nls_jost_box
from soliton_noise.perturbation import kdv_eta_correction, nls_eta_correction
from soliton_noise.processes import (BrownianPath, NoiseSpec, PathGrid, sample_brownian,
                                     sample_brownian_ensemble)
from soliton_noise.sde import LimitSystemSpec, integrate_kdv_limit, integrate_nls_limit

NLS_POT = BoxPotential(1.0, 3.0)
KDV_POT = BoxPotential(5.0, 1.0)


def small_cfg(eq="nls", pot=NLS_POT, sigma=0.01, kind="real_white", n=100, steps=300,
              ladder=(0.02, 0.01), seed=3):
    return ExperimentConfig(eq, pot, NoiseSpec(sigma, kind=kind), n, PathGrid(pot.R, steps), seed,
                            ladder)


def test_config_invariants():
    with pytest.raises(InvalidInputError):
        small_cfg(n=50)
    with pytest.raises(InvalidInputError):
        small_cfg(ladder=(0.01, 0.02))
    with pytest.raises(InvalidInputError):
        ExperimentConfig("nls", NLS_POT, NoiseSpec(0.1), 100, PathGrid(2.0, 10))
    with pytest.raises(InvalidInputError):
        ExperimentConfig("burgers", NLS_POT, NoiseSpec(0.1), 100, PathGrid(3.0, 10))


@pytest.mark.parametrize("eq,pot", [("nls", NLS_POT), ("kdv", KDV_POT), ("nls", BoxPotential(2, 5)),
                                    ("kdv", BoxPotential(50, 1))])
def test_resolve_without_noise_is_deterministic_eigenvalue(eq, pot):
    rep = nls_find_eigenvalues(pot) if eq == "nls" else kdv_find_eigenvalues(pot)
    p = sample_brownian(0, PathGrid(pot.R, 200))
    for eta0 in rep.eigenvalues:
        eta = direct_eigenvalue_resolve(eq, pot, NoiseSpec(0.0), p, eta0)
        assert isinstance(eta, float)
        assert abs(eta - eta0) <= 1e-10


def test_resolve_matches_first_order_per_path():
    W = sample_brownian_ensemble(0, 20, PathGrid(3.0, 600))
    eta0 = nls_find_eigenvalues(NLS_POT).eigenvalues[0]
    d = nls_eta_correction(NLS_POT, eta0, W).d_eta
    errs = []
    for s in (0.02, 0.01, 0.005):
        eta = direct_eigenvalue_resolve("nls", NLS_POT, NoiseSpec(s), W, eta0)
        errs.append(np.max(np.abs(eta - eta0 - s * d)))
    slope = np.polyfit(np.log([0.02, 0.01, 0.005]), np.log(errs), 1)[0]
    assert slope > 1.8
    assert errs[1] < 10 * 0.01 ** 2


def test_resolve_residual_is_zero():
    W = sample_brownian_ensemble(1, 5, PathGrid(1.0, 300))
    eta0 = kdv_find_eigenvalues(KDV_POT).eigenvalues[0]
    ns = NoiseSpec(0.05)
    eta = direct_eigenvalue_resolve("kdv", KDV_POT, ns, W, eta0)
    for i in range(5):
        st = integrate_kdv_limit(LimitSystemSpec("kdv", KDV_POT, 1j * eta[i], ns), W.select(i),
                                 "expm").terminal_state
        assert abs(st.phi_x + eta[i] * st.phi) < 1e-9


def test_zero_background_eta_is_half_terminal():
    W = sample_brownian_ensemble(0, 300, PathGrid(1.0, 200))
    sigma = 0.01
    eta = direct_eigenvalue_resolve("kdv", BoxPotential(0.0, 1.0), NoiseSpec(sigma), W, 0.0)
    big = W.terminal > 0.5
    ratio = eta[big] / (sigma * W.terminal[big] / 2)
    assert np.all((ratio >= 0.98) & (ratio <= 1.02))
    assert np.all(np.isnan(eta[W.terminal < -0.05]))


def test_oracle_symmetry_under_negation():
    W = sample_brownian_ensemble(4, 10, PathGrid(1.0, 300))
    eta0 = kdv_find_eigenvalues(KDV_POT).eigenvalues[0]
    sigma = 0.01
    d = kdv_eta_correction(KDV_POT, eta0, W).d_eta
    dn = kdv_eta_correction(KDV_POT, eta0, W.negated()).d_eta
    assert np.array_equal(d, -dn)
    a = direct_eigenvalue_resolve("kdv", KDV_POT, NoiseSpec(sigma), W, eta0) - eta0
    b = direct_eigenvalue_resolve("kdv", KDV_POT, NoiseSpec(sigma), W.negated(), eta0) - eta0
    assert np.max(np.abs(a + b)) < 10 * sigma ** 2


def test_validation_report_is_reproducible_and_recomputable():
    cfg = small_cfg()
    r1, r2 = run_first_order_validation(cfg), run_first_order_validation(cfg)
    for k in r1.records:
        assert np.array_equal(r1.records[k], r2.records[k], equal_nan=True)
    assert r1.summary == r2.summary
    again = summarize_first_order(r1.records, 0.01, (0.02, 0.01), r1.summary["analytic_variance"],
                                  False)
    for k, v in again.items():
        assert r1.summary[k] == v or (math.isnan(v) and math.isnan(r1.summary[k]))
    assert r1.summary["correlation"] > 0.99
    assert r1.passes["velocity_invariance"]


def test_complex_validation_runs():
    rep = run_first_order_validation(small_cfg(kind="complex_white"))
    s = rep.summary
    assert s["correlation"] > 0.99 and s["xi_correlation"] > 0.99
    assert 0.1 < s["xi_eta_variance_ratio"] < 0.4
    assert "xi_eta_same_variance" in rep.passes


def test_validation_without_eigenvalue():
    with pytest.raises(CriticalConfigurationError):
        run_first_order_validation(small_cfg(pot=BoxPotential(1.0, 1.0)))


def test_creation_run_small():
    pot = BoxPotential(1.0, math.pi / 2)
    rep = run_creation_probability(small_cfg(pot=pot, n=200, steps=200, ladder=()))
    s = rep.summary
    assert abs(s["fraction"] - 0.5) < 4 * s["fraction_se"]
    assert 0.95 < s["ratio_mean"] < 1.05
    assert s == {**summarize_creation(rep.records), "sigma": 0.01}
    with pytest.raises(CriticalConfigurationError):
        run_creation_probability(small_cfg(n=100, ladder=()))


def test_limit_moments_against_closed_forms():
    pot = BoxPotential(1.0, 2.0)
    ns = NoiseSpec(0.3)
    m, _ = limit_moments("nls", pot, 0.5j, ns)
    assert m == pytest.approx(math.exp(-0.5 * 0.09 * 2) * nls_jost_box(pot, 0.5j, 2.0).psi1,
                              rel=1e-12)
    m, second = limit_moments("kdv", BoxPotential(1.0, 1.0), 0.3j, ns)
    det = kdv_bound_solution(BoxPotential(1.0, 1.0), 0.3, 1.0).phi
    assert m == pytest.approx(det, rel=1e-12)
    assert second > det ** 2
    _, s0 = limit_moments("kdv", BoxPotential(1.0, 1.0), 0.3j, NoiseSpec(0.0))
    assert s0 == pytest.approx(det ** 2, rel=1e-12)


@pytest.mark.parametrize("eq", ["nls", "kdv"])
def test_limit_second_moment_against_monte_carlo(eq):
    pot = BoxPotential(1.0, 2.0 if eq == "nls" else 1.0)
    zeta = 0.5j if eq == "nls" else 0.3j
    ns = NoiseSpec(0.5)
    W = sample_brownian_ensemble(0, 8000, PathGrid(pot.R, 400))
    if eq == "nls":
        y = integrate_nls_limit(LimitSystemSpec("nls_real", pot, zeta, ns), W).terminal_state.psi1
    else:
        y = integrate_kdv_limit(LimitSystemSpec("kdv", pot, zeta, ns), W).terminal_state.phi
    m, second = limit_moments(eq, pot, zeta, ns)
    sq = np.abs(y) ** 2
    assert abs(sq.mean() - second) < 3.5 * sq.std() / math.sqrt(sq.size) + 1e-3
    assert abs(np.mean(y) - m) < 3.5 * np.std(y) / math.sqrt(y.size) + 1e-3


def test_convergence_zero_noise_control():
    cfg = ExperimentConfig("nls", BoxPotential(1.0, 2.0), NoiseSpec(0.0), 100, PathGrid(2.0, 100),
                           0, (), (0.4, 0.2, 0.1), zeta=0.5j)
    rep = run_diffusion_convergence(cfg)
    assert np.all(rep.records["discrepancy"] < 1e-6)
    assert rep.summary["non_increasing"] == 1.0
    assert {k: rep.summary[k] for k in summarize_convergence(rep.records)} == \
        summarize_convergence(rep.records)


def test_convergence_requires_ladder():
    cfg = ExperimentConfig("kdv", BoxPotential(1.0, 1.0), NoiseSpec(0.3), 100, PathGrid(1.0, 100))
    with pytest.raises(InvalidInputError):
        run_diffusion_convergence(cfg)


def test_single_path_resolve_accepts_zero_path():
    p = BrownianPath.zero(PathGrid(3.0, 100))
    eta0 = nls_find_eigenvalues(NLS_POT).eigenvalues[0]
    assert direct_eigenvalue_resolve("nls", NLS_POT, NoiseSpec(0.3), p, eta0) == pytest.approx(
        eta0, abs=1e-10)
