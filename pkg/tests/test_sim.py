"""Detection-protocol Monte Carlo and exponent extraction."""

import math

import numpy as np
import pytest

from qillum.qfi import qfi_bounds, qfi_gaussian_closed
from qillum.sim import (ErrorReport, ProtocolConfig, UnresolvedStatisticsError,
                        classical_error_closed, exponent_fit, gain_summary,
                        gaussian_rate_fit, prepare_distributions, run_protocol,
                        sample_means, wilson_interval, xi_sweep)


@pytest.fixture(scope="module")
def coherent_setup():
    cfg = ProtocolConfig(family="coherent", n_signal=0.5, n_bath=1.0, eta=0.1,
                         xi=0.5, trials=20000, seed=5, m_copies=300)
    return cfg, prepare_distributions(cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(xi=0.0)
    with pytest.raises(ValueError):
        ProtocolConfig(trials=0)
    with pytest.raises(ValueError):
        ProtocolConfig(prior_absent=0.7, prior_present=0.7)
    with pytest.raises(ValueError):
        ProtocolConfig(eta=-0.1)


def test_config_json_roundtrip():
    cfg = ProtocolConfig(family="cat:2", n_signal=0.3, seed=99)
    clone = ProtocolConfig.from_json_dict(cfg.to_json_dict())
    assert clone == cfg


def test_wilson_interval_basics():
    lo, hi = wilson_interval(5, 100)
    assert 0.0 <= lo <= 0.05 <= hi <= 1.0
    lo0, hi0 = wilson_interval(0, 100)
    assert lo0 < 1e-12 and hi0 > 0.0
    with pytest.raises(ValueError):
        wilson_interval(1, 0)


def test_classical_error_zero_reflectivity():
    p1, p2, _ = classical_error_closed(0.5, 1.0, 0.0, 100, 0.5)
    assert p1 == pytest.approx(0.5)
    assert p2 == pytest.approx(0.5)


def test_classical_error_vanishes_with_copies():
    p1, p2, pr = classical_error_closed(0.5, 1.0, 0.1, 10 ** 7, 0.5)
    assert p1 < 1e-10 and p2 < 1e-10 and pr < 1e-10


def test_classical_optimal_exponent_bright_bath():
    # (sqrt(NB+1) - sqrt(NB))^2 -> 1/(4 NB) for bright baths
    nb = 1e6
    factor = (math.sqrt(nb + 1) - math.sqrt(nb)) ** 2
    assert factor == pytest.approx(1.0 / (4 * nb), rel=1e-6)
    _, _, pr = classical_error_closed(0.5, nb, 0.1, 1000, 0.5)
    assert -math.log(pr) == pytest.approx(1000 * 0.1 ** 2 * 0.5 / (4 * nb), rel=1e-6)


def test_exponent_fit_recovers_synthetic_rate():
    ms = np.array([200, 500, 1000, 2000])
    rate = 1.7e-3
    ps = np.exp(-rate * ms)
    fit, err = exponent_fit(ms, ps)
    assert fit == pytest.approx(rate, rel=1e-12)
    assert err < 1e-12


def test_exponent_fit_guards():
    with pytest.raises(ValueError):
        exponent_fit([100, 200], [0.5, 0.4])
    with pytest.raises(UnresolvedStatisticsError):
        exponent_fit([100, 200, 300], [0.5, 0.1, 0.0])


def test_gaussian_rate_fit_recovers_erfc_form():
    from scipy.special import erfc

    ms = np.array([200, 500, 1000, 2000])
    rate = 8.333e-4
    ps = 0.5 * erfc(np.sqrt(rate * ms))
    fit, _ = gaussian_rate_fit(ms, ps)
    assert fit == pytest.approx(rate, rel=1e-10)


def test_gaussian_rate_fit_guards():
    with pytest.raises(UnresolvedStatisticsError):
        gaussian_rate_fit([100, 200], [0.6, 0.1])


def test_sample_means_deterministic():
    values = np.array([-1.0, 0.0, 2.0])
    probs = np.array([0.25, 0.5, 0.25])
    a = sample_means(values, probs, 7, 5000, seed=42, stream=3)
    b = sample_means(values, probs, 7, 5000, seed=42, stream=3)
    assert np.array_equal(a, b)
    c = sample_means(values, probs, 7, 5000, seed=43, stream=3)
    assert not np.array_equal(a, c)


def test_sample_means_extension_preserves_prefix():
    values = np.array([0.0, 1.0])
    probs = np.array([0.5, 0.5])
    short = sample_means(values, probs, 3, 6000, seed=1, stream=0)
    long = sample_means(values, probs, 3, 12000, seed=1, stream=0)
    assert np.array_equal(short, long[:6000])


def test_sample_means_point_mass():
    out = sample_means(np.array([1.5]), np.array([1.0]), 4, 100, seed=0, stream=0)
    assert np.all(out == 1.5)


def test_sample_means_statistics():
    values = np.array([-1.0, 1.0])
    probs = np.array([0.5, 0.5])
    out = sample_means(values, probs, 1, 200000, seed=9, stream=1)
    assert abs(out.mean()) < 0.01
    assert out.var() == pytest.approx(1.0, rel=0.02)


def test_run_protocol_deterministic(coherent_setup):
    cfg, dists = coherent_setup
    a = run_protocol(cfg, dists)
    b = run_protocol(cfg, dists)
    assert a == b


def test_run_protocol_report_contents(coherent_setup):
    cfg, dists = coherent_setup
    rep = run_protocol(cfg, dists)
    assert 0.0 <= rep.p_type1 <= 1.0
    assert rep.p_type1_ci[0] <= rep.p_type1 <= rep.p_type1_ci[1]
    assert rep.p_type2_ci[0] <= rep.p_type2 <= rep.p_type2_ci[1]
    assert rep.pr_err == pytest.approx(0.5 * rep.p_type1 + 0.5 * rep.p_type2)
    assert rep.rate_type1_pred == pytest.approx(0.05 ** 2 * rep.h / 2)
    assert rep.h == pytest.approx(qfi_bounds(0.5, 1.0)[2], abs=1e-9)
    # Monte Carlo agrees with the closed-form coherent error probability
    assert rep.p_type1 == pytest.approx(rep.p_type1_classical, abs=0.01)
    assert rep.p_type2 == pytest.approx(rep.p_type2_classical, abs=0.01)


def test_run_protocol_adaptive_extension():
    # M large enough that errors are rare at the starting trial count
    cfg = ProtocolConfig(family="coherent", n_signal=0.5, n_bath=1.0, eta=0.3,
                         xi=0.5, trials=400, seed=2, m_copies=2000,
                         trials_cap_factor=64)
    rep = run_protocol(cfg)
    assert rep.trials > 400
    assert min(rep.errors_type1, rep.errors_type2) >= 50 or rep.trials == 400 * 64


def test_estimator_moments_near_cramer_rao():
    cfg = ProtocolConfig(family="tmsv", n_signal=0.5, n_bath=1.0, eta=0.05,
                         xi=0.5, trials=50000, seed=3, m_copies=400)
    dists = prepare_distributions(cfg)
    means = sample_means(dists.dist_present.values,
                         dists.dist_present.probabilities,
                         cfg.m_copies, cfg.trials, cfg.seed, stream=1)
    se = math.sqrt(means.var() / cfg.trials)
    assert abs(means.mean() - cfg.eta) < 4 * se + 0.02 * cfg.eta
    assert means.var() == pytest.approx(1.0 / (cfg.m_copies * dists.h), rel=0.05)


def test_xi_sweep_monotone(coherent_setup):
    cfg, dists = coherent_setup
    reports = xi_sweep(cfg, [0.2, 0.4, 0.6, 0.8], dists)
    p1 = [r.p_type1 for r in reports]
    p2 = [r.p_type2 for r in reports]
    assert all(a >= b for a, b in zip(p1, p1[1:]))
    assert all(a <= b for a, b in zip(p2, p2[1:]))


def test_xi_branch_rate_scaling(coherent_setup):
    cfg, dists = coherent_setup
    from dataclasses import replace

    rep = run_protocol(replace(cfg, xi=0.3, trials=100000, m_copies=500), dists)
    ratio = rep.rate_type1 / rep.rate_type2
    assert ratio == pytest.approx(0.3 ** 2 / 0.7 ** 2, rel=0.10)


def test_quantum_exponent_beats_classical():
    common = dict(n_signal=0.5, n_bath=1.0, eta=0.1, xi=0.5,
                  trials=50000, seed=13, m_copies=1000)
    rep_q = run_protocol(ProtocolConfig(family="tmsv", **common))
    rep_c = run_protocol(ProtocolConfig(family="coherent", **common))
    assert rep_q.h > rep_c.h
    assert rep_q.rate_type1 > rep_c.rate_type1
    assert rep_q.rate_type2 > rep_c.rate_type2


def test_gain_summary_identity_and_prediction():
    db, err = gain_summary(1.0e-3, 1e-5, 1.0e-3, 1e-5)
    assert db == pytest.approx(0.0, abs=1e-12)
    assert err > 0
    # tmsv over coherent at NS=0.05, NB=2 predicts about 2.08 dB
    ratio = qfi_gaussian_closed(0.05, 2.0) / qfi_bounds(0.05, 2.0)[2]
    assert 10 * math.log10(ratio) == pytest.approx(2.08, abs=0.01)
    with pytest.raises(ValueError):
        gain_summary(0.0, 0.0, 1.0, 0.1)


def test_error_report_csv_row(coherent_setup):
    cfg, dists = coherent_setup
    rep = run_protocol(cfg, dists)
    row = rep.to_csv_row()
    assert len(row.split(",")) == len(ErrorReport.CSV_HEADER.split(","))
    payload = rep.to_json_dict()
    assert payload["p_type1"] == rep.p_type1
