"""Estimator behavior: exact recovery, calibration, and edge cases."""

import math

import numpy as np
import pytest

from spikelab.estimators import (
    BruteForceConfig,
    PowerMethodConfig,
    brute_force_cca,
    brute_force_ngca,
    cca_matricization_estimator,
    default_power_iters,
    gaussian_reference_constant,
    matricization_rank1,
    mr_matricization_estimator,
    net_discrepancy,
    ngca_spectral,
    partial_trace_spectral,
    power_iteration,
    rank1_svd,
    sphere_net,
    tensor_power_method,
)
from spikelab.measures import build_mog_measure
from spikelab.models import (
    ModelSpec,
    SampleBatch,
    sample_atpca,
    sample_cca,
    sample_ngca,
    sample_tpca,
)
from spikelab.tensors import rank1_densify


def noiseless_batch(spec, n=1):
    entries = rank1_densify(spec.spike).entries
    return SampleBatch(spec=spec, data=np.tile(entries, (n, 1)), seed=0)


def negated(batch):
    return SampleBatch(spec=batch.spec, data=-batch.data, seed=batch.seed)


# ---------------------------------------------------------------------------
# low-level iterations


def test_power_iteration_matches_dense_eigensolver():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((8, 8))
    a = a + a.T + 8.0 * np.eye(8)  # shift so the top eigenvalue dominates
    u, ray, _, converged = power_iteration(
        lambda x: a @ x, 8, PowerMethodConfig(max_iters=500, seed=3)
    )
    w, v = np.linalg.eigh(a)
    assert converged
    assert abs(abs(u @ v[:, -1]) - 1.0) < 1e-8
    assert ray == pytest.approx(w[-1], rel=1e-8)


def test_power_iteration_collapse_raises():
    nilpotent = np.array([[0.0, 1.0], [0.0, 0.0]])
    cfg = PowerMethodConfig(max_iters=10, init=np.array([0.0, 1.0]))
    with pytest.raises(RuntimeError, match="collapsed"):
        power_iteration(lambda x: nilpotent @ x, 2, cfg)


def test_rank1_svd_matches_dense_svd():
    rng = np.random.default_rng(11)
    m = rng.standard_normal((6, 9))
    sigma, u, v, _, converged = rank1_svd(m, PowerMethodConfig(max_iters=500))
    uu, ss, vv = np.linalg.svd(m)
    assert converged
    assert sigma == pytest.approx(ss[0], rel=1e-9)
    assert abs(abs(u @ uu[:, 0]) - 1.0) < 1e-8
    assert abs(abs(v @ vv[0]) - 1.0) < 1e-8


def test_default_iteration_budget():
    assert default_power_iters(6) == math.ceil(10 * math.log(6))
    assert default_power_iters(1) == math.ceil(10 * math.log(2))


# ---------------------------------------------------------------------------
# tensor power method


def test_power_method_noiseless_rank_one_exact():
    spec = ModelSpec.tpca(k=2, d=5, snr=4.0, seed=1)
    report = tensor_power_method(noiseless_batch(spec))
    assert report.overlap >= 1.0 - 1e-12
    assert abs(np.linalg.norm(report.estimate) - 1.0) < 1e-12


def test_power_method_unit_norm_iterates():
    spec = ModelSpec.tpca(k=3, d=4, snr=2.0, seed=2)
    batch = sample_tpca(spec, n=64, seed=5)
    report = tensor_power_method(batch, PowerMethodConfig(max_iters=12))
    for nrm in report.info["iterate_norms"]:
        assert abs(nrm - 1.0) < 1e-12


def test_power_method_perpendicular_start_collapses():
    direction = np.ones(4)
    spec = ModelSpec.tpca(k=2, d=4, snr=3.0, direction=direction)
    perp = np.array([1.0, -1.0, 0.0, 0.0])
    assert float(perp @ direction) == 0.0
    with pytest.raises(RuntimeError, match="collapsed"):
        tensor_power_method(noiseless_batch(spec), PowerMethodConfig(init=perp))


def test_power_method_odd_k_fixed_point_residual():
    spec = ModelSpec.tpca(k=3, d=4, snr=50.0, seed=3)
    batch = noiseless_batch(spec)
    report = tensor_power_method(batch, PowerMethodConfig(max_iters=60))
    u = report.estimate
    entries = batch.data[0].reshape((4, 4, 4))
    w = np.einsum("abc,a,b->c", entries, u, u)
    w /= np.linalg.norm(w)
    assert min(np.linalg.norm(w - u), np.linalg.norm(w + u)) < 1e-8


def test_power_method_k2_is_matrix_power_method():
    spec = ModelSpec.tpca(k=2, d=5, snr=2.0, seed=4)
    batch = sample_tpca(spec, n=200, seed=9)
    cfg = PowerMethodConfig(max_iters=40, seed=12)
    report = tensor_power_method(batch, cfg)
    m = batch.data.mean(axis=0).reshape(5, 5)
    u, _, _, _ = power_iteration(lambda x: m.T @ x, 5, cfg)
    np.testing.assert_allclose(np.abs(report.estimate), np.abs(u), atol=1e-12)


def test_power_method_rejects_other_problems():
    spec = ModelSpec.cca(k=2, d=3, snr=0.3, seed=0)
    batch = sample_cca(spec, n=16, seed=0)
    with pytest.raises(ValueError, match="tpca"):
        tensor_power_method(batch)


# ---------------------------------------------------------------------------
# partial trace


@pytest.mark.parametrize("k,d", [(2, 5), (2, 8), (4, 4), (4, 8)])
def test_partial_trace_noiseless_recovery(k, d):
    spec = ModelSpec.tpca(k=k, d=d, snr=1.5, seed=k + d)
    report = partial_trace_spectral(noiseless_batch(spec))
    assert report.overlap >= 1.0 - 1e-8
    assert abs(np.linalg.norm(report.estimate) - 1.0) < 1e-12


def test_partial_trace_noisy_recovery_k2():
    spec = ModelSpec.tpca(k=2, d=5, snr=3.0, seed=21)
    batch = sample_tpca(spec, n=2000, seed=22)
    report = partial_trace_spectral(batch)
    assert report.overlap >= 0.9


def test_partial_trace_null_overlap_bound():
    # Pure noise: the recovered direction carries no information about
    # any fixed direction, so its overlap stays below 10/d.
    d = 10
    spec = ModelSpec.tpca(k=2, d=d, snr=0.0, seed=30)
    for rep in range(5):
        batch = sample_tpca(spec, n=10_000, seed=100 + rep)
        report = partial_trace_spectral(batch, PowerMethodConfig(seed=rep))
        assert report.overlap <= 10.0 / d


def test_partial_trace_rejects_odd_order():
    spec = ModelSpec.tpca(k=3, d=4, snr=1.0, seed=0)
    batch = sample_tpca(spec, n=8, seed=0)
    with pytest.raises(ValueError, match="even"):
        partial_trace_spectral(batch)


def test_partial_trace_sign_symmetry():
    spec = ModelSpec.tpca(k=4, d=4, snr=1.0, seed=31)
    batch = sample_tpca(spec, n=256, seed=32)
    a = partial_trace_spectral(batch)
    b = partial_trace_spectral(negated(batch))
    assert a.overlap == b.overlap


def test_partial_trace_median_overlap_monotone_in_n():
    spec = ModelSpec.tpca(k=2, d=6, snr=1.0, seed=40)
    medians = []
    for n in (8, 32, 128):
        overlaps = [
            partial_trace_spectral(sample_tpca(spec, n=n, seed=s)).overlap
            for s in range(10)
        ]
        medians.append(float(np.median(overlaps)))
    assert medians[0] <= medians[1] <= medians[2]


# ---------------------------------------------------------------------------
# matricization estimators


def test_mr_noiseless_coordinate_spike_one_hot():
    spec = ModelSpec.atpca(k=4, d=3, snr=2.0, indices=(0, 2, 1, 1))
    report = mr_matricization_estimator(noiseless_batch(spec))
    assert report.overlap >= 1.0 - 1e-8
    mags = np.sort(np.abs(report.estimate))[::-1]
    assert mags[1] / mags[0] <= 1e-6
    assert abs(np.linalg.norm(report.estimate) - 1.0) < 1e-10


def test_mr_noiseless_symmetric_spike():
    spec = ModelSpec.tpca(k=2, d=6, snr=3.0, seed=50)
    report = mr_matricization_estimator(noiseless_batch(spec))
    assert report.overlap >= 1.0 - 1e-8
    assert report.info["sigma"] > 0


def test_mr_sign_symmetry():
    spec = ModelSpec.atpca(k=4, d=4, snr=1.0, seed=51)
    batch = sample_atpca(spec, n=128, seed=52)
    a = mr_matricization_estimator(batch)
    b = mr_matricization_estimator(negated(batch))
    assert a.overlap == b.overlap


def test_matricization_rank1_rejects_bad_input():
    with pytest.raises(ValueError, match="even"):
        matricization_rank1(np.ones(8), 3, 2, PowerMethodConfig())
    with pytest.raises(ValueError, match="zero"):
        matricization_rank1(np.zeros(16), 2, 4, PowerMethodConfig())


def test_cca_matricization_planted_recovery():
    spec = ModelSpec.cca(k=2, d=2, snr=0.5, indices=(0, 1))
    batch = sample_cca(spec, n=20_000, seed=60)
    report = cca_matricization_estimator(batch)
    assert report.overlap >= 0.95
    assert report.info["sigma"] == pytest.approx(0.5, abs=0.06)
    assert report.info["signal_inner"] == pytest.approx(0.5, abs=0.06)


def test_cca_matricization_null_sigma_shrinks_with_n():
    spec = ModelSpec.cca(k=2, d=2, snr=0.0, indices=(0, 0))
    sigmas = {}
    for n in (500, 32_000):
        runs = [
            cca_matricization_estimator(sample_cca(spec, n=n, seed=s)).info["sigma"]
            for s in range(3)
        ]
        sigmas[n] = float(np.median(runs))
    assert sigmas[32_000] < sigmas[500]


def test_cca_matricization_rejects_odd_view_count():
    spec = ModelSpec.cca(k=3, d=2, snr=0.2, seed=0)
    batch = sample_cca(spec, n=64, seed=0)
    with pytest.raises(ValueError, match="even"):
        cca_matricization_estimator(batch)


# ---------------------------------------------------------------------------
# reweighted covariance


def test_reference_constant_closed_forms():
    for d in (1, 2, 5, 20, 100):
        assert gaussian_reference_constant(2, d) == 1.0
        assert gaussian_reference_constant(4, d) == 2.0
        assert gaussian_reference_constant(6, d) == 2.0 * d + 8.0
    with pytest.raises(ValueError, match="even"):
        gaussian_reference_constant(3, 5)


def test_reference_constant_monte_carlo():
    d = 3
    rng = np.random.default_rng(70)
    z = rng.standard_normal((500_000, d))
    stat = ((z * z).sum(axis=1) - d) * z[:, 0] ** 2
    se = stat.std() / math.sqrt(len(stat))
    assert abs(stat.mean() - gaussian_reference_constant(4, d)) < 5 * se


def test_ngca_spectral_planted_sign_and_overlap():
    measure = build_mog_measure(2, 0.5)
    spec = ModelSpec.ngca(d=6, measure=measure, seed=80)
    batch = sample_ngca(spec, n=20_000, seed=81)
    report = ngca_spectral(batch)
    assert report.overlap >= 0.9
    assert report.info["sign"] == -1.0
    assert report.info["eigenvalue"] == pytest.approx(-0.5, abs=0.15)
    assert abs(np.linalg.norm(report.estimate) - 1.0) < 1e-12


def test_ngca_spectral_matrix_expectation():
    # Batch average of the reweighted covariance matches -(snr/d) V V^T
    # entrywise, within five standard errors of the batch spread.
    measure = build_mog_measure(4, 1.0)
    spec = ModelSpec.ngca(d=4, measure=measure, seed=82)
    mats = []
    for s in range(200):
        batch = sample_ngca(spec, n=500, seed=1000 + s)
        mats.append(ngca_spectral(batch).info["matrix"])
    mats = np.array(mats)
    target = -(spec.snr / spec.d) * np.outer(spec.direction, spec.direction)
    se = mats.std(axis=0) / math.sqrt(len(mats))
    assert np.all(np.abs(mats.mean(axis=0) - target) <= 5 * se)


def test_ngca_spectral_null_operator_norm_shrinks():
    measure = build_mog_measure(4, 0.0)
    spec = ModelSpec.ngca(d=10, measure=measure, seed=83)
    norms = {}
    for n in (1000, 100_000):
        batch = sample_ngca(spec, n=n, seed=84)
        m = ngca_spectral(batch).info["matrix"]
        norms[n] = float(np.linalg.norm(m, ord=2))
    assert norms[100_000] < norms[1000]


def test_ngca_spectral_sign_symmetry():
    measure = build_mog_measure(2, 0.4)
    spec = ModelSpec.ngca(d=5, measure=measure, seed=85)
    batch = sample_ngca(spec, n=4000, seed=86)
    a = ngca_spectral(batch)
    b = ngca_spectral(negated(batch))
    assert a.overlap == b.overlap


def test_ngca_spectral_rejects_odd_order():
    spec = ModelSpec(problem="ngca", k=3, d=2, snr=0.5, direction=np.array([1.0, -1.0]))
    batch = SampleBatch(spec=spec, data=np.zeros((4, 2)), seed=0)
    with pytest.raises(ValueError, match="even"):
        ngca_spectral(batch)


# ---------------------------------------------------------------------------
# sphere nets and brute force


def test_sphere_net_small_dimensions():
    net1 = sphere_net(1, 0.5)
    assert net1.shape == (2, 1)
    net2 = sphere_net(2, 0.3)
    gaps = np.linalg.norm(net2 - np.roll(net2, -1, axis=0), axis=1)
    assert gaps.max() <= 0.3 + 1e-12
    np.testing.assert_allclose(np.linalg.norm(net2, axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("d", [3, 4])
def test_sphere_net_randomized_coverage(d):
    net = sphere_net(d, 0.5, seed=1, probes=2000)
    rng = np.random.default_rng(99)
    q = rng.standard_normal((2000, d))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    dist = np.sqrt(np.maximum(2.0 - 2.0 * (q @ net.T).max(axis=1), 0.0))
    # Fresh probes may land slightly past delta; allow a whisker.
    assert dist.max() <= 0.5 * 1.25


def test_sphere_net_budget_guard():
    with pytest.raises(RuntimeError, match="budget"):
        sphere_net(4, 0.05, max_points=100)
    with pytest.raises(ValueError):
        sphere_net(5, 0.5)


def test_net_discrepancy_separates_far_pairs():
    net = sphere_net(2, 0.2)
    u1 = np.array([1.0, 0.0])
    u2 = np.array([0.0, 1.0])
    assert net_discrepancy(u1, u2, net, 3) > 0.9
    assert net_discrepancy(u1, u1, net, 3) == 0.0


def test_brute_force_ngca_planted_recovery_even_k():
    measure = build_mog_measure(2, 0.45)
    spec = ModelSpec.ngca(d=2, measure=measure, seed=90)
    batch = sample_ngca(spec, n=20_000, seed=91)
    cfg = BruteForceConfig(delta=0.2, trunc=8.0)
    report = brute_force_ngca(batch, cfg)
    assert report.overlap >= 0.95
    assert report.info["sign"] == -1.0
    assert report.info["objective"] < 0.1


def test_brute_force_ngca_skewed_odd_k():
    # Planted eta in {-1/2, 2} with mean 0 and variance 1 has third
    # moment 3/2; the net search must find the planted direction with a
    # positive sign.
    rng = np.random.default_rng(92)
    d, n = 2, 50_000
    direction = np.array([1.0, -1.0])
    u = direction / math.sqrt(d)
    eta = np.where(rng.random(n) < 0.8, -0.5, 2.0)
    z = rng.standard_normal((n, d))
    data = np.outer(eta, u) + z - np.outer(z @ u, u)
    spec = ModelSpec(problem="ngca", k=3, d=d, snr=1.5, direction=direction)
    batch = SampleBatch(spec=spec, data=data, seed=92)
    report = brute_force_ngca(batch, BruteForceConfig(delta=0.2, trunc=8.0))
    assert report.overlap >= 0.95
    # (u, +) and (-u, -) describe the same planted moment for odd k, so
    # only the signed moment direction is identifiable.
    assert report.info["sign"] * float(report.estimate @ u) ** 3 > 0


def test_brute_force_ngca_deterministic_tie_break():
    measure = build_mog_measure(2, 0.0)
    spec = ModelSpec.ngca(d=2, measure=measure, seed=93)
    batch = sample_ngca(spec, n=100, seed=94)
    cfg = BruteForceConfig(delta=0.3, trunc=5.0)
    a = brute_force_ngca(batch, cfg)
    b = brute_force_ngca(batch, cfg)
    assert a.info["net_index"] == b.info["net_index"]
    assert a.info["sign"] == b.info["sign"]
    np.testing.assert_array_equal(a.estimate, b.estimate)


def test_brute_force_ngca_dimension_guard():
    measure = build_mog_measure(2, 0.1)
    spec = ModelSpec.ngca(d=5, measure=measure, seed=0)
    batch = sample_ngca(spec, n=10, seed=0)
    with pytest.raises(ValueError, match="d <= 4"):
        brute_force_ngca(batch, BruteForceConfig(delta=0.5, trunc=5.0))


def test_brute_force_cca_planted_recovery():
    spec = ModelSpec.cca(k=2, d=2, snr=0.4, indices=(0, 1))
    batch = sample_cca(spec, n=50_000, seed=95)
    report = brute_force_cca(batch, BruteForceConfig(delta=0.3, trunc=10.0))
    assert report.overlap >= 0.9
    assert report.info["objective"] < 0.1
    assert abs(np.linalg.norm(report.estimate) - 1.0) < 1e-10


def test_brute_force_cca_null_tie_breaks_to_first_tuple():
    spec = ModelSpec.cca(k=2, d=2, snr=0.0, indices=(0, 0))
    batch = sample_cca(spec, n=200, seed=96)
    report = brute_force_cca(batch, BruteForceConfig(delta=0.4, trunc=5.0))
    # snr = 0 makes every candidate tuple score identically, so the
    # lowest-index tie break must pick the first tuple.
    assert report.info["net_indices"] == (0, 0)


def test_brute_force_cca_guards():
    spec = ModelSpec.cca(k=2, d=4, snr=0.1, seed=0)
    batch = sample_cca(spec, n=8, seed=0)
    with pytest.raises(ValueError, match="capped"):
        brute_force_cca(batch, BruteForceConfig(delta=0.5, trunc=5.0))


def test_brute_force_config_validation():
    with pytest.raises(ValueError, match="delta"):
        BruteForceConfig(delta=0.0, trunc=1.0)
    with pytest.raises(ValueError, match="truncation"):
        BruteForceConfig(delta=0.5, trunc=0.0)
    with pytest.raises(ValueError, match="max_iters"):
        PowerMethodConfig(max_iters=0)
