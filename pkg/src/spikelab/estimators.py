"""Estimators for the planted models, spectral and brute-force.

Every estimator is a pure function ``(batch, config) -> EstimateReport``.
Direction-valued estimators (power method, partial trace, reweighted
covariance, sphere-net search) score against the planted direction;
tensor-valued ones (matricization SVD, net products) score against the
planted rank-one tensor.  Eigenvector and singular-vector extraction is
in-house power iteration throughout, with ``T = ceil(10 log d)`` steps
and a Rayleigh-quotient stabilization check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from spikelab.models import SampleBatch
from spikelab.tensors import (
    check_entry_budget,
    contract_batch,
    entry_budget,
    outer_power,
    overlap,
)

__all__ = [
    "BruteForceConfig",
    "EstimateReport",
    "PowerMethodConfig",
    "brute_force_cca",
    "brute_force_ngca",
    "cca_matricization_estimator",
    "default_power_iters",
    "gaussian_reference_constant",
    "matricization_rank1",
    "mr_matricization_estimator",
    "net_discrepancy",
    "ngca_spectral",
    "partial_trace_spectral",
    "power_iteration",
    "rank1_svd",
    "sphere_net",
    "tensor_power_method",
]


@dataclass
class EstimateReport:
    """Outcome of one estimator run."""

    estimate: np.ndarray
    overlap: float | None
    iterations: int
    converged: bool
    wall_ms: float
    info: dict = field(default_factory=dict)
    resources: object = None


@dataclass(frozen=True)
class PowerMethodConfig:
    """Knobs for the iterative extractors.

    ``max_iters`` defaults to ``ceil(10 log d)`` for the operand at
    hand; ``init`` overrides the seeded random start (useful for the
    invariant-subspace edge cases).
    """

    max_iters: int | None = None
    tol: float = 1e-10
    seed: int = 0
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")


def default_power_iters(d: int) -> int:
    return max(1, math.ceil(10.0 * math.log(max(d, 2))))


def _start_vector(cfg: PowerMethodConfig, dim: int) -> np.ndarray:
    if cfg.init is not None:
        u = np.asarray(cfg.init, dtype=np.float64).reshape(-1)
        if u.shape != (dim,):
            raise ValueError(f"init has shape {u.shape}, expected ({dim},)")
    else:
        u = np.random.default_rng(cfg.seed).standard_normal(dim)
    nrm = float(np.linalg.norm(u))
    if nrm == 0.0 or not math.isfinite(nrm):
        raise ValueError("initial vector must be nonzero and finite")
    return u / nrm


def _renormalize(w: np.ndarray) -> tuple[np.ndarray, float]:
    nrm = float(np.linalg.norm(w))
    if nrm == 0.0 or not math.isfinite(nrm):
        raise RuntimeError("power iterate collapsed to numerical zero")
    return w / nrm, nrm


def power_iteration(matvec, dim: int, cfg: PowerMethodConfig):
    """Dominant-eigenpair iteration ``u <- A u / ||A u||``.

    Returns ``(u, rayleigh, iterations, converged)``.  Convergence means
    the Rayleigh quotient moved by at most ``tol`` (relative) between
    consecutive steps; the iteration cap is ``ceil(10 log d)`` unless
    overridden.
    """
    u = _start_vector(cfg, dim)
    limit = cfg.max_iters if cfg.max_iters is not None else default_power_iters(dim)
    ray = math.nan
    converged = False
    steps = 0
    for steps in range(1, limit + 1):
        w = matvec(u)
        ray_new = float(u @ w)
        u, _ = _renormalize(w)
        if steps > 1 and abs(ray_new - ray) <= cfg.tol * max(1.0, abs(ray_new)):
            ray = ray_new
            converged = True
            break
        ray = ray_new
    return u, ray, steps, converged


def rank1_svd(mat: np.ndarray, cfg: PowerMethodConfig):
    """Leading singular triple by alternating power iteration.

    Power iteration on ``M M^T`` realized as alternating mat-vecs, so
    only matrix-vector products with ``M`` and ``M^T`` are used.
    Returns ``(sigma, u_left, v_right, iterations, converged)``.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("need a matrix")
    u = _start_vector(cfg, mat.shape[0])
    limit = (
        cfg.max_iters
        if cfg.max_iters is not None
        else default_power_iters(max(mat.shape))
    )
    sigma = math.nan
    converged = False
    steps = 0
    v = None
    for steps in range(1, limit + 1):
        v, _ = _renormalize(mat.T @ u)
        u, sigma_new = _renormalize(mat @ v)
        if steps > 1 and abs(sigma_new - sigma) <= cfg.tol * max(1.0, abs(sigma_new)):
            sigma = sigma_new
            converged = True
            break
        sigma = sigma_new
    return sigma, u, v, steps, converged


def _report(t0, estimate, truth, iterations, converged, info) -> EstimateReport:
    ov = None if truth is None else overlap(truth, estimate)
    return EstimateReport(
        estimate=estimate,
        overlap=ov,
        iterations=iterations,
        converged=converged,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        info=info,
    )


def _tensor_truth(spec) -> np.ndarray | None:
    """Planted rank-one pattern, unscaled so snr = 0 still scores."""
    if spec.spike is None:
        return None
    flat = np.asarray(spec.spike.factors[0], dtype=np.float64)
    for f in spec.spike.factors[1:]:
        flat = np.multiply.outer(flat, f)
    return flat.reshape(-1)


# ---------------------------------------------------------------------------
# iterative tensor estimators


def tensor_power_method(
    batch: SampleBatch, cfg: PowerMethodConfig = PowerMethodConfig()
) -> EstimateReport:
    """u <- mean_i X_i { (u/||u||)^{(x)(k-1)}, . }, normalized each step."""
    spec = batch.spec
    if spec.problem != "tpca":
        raise ValueError(f"expected a tpca batch, got {spec.problem!r}")
    if spec.k < 2:
        raise ValueError("power method needs order k >= 2")
    t0 = time.perf_counter()
    d = spec.d
    u = _start_vector(cfg, d)
    limit = cfg.max_iters if cfg.max_iters is not None else default_power_iters(d)
    ray = math.nan
    converged = False
    steps = 0
    norms = []
    for steps in range(1, limit + 1):
        psi = outer_power(u, spec.k - 1)
        w = contract_batch(batch.data, d, psi).mean(axis=0)
        ray_new = float(u @ w)
        u, _ = _renormalize(w)
        norms.append(float(np.linalg.norm(u)))
        if steps > 1 and abs(ray_new - ray) <= cfg.tol * max(1.0, abs(ray_new)):
            ray = ray_new
            converged = True
            break
        ray = ray_new
    info = {"rayleigh": ray, "iterate_norms": norms}
    return _report(t0, u, spec.direction, steps, converged, info)


def partial_trace_spectral(
    batch: SampleBatch, cfg: PowerMethodConfig = PowerMethodConfig()
) -> EstimateReport:
    """Top eigenvector of the pair-contracted sample mean.

    ``M[a, b] = mean_i sum_g (X_i)[g_1, g_1, .., g_l, g_l, a, b]`` with
    ``l = k/2 - 1``; for k = 2 this is just the sample-mean matrix.  The
    power iteration runs on ``v -> M^T v``, matching the orientation of
    the contraction template used by the memory-bounded wrapper, so both
    execution paths walk the same sequence of iterates.
    """
    spec = batch.spec
    if spec.problem != "tpca":
        raise ValueError(f"expected a tpca batch, got {spec.problem!r}")
    if spec.k % 2 != 0:
        raise ValueError(f"partial trace needs even k, got {spec.k}")
    t0 = time.perf_counter()
    d = spec.d
    m = batch.data.mean(axis=0).reshape((d,) * spec.k)
    for _ in range(spec.k // 2 - 1):
        m = np.trace(m, axis1=0, axis2=1)
    u, ray, steps, converged = power_iteration(lambda x: m.T @ x, d, cfg)
    info = {"rayleigh": ray, "matrix": m}
    return _report(t0, u, spec.direction, steps, converged, info)


def matricization_rank1(entries: np.ndarray, k: int, d: int, cfg: PowerMethodConfig):
    """Rank-1 SVD of the square matricization of a flat order-k tensor.

    Returns ``(sigma, flat_rank1, iterations, converged)`` where
    ``flat_rank1`` is the unit-Frobenius outer product of the singular
    pair, reshaped back to flat tensor entries.
    """
    if k % 2 != 0:
        raise ValueError(f"matricization needs even k, got {k}")
    entries = np.asarray(entries, dtype=np.float64).reshape(-1)
    if entries.size != d**k:
        raise ValueError(f"expected {d ** k} entries, got {entries.size}")
    if not np.any(entries):
        raise ValueError("zero average tensor has no rank-1 direction")
    half = d ** (k // 2)
    sigma, left, right, steps, converged = rank1_svd(
        entries.reshape(half, half), cfg
    )
    return sigma, np.outer(left, right).reshape(-1), steps, converged


def mr_matricization_estimator(
    batch: SampleBatch, cfg: PowerMethodConfig = PowerMethodConfig()
) -> EstimateReport:
    """Rank-1 approximation of the matricized sample mean."""
    spec = batch.spec
    if spec.problem not in ("tpca", "atpca"):
        raise ValueError(f"expected a spiked-tensor batch, got {spec.problem!r}")
    t0 = time.perf_counter()
    xbar = batch.data.mean(axis=0)
    sigma, flat, steps, converged = matricization_rank1(xbar, spec.k, spec.d, cfg)
    info = {"sigma": sigma}
    truth = _tensor_truth(spec)
    report = _report(t0, flat, truth, steps, converged, info)
    if truth is not None:
        report.info["signal_inner"] = abs(
            float(flat @ truth) / float(np.linalg.norm(truth))
        ) * sigma
    return report


def cca_matricization_estimator(
    batch: SampleBatch, cfg: PowerMethodConfig = PowerMethodConfig()
) -> EstimateReport:
    """Rank-1 SVD of the matricized empirical cross-moment tensor.

    ``T_hat = mean_i x^(1) x .. x x^(k)`` accumulated blockwise; the
    estimate keeps the singular-value scale, so its magnitude doubles as
    a detection statistic (``info["sigma"]``).
    """
    spec = batch.spec
    if spec.problem != "cca":
        raise ValueError(f"expected a cca batch, got {spec.problem!r}")
    if spec.k % 2 != 0:
        raise ValueError(f"matricization needs an even view count, got {spec.k}")
    t0 = time.perf_counter()
    d, k = spec.d, spec.k
    check_entry_budget(d**k, "cross-moment tensor")
    views = batch.views()
    block = max(1, min(4096, entry_budget() // max(d**k, 1) // 4))
    acc = np.zeros(d**k)
    for start in range(0, batch.n, block):
        part = views[start : start + block]
        prod = part[:, 0, :]
        for l in range(1, k):
            prod = (prod[:, :, None] * part[:, l, :][:, None, :]).reshape(
                len(part), -1
            )
        acc += prod.sum(axis=0)
    tbar = acc / batch.n
    sigma, flat, steps, converged = matricization_rank1(tbar, k, d, cfg)
    truth = _tensor_truth(spec)
    report = _report(t0, sigma * flat, truth, steps, converged, {"sigma": sigma})
    if truth is not None:
        report.info["signal_inner"] = abs(
            float(sigma * (flat @ truth)) / float(np.linalg.norm(truth))
        )
    return report


# ---------------------------------------------------------------------------
# reweighted covariance


def gaussian_reference_constant(k: int, d: int) -> float:
    """``E[(||z||^2 - d)^{(k-2)/2} z_1^2]`` for ``z ~ N(0, I_d)``, exactly.

    Split ``||z||^2 - d = (z_1^2 - 1) + (R - (d - 1))`` with ``R`` an
    independent chi-square with d - 1 degrees of freedom and expand
    binomially; every factor moment is an integer, so the whole value is
    computed in exact integer arithmetic.
    """
    if k % 2 != 0 or k < 2:
        raise ValueError(f"need even k >= 2, got {k}")
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    m = (k - 2) // 2

    def even_moment(i):  # E[z^{2i}] = (2i - 1)!!
        return math.prod(range(1, 2 * i, 2)) if i > 0 else 1

    def centered_z2_moment(j):  # E[(z^2 - 1)^j z^2]
        return sum(
            math.comb(j, i) * (-1) ** (j - i) * even_moment(i + 1) for i in range(j + 1)
        )

    def chi_raw(q):  # E[R^q], R ~ chi^2_{d-1}
        return math.prod(d - 1 + 2 * i for i in range(q))

    def centered_chi_moment(p):  # E[(R - (d - 1))^p]
        return sum(
            math.comb(p, q) * (-1) ** (p - q) * (d - 1) ** (p - q) * chi_raw(q)
            for q in range(p + 1)
        )

    total = sum(
        math.comb(m, j) * centered_z2_moment(j) * centered_chi_moment(m - j)
        for j in range(m + 1)
    )
    return float(total)


def ngca_spectral(
    batch: SampleBatch, cfg: PowerMethodConfig = PowerMethodConfig()
) -> EstimateReport:
    """Eigenvector of largest |eigenvalue| of the reweighted covariance.

    ``M = mean_i (||x_i||^2 - d)^{(k-2)/2} x_i x_i^T - c_{k,d} I`` with
    the reference constant removing the Gaussian baseline.  The planted
    direction shows up with eigenvalue of either sign depending on the
    measure, so the power iteration runs on ``M^2`` and the sign is read
    off the Rayleigh quotient afterwards.
    """
    spec = batch.spec
    if spec.problem != "ngca":
        raise ValueError(f"expected an ngca batch, got {spec.problem!r}")
    if spec.k % 2 != 0:
        raise ValueError(f"reweighted covariance needs even k, got {spec.k}")
    t0 = time.perf_counter()
    d = spec.d
    x = batch.data
    m_exp = (spec.k - 2) // 2
    w = ((x * x).sum(axis=1) - d) ** m_exp
    mat = (x.T * w) @ x / batch.n
    mat[np.diag_indices(d)] -= gaussian_reference_constant(spec.k, d)
    u, _, steps, converged = power_iteration(lambda t: mat @ (mat @ t), d, cfg)
    eigenvalue = float(u @ (mat @ u))
    info = {
        "eigenvalue": eigenvalue,
        "sign": 1.0 if eigenvalue >= 0 else -1.0,
        "matrix": mat,
    }
    return _report(t0, u, spec.direction, steps, converged, info)


# ---------------------------------------------------------------------------
# sphere nets and brute force


@dataclass(frozen=True)
class BruteForceConfig:
    """Net resolution and truncation level for the exhaustive searches."""

    delta: float
    trunc: float
    seed: int = 0
    probes: int = 10_000
    max_net: int = 200_000

    def __post_init__(self):
        if not 0.0 < self.delta <= 2.0:
            raise ValueError(f"delta must be in (0, 2], got {self.delta}")
        if not self.trunc > 0:
            raise ValueError(f"truncation level must be positive, got {self.trunc}")


def sphere_net(
    d: int,
    delta: float,
    seed: int = 0,
    probes: int = 10_000,
    max_points: int = 200_000,
) -> np.ndarray:
    """A delta-net of the unit sphere in R^d, d <= 4.

    d = 1 is the two-point sphere and d = 2 a uniform angular grid with
    chord spacing below delta.  For d in {3, 4} the net is random with
    verified coverage: resample at doubled size until none of ``probes``
    fresh random sphere points sits farther than delta from the net.
    """
    if not 1 <= d <= 4:
        raise ValueError(f"net construction supports d <= 4, got {d}")
    if not 0.0 < delta <= 2.0:
        raise ValueError(f"delta must be in (0, 2], got {delta}")
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        step = 2.0 * math.asin(min(delta, 2.0) / 2.0)
        count = max(4, math.ceil(2.0 * math.pi / step))
        angles = 2.0 * math.pi * np.arange(count) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    rng = np.random.default_rng(seed)
    count = math.ceil(40.0 * (3.0 / delta) ** (d - 1))
    while True:
        if count > max_points:
            raise RuntimeError(
                f"net for d={d}, delta={delta} exceeds the {max_points}-point budget"
            )
        net = rng.standard_normal((count, d))
        net /= np.linalg.norm(net, axis=1, keepdims=True)
        worst = 0.0
        for start in range(0, probes, 2048):
            q = rng.standard_normal((min(2048, probes - start), d))
            q /= np.linalg.norm(q, axis=1, keepdims=True)
            best_dot = (q @ net.T).max(axis=1)
            worst = max(worst, float(np.sqrt(np.maximum(2.0 - 2.0 * best_dot, 0.0)).max()))
        if worst <= delta:
            return net
        count *= 2


def net_discrepancy(u1: np.ndarray, u2: np.ndarray, net: np.ndarray, k: int) -> float:
    """``max_w |<u1, w>^k - <u2, w>^k|`` over the net directions."""
    return float(np.abs((net @ u1) ** k - (net @ u2) ** k).max())


def brute_force_ngca(batch: SampleBatch, cfg: BruteForceConfig) -> EstimateReport:
    """Exhaustive sphere-net minimizer of the clipped k-th moment profile.

    For each candidate ``(u, sign)`` the objective is the worst-case
    discrepancy over the net between the empirical clipped moment curve
    ``mean_i trunc_h(<x_i, w>)^k - E[Z^k]`` and the planted prediction
    ``sign * snr * <u, w>^k``.  Ties break toward the lowest net index,
    with the + sign preferred at equal index.
    """
    spec = batch.spec
    if spec.problem != "ngca":
        raise ValueError(f"expected an ngca batch, got {spec.problem!r}")
    if spec.d > 4:
        raise ValueError(f"net search is capped at d <= 4, got d={spec.d}")
    t0 = time.perf_counter()
    net = sphere_net(spec.d, cfg.delta, cfg.seed, cfg.probes, cfg.max_net)
    m = len(net)
    k = spec.k
    gauss_k = float(math.prod(range(1, k, 2))) if k % 2 == 0 else 0.0
    gvec = np.empty(m)
    for start in range(0, m, 2048):
        g = batch.data @ net[start : start + 2048].T
        np.clip(g, -cfg.trunc, cfg.trunc, out=g)
        gvec[start : start + 2048] = (g**k).mean(axis=0)
    gvec -= gauss_k

    best_score = math.inf
    best_index = 0
    best_sign = 1.0
    for start in range(0, m, 1024):
        block = net[start : start + 1024]
        planted = spec.snr * (block @ net.T) ** k
        score_plus = np.abs(gvec[None, :] - planted).max(axis=1)
        score_minus = np.abs(gvec[None, :] + planted).max(axis=1)
        use_minus = score_minus < score_plus
        scores = np.where(use_minus, score_minus, score_plus)
        local = int(np.argmin(scores))
        if scores[local] < best_score:
            best_score = float(scores[local])
            best_index = start + local
            best_sign = -1.0 if use_minus[local] else 1.0
    info = {
        "objective": best_score,
        "sign": best_sign,
        "net_size": m,
        "net_index": best_index,
    }
    return _report(t0, net[best_index].copy(), spec.direction, m, True, info)


def brute_force_cca(batch: SampleBatch, cfg: BruteForceConfig) -> EstimateReport:
    """Exhaustive net-product minimizer for the correlated-views model.

    Candidates and adversaries both range over the k-fold product of one
    sphere net; the objective compares the clipped empirical product
    moment against ``snr * prod_l <u_l, w_l>``.  Guarded to d <= 3 and
    k <= 3, where the product search is still enumerable.
    """
    spec = batch.spec
    if spec.problem != "cca":
        raise ValueError(f"expected a cca batch, got {spec.problem!r}")
    if spec.d > 3 or spec.k > 3:
        raise ValueError("net-product search is capped at d <= 3, k <= 3")
    t0 = time.perf_counter()
    net = sphere_net(spec.d, cfg.delta, cfg.seed, cfg.probes, cfg.max_net)
    m = len(net)
    k = spec.k
    if m**k > 1_000_000:
        raise RuntimeError(f"net product of size {m}^{k} exceeds the budget")
    views = batch.views()
    proj = [views[:, l, :] @ net.T for l in range(k)]  # each (n, m)

    # Empirical clipped product moments over all adversary tuples.
    ghat = np.empty((m,) * k)
    if k == 2:
        for a in range(m):
            prod = proj[0][:, a][:, None] * proj[1]
            np.clip(prod, -cfg.trunc, cfg.trunc, out=prod)
            ghat[a] = prod.mean(axis=0)
    else:
        for a in range(m):
            pa = proj[0][:, a]
            for b in range(m):
                prod = (pa * proj[1][:, b])[:, None] * proj[2]
                np.clip(prod, -cfg.trunc, cfg.trunc, out=prod)
                ghat[a, b] = prod.mean(axis=0)

    gram = net @ net.T
    best_score = math.inf
    best_tuple = (0,) * k
    if k == 2:
        for a in range(m):
            model = spec.snr * np.einsum("w,cv->cwv", gram[a], gram)
            scores = np.abs(ghat[None, :, :] - model).reshape(m, -1).max(axis=1)
            local = int(np.argmin(scores))
            if scores[local] < best_score:
                best_score = float(scores[local])
                best_tuple = (a, local)
    else:
        for a in range(m):
            for b in range(m):
                model = spec.snr * np.einsum(
                    "w,x,cy->cwxy", gram[a], gram[b], gram
                )
                scores = np.abs(ghat[None, :, :, :] - model).reshape(m, -1).max(axis=1)
                local = int(np.argmin(scores))
                if scores[local] < best_score:
                    best_score = float(scores[local])
                    best_tuple = (a, b, local)

    factors = [net[i] for i in best_tuple]
    flat = factors[0]
    for f in factors[1:]:
        flat = np.multiply.outer(flat, f)
    flat = flat.reshape(-1)
    truth = _tensor_truth(spec)
    info = {
        "objective": best_score,
        "net_size": m,
        "net_indices": best_tuple,
    }
    return _report(t0, flat, truth, m**k, True, info)
