"""Exact small-instance oracles for hypercube moments, integrated
Hermite norms, and low-degree likelihood-ratio norms.

Everything here is ground truth: enumeration over {+-1}^d (organized by
exchangeability classes or Walsh-Hadamard transforms, never sampled) and
exact rational arithmetic where the quantity is rational.  Monte Carlo
appears only in the one explicitly statistical report at the bottom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

import numpy as np

from spikelab.hermite import HermiteBasis
from spikelab.models import cca_critical_snr

__all__ = [
    "LDLRInstance",
    "check_rademacher_bounds",
    "integrated_hermite_inner",
    "integrated_hermite_norm",
    "ldlr_norm_exact",
    "ldlr_sandwich",
    "load_calibration",
    "rademacher_mean_moment",
    "sign_coefficient",
    "sign_tail_mass",
    "tpca_llr_hermite_check",
]

MAX_ENUM_DIM = 20
MAX_PAIR_ENUM_DIM = 12


def rademacher_mean_moment(d: int, t: int, marked=()) -> Fraction:
    """``E[Vbar^t * prod_{i in marked} V_i]`` for V uniform on {+-1}^d.

    Exact rational value.  The enumeration over the hypercube is
    collapsed to exchangeability classes (number of +1 signs among the
    marked coordinates and among the rest), which keeps the arithmetic
    in small Python integers.
    """
    if not 1 <= d <= MAX_ENUM_DIM:
        raise ValueError(f"enumeration supports 1 <= d <= {MAX_ENUM_DIM}, got {d}")
    if t < 0:
        raise ValueError(f"moment order must be >= 0, got {t}")
    marked = tuple(sorted(set(int(i) for i in marked)))
    if marked and not (0 <= marked[0] and marked[-1] < d):
        raise ValueError(f"marked coordinates {marked} out of range for d = {d}")
    ell = len(marked)
    total = 0
    for a in range(ell + 1):
        for b in range(d - ell + 1):
            signed_sum = 2 * (a + b) - d
            total += (
                math.comb(ell, a)
                * math.comb(d - ell, b)
                * signed_sum**t
                * (-1) ** (ell - a)
            )
    return Fraction(total, 2**d * d**t)


def check_rademacher_bounds(d: int, t_max: int) -> list[dict]:
    """Verify every enumerated moment against the analytic envelopes.

    For each (t, number of marked coordinates): odd-parity moments must
    vanish exactly; all moments obey ``4^t t^{t/2} d^{-ceil(t/2)}``;
    moments with at least one marked coordinate additionally obey
    ``2 * 5^t t^{t/2} d^{-ceil((t+1)/2)}``; the largest marked moment
    at each t reaches ``5^-t t^{t/2} d^{-ceil(t/2)} / 2``; even plain
    moments meet the ``((2/e^2) * (t/2) / d)^{t/2}`` lower bound.
    Raises on any violation, which would indicate an oracle or
    transcription bug.
    """
    if not 3 <= d <= MAX_ENUM_DIM:
        raise ValueError(f"need 3 <= d <= {MAX_ENUM_DIM}, got {d}")
    if not 1 <= t_max <= 2 * (d - 1):
        raise ValueError(f"need 1 <= t_max <= 2(d - 1), got {t_max}")
    report = []
    for t in range(1, t_max + 1):
        upper_all = 4.0**t * t ** (t / 2.0) * d ** (-math.ceil(t / 2.0))
        upper_marked = (
            2.0 * 5.0**t * t ** (t / 2.0) * d ** (-math.ceil((t + 1) / 2.0))
        )
        marked_sup = 0.0
        for ell in range(0, min(t, d) + 1):
            value = rademacher_mean_moment(d, t, tuple(range(ell)))
            entry = {"t": t, "ell": ell, "value": float(value)}
            if (t + ell) % 2 == 1:
                entry["kind"] = "parity-zero"
                entry["ok"] = value == 0
            elif ell == 0:
                entry["kind"] = "plain-upper"
                entry["bound"] = upper_all
                entry["ok"] = abs(float(value)) <= upper_all
            else:
                entry["kind"] = "marked-upper"
                entry["bound"] = min(upper_all, upper_marked)
                entry["ok"] = abs(float(value)) <= entry["bound"]
                marked_sup = max(marked_sup, abs(float(value)))
            report.append(entry)
        # Moments with more marked coordinates than the order factor an
        # unmatched single sign, hence vanish; the sup needs no ell > t.
        lower_marked = 5.0 ** (-t) * t ** (t / 2.0) * d ** (-math.ceil(t / 2.0)) / 2.0
        report.append(
            {
                "t": t,
                "ell": -1,
                "value": marked_sup,
                "kind": "marked-sup-lower",
                "bound": lower_marked,
                "ok": marked_sup >= lower_marked,
            }
        )
        if t % 2 == 0 and t // 2 <= d:
            half = t // 2
            lower = ((2.0 / math.e**2) * half / d) ** half
            value = float(rademacher_mean_moment(d, t))
            report.append(
                {
                    "t": t,
                    "ell": 0,
                    "value": value,
                    "kind": "plain-lower",
                    "bound": lower,
                    "ok": value >= lower,
                }
            )
    bad = [e for e in report if not e["ok"]]
    if bad:
        raise RuntimeError(f"moment bound violations: {bad[:3]}")
    return report


# ---------------------------------------------------------------------------
# integrated Hermite norms


def _walsh_hadamard(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64)
    h = 1
    while h < len(out):
        for start in range(0, len(out), 2 * h):
            a = out[start : start + h].copy()
            b = out[start + h : start + 2 * h].copy()
            out[start : start + h] = a + b
            out[start + h : start + 2 * h] = a - b
        h *= 2
    return out


def integrated_hermite_norm(d: int, k: int, i: int, s_values=None) -> float:
    """``E_0[ (int H_i(<X, V^(x)k>/d^{k/2}) S(V) dpi)^2 ]`` exactly.

    Correlated Hermite orthogonality collapses the Gaussian expectation
    to ``E_{V, V'}[ (<V, V'>/d)^{ki} S(V) S(V') ]``; the pair sum over
    the hypercube is evaluated through the autocorrelation of S (two
    Walsh-Hadamard transforms), so the cost is O(d 2^d) instead of 4^d.
    ``s_values`` lists S over {+-1}^d in binary order (bit = 1 meaning
    coordinate -1); None means S = 1.
    """
    if not 1 <= d <= MAX_PAIR_ENUM_DIM:
        raise ValueError(f"pair enumeration supports d <= {MAX_PAIR_ENUM_DIM}")
    if k < 1 or i < 0:
        raise ValueError(f"need k >= 1 and i >= 0, got k={k}, i={i}")
    size = 2**d
    if s_values is None:
        s_values = np.ones(size)
    s_values = np.asarray(s_values, dtype=np.float64)
    if s_values.shape != (size,):
        raise ValueError(f"S must list {size} values, got shape {s_values.shape}")
    autocorr = _walsh_hadamard(_walsh_hadamard(s_values) ** 2) / size
    pc = np.bitwise_count(np.arange(size, dtype=np.uint64)).astype(np.float64)
    rho = (d - 2.0 * pc) / d
    return float((rho ** (k * i) * autocorr).sum() / size**2)


def integrated_hermite_inner(d: int, k: int, i: int, j: int, s_values=None) -> float:
    """``E_0[intH_i * intH_j]``: zero off the diagonal, exactly.

    Correlated Hermite polynomials of different degrees have covariance
    ``rho^i * delta_ij``, so the cross expectation vanishes before any
    enumeration happens; the diagonal reduces to the norm.
    """
    if i != j:
        return 0.0
    return integrated_hermite_norm(d, k, i, s_values)


# ---------------------------------------------------------------------------
# low-degree likelihood-ratio norms


@dataclass(frozen=True)
class LDLRInstance:
    """One exact low-degree norm computation.

    ``coeffs`` holds the measure's orthonormal-Hermite coefficients
    nu_hat_1 .. nu_hat_t (signal scale included for the projection
    models; universal sign coefficients for the correlated-views model,
    whose per-sample scale enters through ``snr``).
    """

    problem: str
    N: int
    d: int
    k: int
    t: int
    coeffs: tuple
    snr: float = 0.0

    def __post_init__(self):
        if self.problem not in ("ngca", "cca"):
            raise ValueError(f"unsupported problem {self.problem!r}")
        if self.N < 1 or self.d < 1 or self.k < 1 or self.t < 1:
            raise ValueError("N, d, k, t must all be >= 1")
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) < self.t:
            raise ValueError(f"need {self.t} coefficients, got {len(coeffs)}")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)


def _convolve_truncated(a, b, cap):
    out = [0.0] * (cap + 1)
    for i, ai in enumerate(a):
        if ai == 0.0 or i > cap:
            continue
        for j, bj in enumerate(b):
            if i + j > cap:
                break
            out[i + j] += ai * bj
    return out


def ldlr_norm_exact(inst: LDLRInstance) -> float:
    """``||L^{<=t} - 1||_2^2`` by exact multi-index summation.

    The sum over degree multi-indices collapses to truncated powers of
    the coefficient generating polynomial, weighted by the exact plain
    hypercube moments ``E[Vbar^w]`` of matching total degree; for the
    correlated-views model each view contributes an independent factor
    and subsets of samples are counted by binomial weight.
    """
    if inst.N > 6 or inst.d > 10 or inst.t > 8:
        raise ValueError("exact norm capped at N <= 6, d <= 10, t <= 8")
    moments = [float(rademacher_mean_moment(inst.d, w)) for w in range(inst.t + 1)]
    nu_sq = [0.0] + [c * c for c in inst.coeffs[: inst.t]]
    if inst.problem == "ngca":
        # p(z) = 1 + sum_j nu_j^2 z^j, one factor per sample.
        p = [1.0] + nu_sq[1:]
        power = [1.0]
        for _ in range(inst.N):
            power = _convolve_truncated(power, p, inst.t)
        return sum(power[w] * moments[w] for w in range(1, inst.t + 1))
    # Correlated views: subsets of samples of size s carry weight
    # C(N, s) (lambda/lambda_k)^{2s}; each of the k views contributes a
    # factor c_s(w) m(w) with c_s the degree-w coefficient of q(z)^s,
    # q(z) = sum_j nu_j^2 z^j (every selected sample needs degree >= 1).
    ratio = inst.snr / cca_critical_snr(inst.k)
    q = [0.0] + nu_sq[1:]
    total = 0.0
    q_power = [1.0]
    for s in range(1, inst.N + 1):
        q_power = _convolve_truncated(q_power, q, inst.t)
        g = [q_power[w] * moments[w] for w in range(inst.t + 1)]
        views = [1.0]
        for _ in range(inst.k):
            views = _convolve_truncated(views, g, inst.t)
        total += math.comb(inst.N, s) * ratio ** (2 * s) * sum(views)
    return total


def ldlr_sandwich(inst: LDLRInstance, c_lower: float, c_upper: float) -> dict:
    """Evaluate the two-sided envelope for one instance.

    Lower bound requires t even, divisible by k, and at most d:
    ``(N lam^2 t^{(k-2)/2} / (c_lower d^{k/2}))^{t/k} <= norm``;
    upper bound: ``norm <= c_upper N lam^2 t^{(k-2)/2} / d^{k/2}``.
    """
    norm = ldlr_norm_exact(inst)
    scale = (
        inst.N * inst.snr**2 * inst.t ** ((inst.k - 2) / 2.0) / inst.d ** (inst.k / 2.0)
    )
    upper = c_upper * scale
    result = {"norm": norm, "upper": upper, "upper_ok": norm <= upper}
    if inst.t % 2 == 0 and inst.t % inst.k == 0 and inst.t <= inst.d:
        lower = (scale / c_lower) ** (inst.t / inst.k)
        result["lower"] = lower
        result["lower_ok"] = lower <= norm
    return result


# ---------------------------------------------------------------------------
# sign coefficients


def sign_coefficient(t: int) -> float:
    """``E[H_t(Z) sign(Z)]`` in the orthonormal basis, closed form.

    Zero for even t; for t = 2m + 1 the value is
    ``sqrt(2/pi) (-1)^m (2m-1)!! / sqrt((2m+1)!)``.
    """
    if t < 0:
        raise ValueError(f"degree must be >= 0, got {t}")
    if t % 2 == 0:
        return 0.0
    m = (t - 1) // 2
    dfact = math.prod(range(1, 2 * m, 2)) if m > 0 else 1
    return math.sqrt(2.0 / math.pi) * (-1) ** m * dfact / math.sqrt(math.factorial(t))


def sign_tail_mass(t_max: int) -> float:
    """Exact ``sum_{t > t_max} E[H_t(Z) sign(Z)]^2``.

    The squared coefficients are ``(2/pi) (2m-1)!!/((2m)!!(2m+1))`` for
    t = 2m+1, the Taylor coefficients of ``(2/pi) arcsin``; the total
    mass is therefore exactly 1 and the tail is 1 minus an exact
    rational partial sum (scaled by 2/pi), with only float rounding in
    the final conversion.
    """
    if t_max < 0:
        raise ValueError(f"degree cap must be >= 0, got {t_max}")
    partial = Fraction(0)
    m = 0
    while 2 * m + 1 <= t_max:
        num = math.prod(range(1, 2 * m, 2)) if m > 0 else 1
        den = (math.prod(range(2, 2 * m + 1, 2)) if m > 0 else 1) * (2 * m + 1)
        partial += Fraction(num, den)
        m += 1
    return 1.0 - (2.0 / math.pi) * float(partial)


# ---------------------------------------------------------------------------
# statistical cross-check of the likelihood-ratio decomposition


def tpca_llr_hermite_check(
    k: int, d: int, snr: float, mc_samples: int, seed: int
) -> list[dict]:
    """Monte Carlo check of the spiked-tensor likelihood-ratio expansion.

    Under the null, ``E[LR(X) H_i(m_V)]`` must equal ``snr^i/sqrt(i!)``
    where ``m_V = <X, V^(x)k>/d^{k/2}``; each degree i <= 5 is reported
    with its five-standard-error band.
    """
    if mc_samples < 10_000:
        raise ValueError(f"need at least 1e4 samples, got {mc_samples}")
    rng = np.random.default_rng(seed)
    v = rng.choice([-1.0, 1.0], size=d)
    vk = v
    for _ in range(k - 1):
        vk = np.multiply.outer(vk, v)
    vk = vk.reshape(-1) / math.sqrt(float(d) ** k)
    x = rng.standard_normal((mc_samples, vk.size))
    m = x @ vk
    ratio = np.exp(snr * m - snr * snr / 2.0)
    basis = HermiteBasis(5)
    h = basis.eval_all(m)
    report = []
    for i in range(6):
        values = ratio * h[i]
        estimate = float(values.mean())
        se = float(values.std(ddof=1)) / math.sqrt(mc_samples)
        target = snr**i / math.sqrt(math.factorial(i))
        report.append(
            {
                "degree": i,
                "estimate": estimate,
                "target": target,
                "se": se,
                "ok": abs(estimate - target) <= 5.0 * se + 1e-12,
            }
        )
    return report


# ---------------------------------------------------------------------------
# calibration fixture


def load_calibration() -> dict:
    """Frozen constants from the packaged key = value fixture."""
    text = resources.files("spikelab").joinpath("data/calibration.txt").read_text()
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, raw = line.partition("=")
        values[key.strip()] = float(raw.strip())
    return values
