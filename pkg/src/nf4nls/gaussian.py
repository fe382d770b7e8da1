"""Gaussian random Fourier series, the dispersionless flow and LIL statistics.

A draw from mu_s is  u(x) = sum_{|n| <= N_samp} g_n <n>^{-s} e^{inx}  with
g_n = a_n + i b_n, a_n, b_n independent standard normals (E|g_n|^2 = 2).
Every sample owns an RNG stream keyed by (seed, sample index), so sample
k of an ensemble can be regenerated on its own.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from .spectral import japanese_bracket

E_E = math.exp(-math.e)  # largest h where log log(1/h) >= 1
E_EE = math.exp(-math.exp(math.e))  # largest h where log log log(1/h) >= 1
_I_POWERS = (1, 1j, -1, -1j)


class ResolutionError(ValueError):
    pass


def sample_rng(seed, index=0):
    """Independent generator for sample ``index`` of the ensemble keyed by ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True, eq=False)
class RandomFieldSample:
    s: float
    N_samp: int
    seed: int
    g: np.ndarray  # complex Gaussians for n = -N_samp..N_samp
    M_samp: int
    index: int = 0
    deriv_order: int = 0

    @property
    def n(self):
        return np.arange(-self.N_samp, self.N_samp + 1)

    @property
    def effective_s(self):
        return self.s - self.deriv_order

    @cached_property
    def weights(self):
        """Deterministic multipliers w_n with c_n = g_n w_n."""
        n = self.n.astype(float)
        w = japanese_bracket(n) ** (-self.s) + 0j
        r = self.deriv_order
        if r:
            w = w * _I_POWERS[r % 4] * n**r
            w[self.N_samp] = 0
        return w

    @cached_property
    def coeffs(self):
        return self.g * self.weights

    @cached_property
    def grid_values(self):
        """u on x_m = 2 pi m / M_samp, exact for the truncated series."""
        buf = np.zeros(self.M_samp, dtype=complex)
        buf[self.n % self.M_samp] = self.coeffs
        return np.fft.ifft(buf) * self.M_samp

    @property
    def grid(self):
        return 2 * np.pi * np.arange(self.M_samp) / self.M_samp

    def evaluate(self, x):
        """u at arbitrary points by direct summation."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.exp(1j * np.outer(x, self.n)) @ self.coeffs

    def real_increment_variance(self, h):
        """E|Re u(x+h) - Re u(x)|^2 for the law of this sample (exact, truncated)."""
        h = np.atleast_1d(np.asarray(h, dtype=float))
        a = np.abs(self.weights) ** 2
        return np.array([np.sum(a * 4 * np.sin(self.n * hh / 2) ** 2) for hh in h])


def _draw_g(rng, N):
    ab = rng.standard_normal((2, 2 * N + 1))
    return ab[0] + 1j * ab[1]


def sample_mu_s(s, N_samp=2**16, seed=0, M_samp=2**21, index=0):
    """Draw sample ``index`` of mu_s truncated at |n| <= N_samp."""
    if s <= 0.5:
        raise ValueError(f"mu_s needs s > 1/2, got {s}")
    if M_samp < 2 * N_samp + 1:
        raise ValueError("M_samp must be at least 2 N_samp + 1")
    g = _draw_g(sample_rng(seed, index), N_samp)
    g.setflags(write=False)
    return RandomFieldSample(float(s), int(N_samp), int(seed), g, int(M_samp), int(index))


def tail_variance(s, N_samp):
    """sum_{|n| > N_samp} 2 <n>^{-2s}: the variance left out by truncation."""
    n = np.arange(N_samp + 1, 64 * N_samp + 1, dtype=float)
    head = 4 * np.sum(japanese_bracket(n) ** (-2 * s))
    x = 64 * N_samp + 0.5
    return float(head + 4 * x ** (1 - 2 * s) / (2 * s - 1))


def derivative_field(sample, r):
    """r-th derivative: coefficients times (in)^r, the zero mode dropped when r >= 1."""
    if r < 0 or int(r) != r:
        raise ValueError("r must be a nonnegative integer")
    total = sample.deriv_order + int(r)
    if total and not total < sample.s - 0.5:
        raise ValueError(f"derivative order {total} needs s - 1/2 > {total} (s = {sample.s})")
    return RandomFieldSample(sample.s, sample.N_samp, sample.seed, sample.g, sample.M_samp,
                             sample.index, total)


def dispersionless_flow(sample, t):
    """Solution e^{-it|u0|^2} u0 of i u_t = |u|^2 u on the sample's grid."""
    u = sample.grid_values if isinstance(sample, RandomFieldSample) else np.asarray(sample)
    return np.exp(-1j * t * np.abs(u) ** 2) * u


def flow_values(u, t):
    return np.exp(-1j * t * np.abs(u) ** 2) * u


def psi(h):
    """sqrt(2 h log log(1/h)), admissible for 0 < h <= e^{-e}."""
    if not 0 < h <= E_E:
        raise ValueError(f"psi needs 0 < h <= e^-e, got {h}")
    return math.sqrt(2 * h * math.log(math.log(1 / h)))


def critical_modulus(h):
    """2^{3/2} h sqrt(log(1/h) log log log(1/h)), admissible for 0 < h < e^{-e^e}."""
    if not 0 < h < E_EE:
        raise ValueError(f"critical modulus needs 0 < h < e^-e^e, got {h}")
    L = math.log(1 / h)
    return 2**1.5 * h * math.sqrt(L * math.log(math.log(L)))


def increment_variance(s, x, N_cut):
    """2 sum_{|n| <= N_cut} |1 - e^{inx}|^2 / <n>^{2s}."""
    n = np.arange(1, N_cut + 1, dtype=float)
    # the n and -n terms coincide; n = 0 contributes nothing
    return float(4 * np.sum(4 * np.sin(n * x / 2) ** 2 * japanese_bracket(n) ** (-2 * s)))


NORMALIZERS = ("CLASSICAL", "FRACTIONAL", "CRITICAL")


def _normalizer(sample, hs, kind):
    if kind == "CLASSICAL":
        # Re u of an s = 1 draw behaves like sqrt(2 pi) times a Brownian motion at small scales
        return np.array([math.sqrt(2 * math.pi) * psi(h) for h in hs])
    if kind == "FRACTIONAL":
        for h in hs:
            psi(h)  # domain guard
        var = sample.real_increment_variance(hs)
        return np.sqrt(2 * var * np.log(np.log(1 / hs)))
    if kind == "CRITICAL":
        return np.array([critical_modulus(h) for h in hs])
    raise ValueError(f"unknown normalizer {kind!r}")


@dataclass
class LILReport:
    x0: float
    ks: np.ndarray
    h: np.ndarray
    normalizer: str
    ratios_pre: np.ndarray
    ratios_post: np.ndarray = None
    t: float = 0.0

    @property
    def max_pre(self):
        return float(np.max(self.ratios_pre))

    @property
    def max_post(self):
        return float(np.max(self.ratios_post)) if self.ratios_post is not None else None


def check_resolution(N_samp, k_max):
    """The finest probed scale must satisfy 16 h N_samp >= 1."""
    if 16 * 2.0 ** (-k_max) * N_samp < 1:
        raise ResolutionError(f"series truncation {N_samp} does not resolve h = 2^-{k_max}")


class _PointEvaluator:
    """Reusable e^{inx} table for the points x0 and x0 + h_k."""

    def __init__(self, N_samp, x0, ks):
        self.h = 2.0 ** (-np.asarray(ks, dtype=float))
        pts = np.concatenate([[x0], x0 + self.h])
        n = np.arange(-N_samp, N_samp + 1)
        self.table = np.exp(1j * np.outer(pts, n))

    def values(self, coeffs):
        return self.table @ coeffs


def _ratios(vals, norm):
    re = vals.real
    return np.abs(re[1:] - re[0]) / norm


def lil_ratio(sample, x0=math.pi, k_min=4, k_max=20, normalizer="CLASSICAL", t=None, _evaluator=None):
    """Increment ratios |Re u(x0 + h) - Re u(x0)| / normalizer(h) on h = 2^-k.

    With ``t`` given, the same ratios are also computed for the
    dispersionless evolution e^{-it|u|^2} u.
    """
    if k_min > k_max:
        raise ValueError("k_min must not exceed k_max")
    check_resolution(sample.N_samp, k_max)
    ks = np.arange(k_min, k_max + 1)
    ev = _evaluator or _PointEvaluator(sample.N_samp, x0, ks)
    norm = _normalizer(sample, ev.h, normalizer)
    vals = ev.values(sample.coeffs)
    rep = LILReport(x0, ks, ev.h, normalizer, _ratios(vals, norm), t=t or 0.0)
    if t is not None:
        rep.ratios_post = _ratios(flow_values(vals, t), norm)
    return rep


def lil_target(k):
    """M with M^2 = -pi/2 + 2 k pi, so that sin(M^2) = -1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.sqrt(-math.pi / 2 + 2 * k * math.pi)


@dataclass
class BreakdownReport:
    s: float
    t: float
    M: float
    eps: float
    x0: float
    draws: int
    rows: list  # (sample index, conditioned flag, pre max ratio, post max ratio)
    theta: float
    rank_statistic: float = float("nan")
    p_value: float = float("nan")
    fraction_exceeding: float = float("nan")
    baseline_fraction: float = float("nan")
    config: dict = field(default_factory=dict)

    @property
    def conditioned(self):
        return [r for r in self.rows if r[1]]

    @property
    def n_conditioned(self):
        return len(self.conditioned)


def _exceed_fraction(rows, theta):
    if not rows:
        return float("nan")
    hits = sum(1 for r in rows if r[3] > theta and r[2] < 2)
    return hits / len(rows)


def lil_breakdown_experiment(s, t, M_target, eps, num_samples, seed, x0=math.pi, k_min=4, k_max=20,
                             N_samp=2**16, normalizer="CLASSICAL", theta=None, baseline_samples=64,
                             max_conditioned=None):
    """Condition draws on |Re u(x0) - M| <= eps, |Im u(x0)| <= eps and compare LIL ratios before and after the flow.

    Draw k uses the stream (seed, k).  The first ``baseline_samples`` draws
    are kept whatever their value at x0 (the unconditioned baseline); every
    other draw is kept only if it lands in the conditioning set.  Drawing
    stops after ``num_samples`` draws or once ``max_conditioned``
    conditioned samples are collected.  The one-sided Mann-Whitney test asks
    whether conditioned post-flow maxima exceed the pre-flow maxima.
    """
    if s <= 0.5:
        raise ValueError("s must exceed 1/2")
    check_resolution(N_samp, k_max)
    theta = M_target**2 if theta is None else theta
    ks = np.arange(k_min, k_max + 1)
    ev = _PointEvaluator(N_samp, x0, ks)
    probe = ev.table[0]
    w = japanese_bracket(np.arange(-N_samp, N_samp + 1)) ** (-s)
    ref = RandomFieldSample(float(s), N_samp, seed, np.zeros(1), 2 * N_samp + 1)
    norm = _normalizer(ref, ev.h, normalizer)
    rows = []
    draws = 0
    n_cond = 0
    for k in range(num_samples):
        draws += 1
        c = _draw_g(sample_rng(seed, k), N_samp) * w
        u0 = probe @ c
        cond = abs(u0.real - M_target) <= eps and abs(u0.imag) <= eps
        if cond or k < baseline_samples:
            vals = ev.values(c)
            pre = float(np.max(_ratios(vals, norm)))
            post = float(np.max(_ratios(flow_values(vals, t), norm)))
            rows.append((k, bool(cond), pre, post))
            n_cond += cond
        if max_conditioned is not None and n_cond >= max_conditioned:
            break
    rep = BreakdownReport(s, t, M_target, eps, x0, draws, rows, theta)
    rep.config = dict(s=s, t=t, M=M_target, eps=eps, x0=x0, k_min=k_min, k_max=k_max, N_samp=N_samp,
                      normalizer=normalizer, seed=seed, num_samples=num_samples,
                      baseline_samples=baseline_samples, max_conditioned=max_conditioned)
    cond_rows = rep.conditioned
    if not cond_rows:
        raise ValueError(f"no draw out of {draws} landed in the conditioning set; raise num_samples or eps")
    pre = np.array([r[2] for r in cond_rows])
    post = np.array([r[3] for r in cond_rows])
    if t == 0:
        rep.rank_statistic, rep.p_value = float("nan"), 1.0
    else:
        res = stats.mannwhitneyu(post, pre, alternative="greater")
        rep.rank_statistic, rep.p_value = float(res.statistic), float(res.pvalue)
    rep.fraction_exceeding = _exceed_fraction(cond_rows, theta)
    rep.baseline_fraction = _exceed_fraction([r for r in rows if r[0] < baseline_samples], theta)
    return rep


def kakutani_divergence(sigma_sq, sigma_sq_tilde):
    """Partial sum of (sigma~^2_n / sigma^2_n - 1)^2."""
    terms = kakutani_terms(sigma_sq, sigma_sq_tilde)
    return float(np.sum(terms))


def kakutani_terms(sigma_sq, sigma_sq_tilde):
    a = np.asarray(sigma_sq, dtype=float)
    b = np.asarray(sigma_sq_tilde, dtype=float)
    if a.shape != b.shape:
        raise ValueError("variance sequences must have equal length")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("variances must be positive")
    return (b / a - 1) ** 2


def kakutani_tail_slope(sigma_sq, sigma_sq_tilde, tail=0.5):
    """Log-log slope of the terms over the last ``tail`` fraction of indices.

    A slope below -1 indicates a convergent series, -1 or above divergence.
    """
    terms = kakutani_terms(sigma_sq, sigma_sq_tilde)
    n = np.arange(1, len(terms) + 1)
    start = int(len(terms) * (1 - tail))
    sel = slice(start, None)
    good = terms[sel] > 0
    if good.sum() < 2:
        return -math.inf
    slope, _ = np.polyfit(np.log(n[sel][good]), np.log(terms[sel][good]), 1)
    return float(slope)


def kakutani_converges(sigma_sq, sigma_sq_tilde, margin=0.2):
    return kakutani_tail_slope(sigma_sq, sigma_sq_tilde) < -1 - margin
