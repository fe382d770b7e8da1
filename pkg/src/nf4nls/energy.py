"""Normal-form correction terms, the modified energy and related diagnostics.

Repeated integration by parts of d/dt (1/2)||v||^2_{H^s} along the
truncated flow produces, for every ordered bi-tree T of generation j and
every admissible frequency assignment, a multilinear term

    B(T, n) <n_r>^{2s} exp(-i phit_j t) prod_{terminals a} v_{n_a}^{(e_a)}

with v^{(+1)} = v, v^{(-1)} = conj(v), phit_j the signed cumulative phase
and the real boundary coefficient

    B = (-1)^{j-1} e_1 ... e_j / (phit_1 ... phit_j),

where e_k is the parity of the node expanded at generation k.  Assignments
in a near-resonant set C_k for some k < j are dropped.  Summing the real
parts over generation j-1 gives N0^{(j)}; expanding a terminal one more
time gives N^{(j)} = N1^{(j)} (near-resonant part) + N2^{(j)} (the rest) and
the resonant insertions give R^{(j)}.

The index structure depends only on (N, J), so it is built once
(``NormalFormExpansion``) and re-evaluated for any field, time and s.
Rows of the last generation are never materialised: the sum over the
Gamma(m) tuples attached to a terminal m is split at the cutoff through
prefix sums over tuples sorted by their signed phase.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import bitrees
from .bitrees import BudgetExceeded, OrderedBiTree, cutoff_threshold, enumeration_budget
from .spectral import (
    Frame,
    SpectralField,
    gamma_tuples,
    japanese_bracket,
    phase_phi_array,
    sobolev_norm,
)

_OFFSET = 1 << 40
_CHUNK = 1 << 18


@dataclass
class _Level:
    """Rows of generation j: one per (tree, admissible assignment) outside the earlier cutoffs."""

    j: int
    trees: list
    tree_idx: np.ndarray
    freq: np.ndarray  # (rows, 2j+2) terminal frequencies, columns in tree.terminals() order
    par: np.ndarray  # (rows, 2j+2) terminal parities
    root: np.ndarray
    phi: np.ndarray  # cumulative signed phase phit_j (exact int64)
    coef: np.ndarray  # boundary coefficient B
    lo: np.ndarray = None  # prefix-sum query bounds for the next expansion
    hi: np.ndarray = None

    @property
    def rows(self):
        return len(self.root)


class _GammaTable:
    """All Gamma_N(m) tuples, grouped per (m, parity) and sorted by signed phase."""

    def __init__(self, N):
        self.N = N
        blocks_m, tups = [], []
        for m in range(-N, N + 1):
            t = gamma_tuples(m, N)
            tups.append(t)
            blocks_m.append(np.full(len(t), m, dtype=np.int64))
        self.tuples = np.concatenate(tups) if tups else np.zeros((0, 3), np.int64)
        self.m = np.concatenate(blocks_m)
        self.phi = phase_phi_array(self.tuples[:, 0], self.tuples[:, 1], self.tuples[:, 2], self.m)
        self.count = np.array([len(t) for t in tups], dtype=np.int64)
        self.start = np.concatenate([[0], np.cumsum(self.count)[:-1]])
        # two copies: parity +1 (block 2(m+N)) and parity -1 (block 2(m+N)+1)
        block = np.concatenate([2 * (self.m + N), 2 * (self.m + N) + 1])
        key = np.concatenate([self.phi, -self.phi])
        gkey = block * _OFFSET + key + _OFFSET // 2
        self.order = np.argsort(gkey, kind="stable")
        self.gkey = gkey[self.order]
        nblocks = 2 * (2 * N + 1)
        self.block_start = np.searchsorted(self.gkey, np.arange(nblocks) * _OFFSET, "left")
        self.block_end = np.searchsorted(self.gkey, (np.arange(nblocks) + 1) * _OFFSET, "left")
        self.max_phi = int(np.max(np.abs(self.phi))) if len(self.phi) else 0

    def query_bounds(self, m, eps, phi, K):
        """Sorted positions of tuples with |phi + eps*phi_tau| <= K for each (m, eps, phi) query."""
        block = 2 * (m + self.N) + (eps < 0)
        base = block * _OFFSET + _OFFSET // 2
        lo = np.searchsorted(self.gkey, base + (-K - phi), "left")
        hi = np.searchsorted(self.gkey, base + (K - phi), "right")
        return lo.astype(np.int32), hi.astype(np.int32), block

    def prefix(self, v, t):
        """Prefix sums of exp(-i eps phi t) * child product for every sorted entry."""
        N = self.N
        a, b, c = (self.tuples[:, k] + N for k in range(3))
        plus = np.exp(-1j * self.phi * t) * v[a] * np.conj(v[b]) * v[c]
        vals = np.concatenate([plus, np.conj(plus)])[self.order]
        return np.concatenate([[0j], np.cumsum(vals)])


def _level_one(tree, gamma, N):
    rows_n, rows_t = [], []
    for m in range(-N, N + 1):
        t = gamma_tuples(m, N)
        rows_n.append(np.full(len(t), m, dtype=np.int64))
        rows_t.append(t)
    n = np.concatenate(rows_n)
    t = np.concatenate(rows_t)
    values = {0: n, 1: n, 2: t[:, 0], 3: t[:, 1], 4: t[:, 2]}
    terms = tree.terminals()
    freq = np.stack([values[a] for a in terms], axis=1)
    par = np.tile(np.array([tree.parity(a) for a in terms], dtype=np.int8), (len(n), 1))
    phi = phase_phi_array(t[:, 0], t[:, 1], t[:, 2], n) * tree.parity(0)
    coef = (tree.parity(0) / phi.astype(float))
    return _Level(1, [tree], np.zeros(len(n), np.int32), freq, par, n, phi, coef)


def _expand_level(level, gamma, N, budget):
    """Materialise generation j+1 rows lying outside C_j."""
    j = level.j
    K = cutoff_threshold(j)
    cand = int(sum(gamma.count[level.freq[:, c] + N].sum() for c in range(level.freq.shape[1])))
    if cand > budget:
        raise BudgetExceeded(f"generation {j + 1} needs {cand} assignments, budget {budget}")
    trees, parts = [], []
    for ti, tree in enumerate(level.trees):
        sel = np.nonzero(level.tree_idx == ti)[0]
        terms = tree.terminals()
        for c, b in enumerate(terms):
            child = tree.expand(b)
            eps = tree.parity(b)
            kid_par = [child.parity(x) for x in child.children(b)]
            m = level.freq[sel, c]
            cnt = gamma.count[m + N]
            ridx = np.repeat(sel, cnt)
            within = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            tidx = gamma.start[np.repeat(m, cnt) + N] + within
            phi = level.phi[ridx] + eps * gamma.phi[tidx]
            keep = np.abs(phi) > K
            ridx, tidx, phi = ridx[keep], tidx[keep], phi[keep]
            others = [k for k in range(len(terms)) if k != c]
            freq = np.concatenate([level.freq[ridx][:, others], gamma.tuples[tidx]], axis=1)
            par_row = np.array([tree.parity(terms[k]) for k in others] + kid_par, dtype=np.int8)
            coef = level.coef[ridx] * (-eps) / phi.astype(float)
            trees.append(child)
            parts.append((len(trees) - 1, freq, par_row, level.root[ridx], phi, coef))
    tree_idx = np.concatenate([np.full(len(p[3]), p[0], np.int32) for p in parts])
    freq = np.concatenate([p[1] for p in parts])
    par = np.concatenate([np.tile(p[2], (len(p[3]), 1)) for p in parts])
    root = np.concatenate([p[3] for p in parts])
    phi = np.concatenate([p[4] for p in parts])
    coef = np.concatenate([p[5] for p in parts])
    return _Level(j + 1, trees, tree_idx, freq, par, root, phi, coef)


@dataclass
class ExpansionValues:
    """Per-generation real values; index j runs over 2..J+1."""

    N0: dict
    N1: dict
    N2: dict
    R: dict
    hs_derivative: float  # d/dt (1/2)||v||^2_{H^s}, evaluated from the first-generation sum


class NormalFormExpansion:
    """Index structure for generations 1..J at truncation N."""

    def __init__(self, N, J, budget=None):
        if J < 1:
            raise ValueError("J must be >= 1")
        if N > 2**10:
            raise ValueError("N too large for exact int64 phases")
        self.N = N
        self.J = J
        budget = enumeration_budget() if budget is None else budget
        self.gamma = _GammaTable(N)
        self.levels = [_level_one(OrderedBiTree.initial(), self.gamma, N)]
        for _ in range(1, J):
            self.levels.append(_expand_level(self.levels[-1], self.gamma, N, budget))
        for lv in self.levels:
            self._prepare_queries(lv)

    def _prepare_queries(self, lv):
        # column-major copies (terminal slot, row) for fast per-slot arithmetic
        N = self.N
        K = cutoff_threshold(lv.j)
        C = lv.freq.shape[1]
        lv.gidx = np.ascontiguousarray((lv.freq + N + (lv.par < 0) * (2 * N + 1)).T.astype(np.int32))
        lv.eps = np.ascontiguousarray(lv.par.T.astype(float))
        lv.absidx = np.ascontiguousarray((lv.freq + N).T.astype(np.int32))
        lv.lo = np.empty((C, lv.rows), np.int32)
        lv.hi = np.empty((C, lv.rows), np.int32)
        lv.block = np.empty((C, lv.rows), np.int32)
        for c in range(C):
            lv.lo[c], lv.hi[c], lv.block[c] = self.gamma.query_bounds(lv.freq[:, c], lv.par[:, c], lv.phi, K)
        lv.phif = lv.phi.astype(float)

    @property
    def row_counts(self):
        return [lv.rows for lv in self.levels]

    def max_frequency(self):
        """Largest |cumulative phase| among the materialised rows (sets the FD step scale)."""
        return max(int(np.max(np.abs(lv.phi))) if lv.rows else 0 for lv in self.levels)

    def rows_per_tree(self, j):
        lv = self.levels[j - 1]
        return np.bincount(lv.tree_idx, minlength=len(lv.trees))

    def evaluate(self, coeffs, t, s):
        """All N0, N1, N2, R values (generations 2..J+1) for interaction-frame coefficients."""
        N = self.N
        v = np.asarray(coeffs, dtype=complex)
        if v.shape != (2 * N + 1,):
            raise ValueError(f"expected {2 * N + 1} coefficients")
        V = np.concatenate([v, np.conj(v)])
        absv2 = np.abs(v) ** 2
        cs = self.gamma.prefix(v, t)
        totals = cs[self.gamma.block_end] - cs[self.gamma.block_start]
        out = ExpansionValues({}, {}, {}, {}, 0.0)
        for lv in self.levels:
            n0 = n1 = ntot = r = hs = 0.0
            C = lv.gidx.shape[0]
            for a in range(0, lv.rows, _CHUNK):
                sl = slice(a, a + _CHUNK)
                vals = V[lv.gidx[:, sl]]
                eps = lv.eps[:, sl]
                weight = japanese_bracket(lv.root[sl]) ** (2 * s) * lv.coef[sl]
                osc = weight * np.exp(-1j * lv.phif[sl] * t)
                # leave-one-out products: excl[c] = prod_{k != c} vals[k]
                left = np.empty_like(vals)
                left[0] = 1.0
                for c in range(1, C):
                    left[c] = left[c - 1] * vals[c - 1]
                prod = left[C - 1] * vals[C - 1]
                excl = left
                acc = vals[C - 1].copy()
                for c in range(C - 2, -1, -1):
                    excl[c] *= acc
                    acc *= vals[c]
                base = osc * prod
                n0 += base.real.sum()
                r += (base * (eps * absv2[lv.absidx[:, sl]]).sum(axis=0)).imag.sum()
                if lv.j == 1:
                    hs += (lv.phif[sl] * base).imag.sum()
                inside = cs[lv.hi[:, sl]] - cs[lv.lo[:, sl]]
                weighted = excl * eps
                n1 -= (osc * (weighted * inside).sum(axis=0)).imag.sum()
                ntot -= (osc * (weighted * totals[lv.block[:, sl]]).sum(axis=0)).imag.sum()
            j = lv.j + 1
            out.N0[j], out.N1[j], out.N2[j], out.R[j] = n0, n1, ntot - n1, r
            if lv.j == 1:
                out.hs_derivative = hs
        return out


@functools.lru_cache(maxsize=16)
def _cached_expansion(N, J, budget, rule):
    return NormalFormExpansion(N, J, budget)


def get_expansion(N, J, budget=None):
    """Shared expansion for (N, J); rebuilt if the parity rule is swapped out."""
    budget = enumeration_budget() if budget is None else budget
    return _cached_expansion(N, J, budget, bitrees.child_parities)


def _truncated(v, N):
    if isinstance(v, SpectralField):
        if v.frame is not Frame.INTERACTION_V:
            raise ValueError("correction terms are defined on the interaction-frame field")
        c = np.array([v.coeff(k) for k in range(-N, N + 1)])
        return c
    c = np.asarray(v, dtype=complex)
    M = (len(c) - 1) // 2
    if M < N:
        return np.concatenate([np.zeros(N - M), c, np.zeros(N - M)])
    return c[M - N:M + N + 1]


def _field_mass(c):
    return float(np.sum(np.abs(c) ** 2))


def eval_N0(v, t, j, N, s):
    """Boundary term N0^{(j)}, j >= 2 (sum over generation j-1 bi-trees)."""
    if j < 2:
        raise ValueError("N0 is defined for j >= 2")
    return get_expansion(N, j - 1).evaluate(_truncated(v, N), t, s).N0[j]


def eval_N1(v, t, j, N, s):
    """Near-resonant term N1^{(j)}, j >= 2."""
    if j < 2:
        raise ValueError("N1 is defined for j >= 2")
    return get_expansion(N, j - 1).evaluate(_truncated(v, N), t, s).N1[j]


def eval_R(v, t, j, N, s):
    """Resonant-insertion term R^{(j)}, j >= 2."""
    if j < 2:
        raise ValueError("R is defined for j >= 2")
    return get_expansion(N, j - 1).evaluate(_truncated(v, N), t, s).R[j]


def eval_N2(v, t, j, N, s):
    """Remainder N2^{(j)}, j >= 2."""
    return get_expansion(N, j - 1).evaluate(_truncated(v, N), t, s).N2[j]


@dataclass
class EnergyBreakdown:
    s: float
    N: int
    J_max: int
    N0: dict
    N1: dict
    R: dict
    N2: dict
    hs_energy: float
    modified_energy: float
    residual: float  # assembled remainder N2^{(J_max+1)}
    mass: float
    C0: dict = field(default_factory=dict)  # measured |N0^{(j)}| / mass^j
    C1: dict = field(default_factory=dict)  # measured |N1^{(j)}| / mass^{j+1}
    C2: dict = field(default_factory=dict)  # measured |R^{(j)}| / mass^{j+1}

    def rows(self):
        return [(j, self.N0[j], self.N1[j], self.R[j]) for j in sorted(self.N0)]


def _scaled(d, m, shift):
    if m == 0:
        return {j: 0.0 for j in d}
    return {j: abs(x) / m ** (j + shift) for j, x in d.items()}


def modified_energy(v, t, s, J_max, N):
    """(1/2)||v||^2_{H^s} minus the boundary terms N0^{(2)} .. N0^{(J_max+1)}."""
    c = _truncated(v, N)
    vals = get_expansion(N, J_max).evaluate(c, t, s)
    f = SpectralField(Frame.INTERACTION_V, N, c, t)
    hs = 0.5 * sobolev_norm(f, s) ** 2
    m = _field_mass(c)
    return EnergyBreakdown(
        s=s, N=N, J_max=J_max,
        N0=vals.N0, N1=vals.N1, R=vals.R, N2=vals.N2,
        hs_energy=hs,
        modified_energy=hs - sum(vals.N0.values()),
        residual=vals.N2[J_max + 1],
        mass=m,
        C0=_scaled(vals.N0, m, 0),
        C1=_scaled(vals.N1, m, 1),
        C2=_scaled(vals.R, m, 1),
    )


FD_WEIGHTS = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _stencil_indices(times, stride=1):
    """Indices i where t[i-2..i+2] is uniformly spaced, thinned to every stride-th."""
    times = np.asarray(times, dtype=float)
    out = []
    for i in range(2, len(times) - 2):
        d = np.diff(times[i - 2:i + 3])
        if np.allclose(d, d[0], rtol=1e-9, atol=0) and d[0] != 0:
            out.append(i)
    return out[::stride]


def _fd(values, times, i):
    h = times[i + 1] - times[i]
    return float(np.dot(FD_WEIGHTS, values[i - 2:i + 3]) / h)


@dataclass
class TelescopingReport:
    times: np.ndarray
    residual: np.ndarray  # FD derivative of the modified energy minus sum(N1 + R)
    remainder: np.ndarray  # assembled N2^{(J+1)}
    fd_energy_derivative: np.ndarray
    fd_hs_derivative: np.ndarray

    @property
    def mismatch(self):
        return np.abs(self.residual - self.remainder)


def telescoping_report(traj, s, J, N, stride=1, max_phase_step=1.0):
    """Evaluate the telescoping identity at every point with a uniform 5-point stencil.

    Derivatives are fourth-order central differences on the recorded
    snapshots.  Raises ValueError when the recording step is too coarse
    for the fastest phase present (h * max|phit| > max_phase_step).
    """
    exp = get_expansion(N, J)
    times = np.asarray(traj.times, dtype=float)
    idx = _stencil_indices(times, stride)
    if not idx:
        raise ValueError("trajectory has no uniformly spaced 5-point stencil")
    need = sorted({k for i in idx for k in range(i - 2, i + 3)})
    energy = np.full(len(times), np.nan)
    hs = np.full(len(times), np.nan)
    cache = {}
    for k in need:
        f = traj.fields[k]
        c = _truncated(f, N)
        vals = exp.evaluate(c, f.time, s)
        cache[k] = vals
        h = 0.5 * float(np.sum(japanese_bracket(np.arange(-N, N + 1)) ** (2 * s) * np.abs(c) ** 2))
        hs[k] = h
        energy[k] = h - sum(vals.N0.values())
    res, rem, de, dh = [], [], [], []
    for i in idx:
        h = times[i + 1] - times[i]
        if abs(h) * max(exp.max_frequency(), exp.gamma.max_phi) > max_phase_step:
            raise ValueError(f"recording step {h:g} too coarse for phases up to {exp.max_frequency()}")
        dE = _fd(energy, times, i)
        vals = cache[i]
        assembled = sum(vals.N1.values()) + sum(vals.R.values())
        res.append(dE - assembled)
        rem.append(vals.N2[J + 1])
        de.append(dE)
        dh.append(_fd(hs, times, i))
    return TelescopingReport(times[idx], np.array(res), np.array(rem), np.array(de), np.array(dh))


def telescoping_residual(traj, s, J, N, stride=1):
    """(t, residual) pairs; residual = d/dt modified energy - sum(N1 + R) ~ N2^{(J+1)}."""
    rep = telescoping_report(traj, s, J, N, stride)
    return list(zip(rep.times.tolist(), rep.residual.tolist()))


def energy_drift_bound(traj, s, J_max, N, stride=1):
    """max_t |d/dt modified energy| over the trajectory's stencil points."""
    rep = telescoping_report(traj, s, J_max, N, stride)
    return float(np.max(np.abs(rep.fd_energy_derivative)))


def hs_drift_bound(traj, s, N, stride=1):
    """max_t |d/dt (1/2)||v||^2_{H^s}| by the same finite differences."""
    rep = telescoping_report(traj, s, 1, N, stride)
    return float(np.max(np.abs(rep.fd_hs_derivative)))


def density_weight(v, t, r, s, J_max, N):
    """Cut-off Gibbs-type weight 1{||v|| <= r} exp(sum_j N0^{(j)})."""
    c = _truncated(v, N)
    if math.sqrt(_field_mass(c)) > r:
        return 0.0
    vals = get_expansion(N, J_max).evaluate(c, t, s)
    return math.exp(sum(vals.N0.values()))


def density_weight_bound(breakdown, r):
    """exp(sum_j C0(j) r^{2j}) with the measured per-generation constants."""
    return math.exp(sum(c * r ** (2 * j) for j, c in breakdown.C0.items()))


def divisor_count(n):
    """Number of positive divisors, by trial division up to sqrt(n)."""
    if n < 1:
        raise ValueError("n must be positive")
    count = 0
    k = 1
    while k * k <= n:
        if n % k == 0:
            count += 1 if k * k == n else 2
        k += 1
    return count


def divisor_counts_upto(n_max):
    """d(1..n_max) by a divisor sieve (index 0 unused)."""
    d = np.zeros(n_max + 1, dtype=np.int64)
    for k in range(1, n_max + 1):
        d[k::k] += 1
    return d


def divisor_inner_sum(n, s, N_cut):
    """sum over n1, n3 != n, |n1|, |n2|, |n3| <= N_cut of <n>^{4s} / phi^2."""
    r = np.arange(-N_cut, N_cut + 1, dtype=np.int64)
    n1, n3 = np.meshgrid(r, r, indexing="ij")
    n2 = n1 + n3 - n
    ok = (np.abs(n2) <= N_cut) & (n1 != n) & (n3 != n)
    phi = phase_phi_array(n1[ok], n2[ok], n3[ok], np.full(ok.sum(), n)).astype(float)
    return float(japanese_bracket(n) ** (4 * s) * np.sum(1.0 / phi**2))


def divisor_sum_diagnostic(s, N_cut):
    """sup over |n| <= N_cut of the first-generation divisor sum (even in n, so n >= 0 suffices)."""
    if s >= 1:
        raise ValueError("diagnostic needs s < 1")
    return max(divisor_inner_sum(n, s, N_cut) for n in range(0, N_cut + 1))


@dataclass
class DriftRow:
    N: int
    sample: int
    modified_drift: float
    hs_drift: float


def drift_sweep(Ns=(2, 4, 6, 8), s=0.6, J_max=1, seed=0, samples=12, n_times=4, t_final=0.05,
                phase_step=0.02, coarse_phase_step=0.3):
    """max_t |d/dt modified energy| and max_t |d/dt (1/2)||v||^2| across truncations.

    Sample k is one Gaussian draw on |n| <= max(Ns), truncated to each N
    and rescaled to mass 1.  The trajectory is integrated with a step
    resolving the first-generation phases to ``coarse_phase_step``; at
    ``n_times`` evenly spaced times a 5-point burst with step
    phase_step / max|phit| feeds the finite differences.
    """
    from .dynamics import IntegratorConfig, burst_trajectory, integrate, random_initial_data

    rows = []
    N_draw = max(Ns)
    for k in range(samples):
        for N in Ns:
            exp = get_expansion(N, J_max)
            fastest = max(exp.max_frequency(), exp.gamma.max_phi, 1)
            h = phase_step / fastest
            dt = min(1e-4, coarse_phase_step / max(exp.gamma.max_phi, 1))
            every = max(1, int(round(t_final / n_times / dt)))
            v0 = random_initial_data(N, s, seed, k, N_draw=N_draw)
            coarse = integrate(v0, IntegratorConfig(N, dt, t_final, record_every=every))
            traj = burst_trajectory(coarse.fields[1:n_times + 1], h)
            rep = telescoping_report(traj, s, J_max, N)
            rows.append(DriftRow(N, k, float(np.max(np.abs(rep.fd_energy_derivative))),
                                 float(np.max(np.abs(rep.fd_hs_derivative)))))
    return rows


def summarize_drift(rows):
    """Per-N ensemble mean of both drifts and the strict-improvement flag."""
    out = {}
    for N in sorted({r.N for r in rows}):
        sel = [r for r in rows if r.N == N]
        out[N] = dict(
            modified_mean=float(np.mean([r.modified_drift for r in sel])),
            hs_mean=float(np.mean([r.hs_drift for r in sel])),
            strict=all(r.modified_drift < r.hs_drift for r in sel),
        )
    return out
