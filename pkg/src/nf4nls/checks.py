"""Property suite behind `nf4nls check`, plus the literal-sum oracles it uses."""

import math

import numpy as np

from . import bitrees
from .bitrees import (
    IndexMode,
    brute_force_index_functions,
    count_ordered_bitrees,
    enumerate_index_functions,
    enumerate_ordered_bitrees,
)
from .dynamics import (
    IntegratorConfig,
    integrate,
    random_initial_data,
    relative_drift,
    rhs_direct_oracle,
    rhs_interaction,
)
from .energy import divisor_count, eval_N0, telescoping_report
from .gaussian import flow_values
from .spectral import (
    Frame,
    SpectralField,
    japanese_bracket,
    phase_phi_array,
    phase_phi_factored_array,
)


def consistent_tuples(bound):
    """All (n1, n2, n3, n) with n = n1 - n2 + n3 and every entry in [-bound, bound]."""
    r = np.arange(-bound, bound + 1, dtype=np.int64)
    n1, n2, n3 = (a.ravel() for a in np.meshgrid(r, r, r, indexing="ij"))
    n = n1 - n2 + n3
    keep = np.abs(n) <= bound
    return n1[keep], n2[keep], n3[keep], n[keep]


def literal_N0_pair(v, t, s):
    """Quadruple sum of e^{-i phi t} / phi <n>^{2s} v_{n1} conj(v_{n2}) v_{n3} conj(v_n) over Gamma_N(n), real part."""
    N = (len(v) - 1) // 2
    acc = 0j
    for n in range(-N, N + 1):
        for n1 in range(-N, N + 1):
            for n3 in range(-N, N + 1):
                n2 = n1 + n3 - n
                if abs(n2) > N or n1 == n or n3 == n:
                    continue
                phi = n1**4 - n2**4 + n3**4 - n**4
                acc += (np.exp(-1j * phi * t) / phi * (1 + n * n) ** s
                        * v[n1 + N] * np.conj(v[n2 + N]) * v[n3 + N] * np.conj(v[n + N]))
    return acc.real


def _random_coeffs(rng, N):
    return rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1)


def check_phase_factorization(bound=30):
    n1, n2, n3, n = consistent_tuples(bound)
    bad = int(np.sum(phase_phi_array(n1, n2, n3, n) != phase_phi_factored_array(n1, n2, n3, n)))
    return bad == 0, f"{len(n)} tuples, {bad} mismatches"


def check_nonresonance(bound=30):
    n1, n2, n3, n = consistent_tuples(bound)
    sel = (n1 != n) & (n3 != n)
    phi = phase_phi_array(n1[sel], n2[sel], n3[sel], n[sel])
    bad = int(np.sum(np.abs(phi) < 1))
    return bad == 0, f"{int(sel.sum())} tuples in Gamma(n), {bad} with |phi| < 1"


def check_bitree_counts(J_max=6):
    got = [len(enumerate_ordered_bitrees(J)) for J in range(1, J_max + 1)]
    want = [count_ordered_bitrees(J) for J in range(1, J_max + 1)]
    return got == want, f"enumerated {got}"


def check_index_functions(J_max=2, N_max=2):
    cases = 0
    for J in range(1, J_max + 1):
        for tree in enumerate_ordered_bitrees(J):
            for N in range(1, N_max + 1):
                for root in range(-N, N + 1):
                    got = sum(1 for _ in enumerate_index_functions(tree, N, IndexMode.UNRESTRICTED, root, N))
                    if got != len(brute_force_index_functions(tree, N, root)):
                        return False, f"count mismatch J={J} N={N} root={root}"
                    cases += 1
    return True, f"{cases} (tree, N, root) cases agree with brute force"


def check_rhs_oracle(trials=20, N_max=6, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        N = 1 + k % N_max
        v = SpectralField(Frame.INTERACTION_V, N, _random_coeffs(rng, N))
        t = rng.uniform(0, 2)
        a = rhs_interaction(v, t).coeffs
        b = rhs_direct_oracle(v, t).coeffs
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    return worst <= 1e-10, f"max relative difference {worst:.2e}"


def check_conservation(N=16, dt=1e-4, t_final=0.1, s_data=5.0, seed=0):
    v0 = random_initial_data(N, s_data, seed)
    traj = integrate(v0, IntegratorConfig(N, dt, t_final, record_every=50))
    dm = relative_drift(traj.diagnostics["mass"])
    dh = relative_drift(traj.diagnostics["hamiltonian"])
    return dm <= 1e-8 and dh <= 1e-6, f"mass drift {dm:.2e}, Hamiltonian drift {dh:.2e}"


def check_N0_oracle(trials=10, s=0.6, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        N = 2 + k % 2
        v = _random_coeffs(rng, N)
        t = rng.uniform(0, 1)
        a = eval_N0(v, t, 2, N, s)
        b = literal_N0_pair(v, t, s)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst <= 1e-12, f"max relative difference {worst:.2e}"


def check_gauge_consistency(N=3, J=2, s=0.6, seed=0):
    rng = np.random.default_rng(seed)
    v = _random_coeffs(rng, N)
    t = 0.37
    w = np.exp(-1j * np.arange(-N, N + 1, dtype=float) ** 4 * t) * v
    worst = 0.0
    for j in range(2, J + 2):
        a = eval_N0(v, t, j, N, s)
        b = eval_N0(w, 0.0, j, N, s)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    return worst <= 1e-12, f"max relative difference {worst:.2e}"


def check_telescoping(N=4, J=2, s=0.6, dt=1e-4, t_final=0.004, seed=0, tol=1e-4):
    v0 = random_initial_data(N, s, seed)
    traj = integrate(v0, IntegratorConfig(N, dt, t_final))
    reps = {j: telescoping_report(traj, s, j, N, stride=10) for j in range(1, J + 1)}
    mismatch = float(np.max(reps[J].mismatch))
    maxres = [float(np.max(np.abs(reps[j].residual))) for j in range(1, J + 1)]
    decreasing = all(a >= b for a, b in zip(maxres, maxres[1:]))
    ok = mismatch <= tol and decreasing
    return ok, f"|FD residual - remainder| <= {mismatch:.2e}; max residual by J {['%.2e' % x for x in maxres]}"


def check_divisors(n_max=2000):
    for n in range(1, n_max + 1):
        if divisor_count(n) != sum(1 for k in range(1, n + 1) if n % k == 0):
            return False, f"d({n}) wrong"
    return True, f"d(n) matches trial division for n <= {n_max}"


def check_dispersionless_modulus(seed=0):
    rng = np.random.default_rng(seed)
    u = _random_coeffs(rng, 2000)
    w = flow_values(u, 1.7)
    err = float(np.max(np.abs(np.abs(w) - np.abs(u))))
    return err <= 1e-14 * max(1.0, float(np.max(np.abs(u)))), f"max modulus change {err:.1e}"


CHECKS = [
    ("phase_factorization", check_phase_factorization),
    ("nonresonance", check_nonresonance),
    ("bitree_counts", check_bitree_counts),
    ("index_functions", check_index_functions),
    ("rhs_oracle", check_rhs_oracle),
    ("conservation", check_conservation),
    ("N0_oracle", check_N0_oracle),
    ("gauge_consistency", check_gauge_consistency),
    ("telescoping", check_telescoping),
    ("divisor_count", check_divisors),
    ("dispersionless_modulus", check_dispersionless_modulus),
]


def run_checks(names=None):
    """Run the suite; returns a list of (name, passed, detail).  Exceptions count as failures."""
    out = []
    for name, fn in CHECKS:
        if names and name not in names:
            continue
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
