"""One test per acceptance criterion, each reporting a single PASS/FAIL line."""

import itertools
import math
import time

import numpy as np

from nf4nls.bitrees import (
    IndexMode,
    brute_force_index_functions,
    enumerate_index_functions,
    enumerate_ordered_bitrees,
)
from nf4nls.cli import main
from nf4nls.dynamics import (
    IntegratorConfig,
    integrate,
    random_initial_data,
    relative_drift,
    rhs_direct_oracle,
    rhs_interaction,
)
from nf4nls.energy import divisor_sum_diagnostic, drift_sweep, eval_N0, summarize_drift, telescoping_report
from nf4nls.gaussian import increment_variance, lil_breakdown_experiment, lil_target
from nf4nls.spectral import (
    Frame,
    PhaseTuple,
    SpectralField,
    phase_phi,
    phase_phi_array,
    phase_phi_factored_array,
)
from oracles import literal_N0


def exhaustive_tuples(bound=30):
    r = np.arange(-bound, bound + 1)
    n1, n2, n3 = (a.ravel() for a in np.meshgrid(r, r, r, indexing="ij"))
    n = n1 - n2 + n3
    keep = np.abs(n) <= bound
    return n1[keep], n2[keep], n3[keep], n[keep]


def test_phase_factorization(verdict):
    t0 = time.perf_counter()
    n1, n2, n3, n = exhaustive_tuples()
    bad = int(np.sum(phase_phi_array(n1, n2, n3, n) != phase_phi_factored_array(n1, n2, n3, n)))
    # spot-check the vectorised phase against exact Python integers
    idx = np.random.default_rng(0).choice(len(n), 2000, replace=False)
    bad += sum(phase_phi(PhaseTuple(n1[i], n2[i], n3[i], n[i])) != phase_phi_array(n1[i], n2[i], n3[i], n[i])
               for i in idx)
    dt = time.perf_counter() - t0
    verdict("phase factorization", bad == 0 and dt < 5, f"{len(n)} tuples, {bad} failures, {dt:.2f} s")


def test_nonresonance(verdict):
    n1, n2, n3, n = exhaustive_tuples()
    sel = (n1 != n) & (n3 != n)
    phi = phase_phi_array(n1[sel], n2[sel], n3[sel], n[sel])
    bad = int(np.sum(np.abs(phi) < 1))
    verdict("non-resonance on Gamma(n)", bad == 0, f"{int(sel.sum())} tuples, {bad} with |phi| < 1")


def test_bitree_cardinality(verdict):
    t0 = time.perf_counter()
    counts = [len(enumerate_ordered_bitrees(J)) for J in range(1, 7)]
    dt = time.perf_counter() - t0
    ok = counts == [1, 4, 24, 192, 1920, 23040] and dt < 10
    verdict("bi-tree cardinality", ok, f"counts {counts}, {dt:.2f} s")


def test_index_function_correctness(verdict):
    cases = bad = 0
    for J, N, r in itertools.product((1, 2), (1, 2, 3), range(-3, 4)):
        for tree in enumerate_ordered_bitrees(J):
            fast = sorted(enumerate_index_functions(tree, N, IndexMode.UNRESTRICTED, r, N))
            bad += fast != sorted(brute_force_index_functions(tree, N, r))
            cases += 1
    verdict("index-function enumeration", bad == 0, f"{cases} (tree, N, root) cases, {bad} mismatches")


def test_rhs_oracle_equivalence(verdict):
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in range(100):
        N = 1 + k % 8
        v = SpectralField(Frame.INTERACTION_V, N, rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1))
        t = rng.uniform(0, 2 * math.pi)
        a, b = rhs_interaction(v, t).coeffs, rhs_direct_oracle(v, t).coeffs
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    verdict("RHS oracle equivalence", worst <= 1e-10, f"100 fields, max relative difference {worst:.2e}")


def test_conservation(verdict):
    t0 = time.perf_counter()
    v0 = random_initial_data(32, 5.0, 0)
    traj = integrate(v0, IntegratorConfig(32, 1e-4, 1.0, record_every=100))
    dm = relative_drift(traj.diagnostics["mass"])
    dh = relative_drift(traj.diagnostics["hamiltonian"])
    dt = time.perf_counter() - t0
    ok = dm <= 1e-8 and dh <= 1e-6 and dt < 120
    verdict("conservation N=32", ok, f"mass drift {dm:.2e}, Hamiltonian drift {dh:.2e}, {dt:.1f} s")


def test_correction_term_oracle(verdict):
    rng = np.random.default_rng(12)
    worst = 0.0
    for k in range(50):
        N = 1 + k % 4
        v = rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1)
        t, s = rng.uniform(0, 2), rng.uniform(0.5, 1.0)
        a, b = eval_N0(v, t, 2, N, s), literal_N0(v, t, N, s)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    verdict("N0 oracle", worst <= 1e-12, f"50 fields, max relative difference {worst:.2e}")


def test_telescoping_identity(verdict):
    v0 = random_initial_data(4, 0.6, 0)
    traj = integrate(v0, IntegratorConfig(4, 1e-4, 0.004))
    reps = {J: telescoping_report(traj, 0.6, J, 4, stride=10) for J in (1, 2, 3)}
    mismatch = float(np.max(reps[2].mismatch))
    maxres = [float(np.max(np.abs(reps[J].residual))) for J in (1, 2, 3)]
    ok = mismatch <= 1e-4 and maxres[0] >= maxres[1] >= maxres[2]
    verdict("telescoping identity", ok,
            f"J=2 mismatch {mismatch:.2e}; max residual J=1,2,3: {', '.join(f'{x:.2e}' for x in maxres)}")


def test_improved_energy_bound(verdict):
    rows = drift_sweep(Ns=(2, 4, 6, 8), s=0.6, J_max=1, seed=0, samples=12)
    summary = summarize_drift(rows)
    means = [summary[N]["modified_mean"] for N in (2, 4, 6, 8)]
    spread = max(means) / min(means)
    strict = all(summary[N]["strict"] for N in summary)
    raw = [summary[N]["hs_mean"] for N in (2, 4, 6, 8)]
    detail = (f"modified means {', '.join(f'{m:.4f}' for m in means)} (spread {spread:.2f}); "
              f"unmodified means {', '.join(f'{m:.3f}' for m in raw)}; "
              f"strict on all {len(rows)} samples: {strict}")
    verdict("improved energy bound", spread <= 2 and strict, detail)


def test_divisor_sum_diagnostic(verdict):
    a, b = divisor_sum_diagnostic(0.6, 128), divisor_sum_diagnostic(0.6, 256)
    rel = abs(b - a) / abs(b)
    verdict("divisor-sum stabilization", rel < 0.05, f"sup {a:.6f} at 128, {b:.6f} at 256, change {rel:.1e}")


def test_increment_variance(verdict):
    ratios = [increment_variance(1.5, 2.0**-k, 2**18) / (4.0**-k * math.log(2.0**k)) for k in range(6, 15)]
    var = (max(ratios) - min(ratios)) / min(ratios)
    verdict("increment variance s=3/2", var < 0.10, f"ratio in [{min(ratios):.3f}, {max(ratios):.3f}], variation {var:.1%}")


def test_lil_breakdown(verdict):
    t0 = time.perf_counter()
    rep = lil_breakdown_experiment(1.0, 1.0, lil_target(3), 0.3, 100000, seed=2024, max_conditioned=30)
    dt = time.perf_counter() - t0
    ok = rep.n_conditioned >= 30 and rep.p_value < 0.05 and dt < 600
    verdict("LIL breakdown", ok,
            f"{rep.n_conditioned} conditioned of {rep.draws} draws, p = {rep.p_value:.2e}, "
            f"exceeding fraction {rep.fraction_exceeding:.2f} vs baseline {rep.baseline_fraction:.2f}, {dt:.0f} s")


def test_determinism(verdict, tmp_path):
    commands = {
        "simulate": ["--n", "6", "--t-final", "0.02", "--record-every", "50"],
        "energy": ["--n", "3", "--t-final", "0.003", "--samples", "1", "--sweep-n", "2,3"],
        "bitree": ["--jmax", "4"],
        "lil": ["--n-samp", "4096", "--k-max", "16", "--k", "1", "--eps", "0.5", "--samples", "2000",
                "--max-conditioned", "3", "--baseline", "4"],
        "sample": ["--n", "64", "--samples", "2"],
        "check": ["--only", "phase_factorization,bitree_counts,rhs_oracle,N0_oracle"],
    }
    differing = []
    files = 0
    for cmd, flags in commands.items():
        for rep in ("a", "b"):
            code = main([cmd, *flags, "--seed", "7", "--out", str(tmp_path / rep / cmd)])
            assert code == 0, f"{cmd} exited {code}"
        for path in sorted((tmp_path / "a" / cmd).glob("*.csv")):
            files += 1
            if path.read_bytes() != (tmp_path / "b" / cmd / path.name).read_bytes():
                differing.append(f"{cmd}/{path.name}")
    verdict("determinism", not differing and files >= 12, f"{files} CSV files compared, differing: {differing or 'none'}")
