"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

from povmcoh import freeops, matops, measures, naimark, sdp, search
from povmcoh.cli import TABLE1, TABLE1_DELTAS, table1_values
from povmcoh.freeops import measurement_map
from povmcoh.measures import c_l1_povm, c_rel_povm, evaluate
from povmcoh.parallel import pmap, spawn_rngs
from povmcoh.quantum import DensityMatrix, Povm, edelta, haar_pure, hs_mixed, named_state, random_povm, trine
from povmcoh.randomness import cq_post_state, purify, randomness_rate

FOUR = ("rel", "l1", "rob", "geo")


@pytest.fixture
def verdict(capsys):
    def emit(num: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, detail

    return emit


def test_criterion_01_table(verdict):
    t0 = time.perf_counter()
    vals = table1_values()
    elapsed = time.perf_counter() - t0
    worst_nz, worst_zero = 0.0, 0.0
    for row, ref in TABLE1.items():
        for got, want in zip(vals[row], ref):
            if want == 0.0:
                worst_zero = max(worst_zero, abs(got))
            else:
                worst_nz = max(worst_nz, abs(got - want))
    ok = worst_nz <= 5e-4 and worst_zero <= 1e-8 and elapsed < 60
    verdict(1, "table reproduction", ok,
            f"max dev {worst_nz:.2e} (tol 5e-4), zeros {worst_zero:.1e} (tol 1e-8), {elapsed:.1f}s (< 60s)")


def test_criterion_02_endpoints(verdict):
    E0 = edelta(0.0)
    vals = {s: c_rel_povm(named_state(s), E0) for s in ("psi_x", "psi_y", "psi_z", "mixed")}
    ep = max(abs(vals["psi_x"] - 1), abs(vals["psi_z"] - 1), abs(vals["psi_y"]), abs(vals["mixed"]))
    mx = {d: search.extremal_coherence(edelta(d), "rel", "max").value for d in (0.5, 1.0)}
    mx_dev = max(abs(v - np.log2(3)) for v in mx.values())
    eig = {d: search.extremal_coherence(edelta(d), "rel", "min").state.eigvals().max() for d in (0.25, 0.5, 0.75)}
    ok = ep <= 1e-8 and mx_dev <= 0.01 and all(0.5 < e < 0.62 for e in eig.values())
    verdict(2, "sweep endpoints", ok,
            f"delta=0 dev {ep:.1e}; max dev from log2 3 {mx_dev:.1e}; "
            f"rho_min max eigenvalues {', '.join(f'{e:.4f}' for e in eig.values())}")


def test_criterion_03_randomness_identity(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst, worst_pur = 0.0, 0.0
    for k in range(200):
        d, n = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        rho = hs_mixed(d, rng) if k % 5 else haar_pure(d, rng)
        E = random_povm(d, n, rng)
        rate = randomness_rate(rho, E)
        worst = max(worst, abs(rate - c_rel_povm(rho, E)))
        psi = purify(rho)
        r = psi.size // d
        rates = []
        for _ in range(5):
            V = matops.random_unitary(r + int(rng.integers(0, 3)), rng)[:, :r]
            cq = cq_post_state(rho, E, purification=(psi.reshape(d, r) @ V.T).ravel())
            p = cq.probs[cq.probs > 0]
            cond = sum(q * measures.vn_entropy(s) for q, s in zip(cq.probs, cq.env_states) if s is not None)
            rates.append(-np.sum(p * np.log2(p)) + cond - measures.vn_entropy(cq.env_marginal))
        worst_pur = max(worst_pur, max(rates) - min(rates))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and worst_pur <= 1e-8 and elapsed < 120
    verdict(3, "randomness rate equals c_rel", ok,
            f"max |R - C_rel| {worst:.1e}; purification spread {worst_pur:.1e}; {elapsed:.1f}s (< 120s)")


def test_criterion_04_inequalities(verdict):
    E = trine()
    rng = np.random.default_rng(404)
    pure = [haar_pure(2, rng) for _ in range(500)]
    mixed = [hs_mixed(2, rng) for _ in range(500)]

    def vals(rho):
        return evaluate("rob", rho, E), c_l1_povm(rho, E), c_rel_povm(rho, E)

    pv = pmap(vals, pure)
    mv = pmap(vals, mixed)
    eq = max(abs(r - l) for r, l, _ in pv)
    bad = sum(1 for r, l, _ in pv if abs(r - l) > 1e-5)
    bad += sum(1 for r, l, c in mv if r > l + 1e-7 or l > 2 + 1e-8 or c > np.log2(1 + r) + 1e-7)
    verdict(4, "inequality chain on trine", bad == 0,
            f"pure max |rob - l1| {eq:.1e}; violations {bad} over 1000 states")


def test_criterion_05_sdp_certification(verdict):
    rng = np.random.default_rng(505)
    worst_gap, worst_weak, worst_wit = 0.0, -np.inf, 0.0
    for _ in range(100):
        d, n = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        rho, E = hs_mixed(d, rng), random_povm(d, n, rng)
        rep = measures.c_rob_povm(rho, E, form="both")
        primal, dual = rep.certificate["primal"], rep.certificate["dual"]
        worst_gap = max(worst_gap, abs(primal.primal_value - rep.certificate["dual_value"]))
        for sol in (primal, dual):
            worst_weak = max(worst_weak, sol.dual_value - sol.primal_value)
        worst_weak = max(worst_weak, rep.certificate["dual_value"] - primal.primal_value)
    for _ in range(100):
        d, n = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        psi, E = haar_pure(d, rng), random_povm(d, n, rng)
        _, value = measures.pure_dual_witness(psi, E)
        worst_wit = max(worst_wit, abs(value - c_l1_povm(psi, E)))
    ok = worst_gap <= 1e-6 and worst_weak <= 1e-9 and worst_wit <= 1e-9
    verdict(5, "robustness certificates", ok,
            f"primal/dual gap {worst_gap:.1e}; weak duality excess {worst_weak:.1e}; witness dev {worst_wit:.1e}")


def test_criterion_06_naimark_invariance(verdict):
    rng = np.random.default_rng(606)
    worst = 0.0
    for E in (trine(), edelta(0.5)):
        can = naimark.canonical_extension(E)
        exts = [can, naimark.pad_extension(can, 2),
                naimark.rotate_extension(can, matops.random_unitary(can.d_prime, rng))]
        for _ in range(10):
            rho = hs_mixed(2, rng)
            for m in FOUR:
                v = [measures.evaluate_block(m, naimark.embed(rho, e), e) for e in exts]
                worst = max(worst, max(v) - min(v))
    verdict(6, "extension independence", worst <= 1e-6, f"max spread {worst:.1e} (tol 1e-6)")


def test_criterion_07_relations_and_lifts(verdict):
    rng = np.random.default_rng(707)
    can = naimark.canonical_extension(trine())
    pairs = {"pad(2)": naimark.pad_extension(can, 2),
             "rotate": naimark.rotate_extension(can, matops.random_unitary(6, rng))}
    worst_rel, worst_lift = 0.0, 0.0
    families = ("pi_unitary", "pi_unitary_mixture(2)", "rejection_general(2)")
    for large in pairs.values():
        rel = naimark.relate_extensions(can, large, rng=rng, n_checks=20)
        worst_rel = max(worst_rel, max(rel.residuals.values()))
        for k in range(20):
            K = freeops.sample_dilated_pi(large, families[k % 3], rng)
            _, res = naimark.lift_kraus(rel, K, rng=rng)
            worst_lift = max(worst_lift, max(res.values()))
    ok = worst_rel <= 1e-8 and worst_lift <= 1e-8
    verdict(7, "extension relations and Kraus lifts", ok,
            f"relation residual {worst_rel:.1e}; lift residual {worst_lift:.1e} over 40 channels")


def test_criterion_08_monotonicity(verdict):
    E = trine()
    ext = naimark.canonical_extension(E)
    rng = np.random.default_rng(808)
    states = [hs_mixed(2, rng) for _ in range(20)]
    base = {m: [evaluate(m, s, E) for s in states] for m in ("rel", "rob", "geo")}
    families = ("pi_unitary", "pi_unitary_mixture(3)", "rejection_general(2)", "rejection_general(3)")

    def one(item):
        k, crng = item
        dil = freeops.sample_dilated_pi(ext, families[k % 4], crng)
        Ks = freeops.pi_kraus_from_naimark(dil, ext)
        strong = {"rel": np.inf, "rob": np.inf}
        for j, rho in enumerate(states):
            branches = freeops.apply_kraus_selective(rho, Ks)
            for m in strong:
                after = sum(p * evaluate(m, s, E) for p, s in branches)
                strong[m] = min(strong[m], base[m][j] - after)
        mpi = np.inf
        for j in range(2):
            out = freeops.apply_mpi(states[j], ext, dil, rng=crng)
            for m in ("rel", "rob", "geo"):
                mpi = min(mpi, base[m][j] - evaluate(m, out, E))
        return strong["rel"], strong["rob"], mpi

    res = pmap(one, list(enumerate(spawn_rngs(808, 100))))
    rel_m, rob_m, mpi_m = (min(r[i] for r in res) for i in range(3))
    ok = min(rel_m, rob_m, mpi_m) >= -1e-7
    verdict(8, "monotonicity under free operations", ok,
            f"min margins: strong rel {rel_m:.1e}, strong rob {rob_m:.1e}, MPI {mpi_m:.1e} "
            f"(100 channels x 20 states)")


def test_criterion_09_measurement_map(verdict):
    diffs = {}
    for delta in TABLE1_DELTAS:
        E = edelta(delta)
        rmin = search.extremal_coherence(E, "rel", "min")
        diffs[delta] = c_rel_povm(measurement_map(rmin.state, E), E) - rmin.value
    ok = all(diffs[d] >= 0.005 for d in (0.4, 0.5, 0.6)) and all(abs(diffs[d]) <= 1e-6 for d in (0.0, 1.0))
    verdict(9, "measurement map raises coherence", ok,
            ", ".join(f"delta={d:g}: {v:+.4f}" for d, v in diffs.items()))


def test_criterion_10_convexity_covariance(verdict):
    def one(rng):
        d = int(rng.integers(2, 4))
        E = trine() if d == 2 and rng.random() < 0.5 else random_povm(d, int(rng.integers(2, 4)), rng)
        rho, sigma = hs_mixed(d, rng), hs_mixed(d, rng)
        lam = float(rng.choice([0.25, 0.5, 0.75]))
        mix = DensityMatrix(lam * rho.mat + (1 - lam) * sigma.mat)
        G = matops.random_unitary(d, rng)
        rotE = Povm(tuple(G @ e @ G.conj().T for e in E.effects))
        rotrho = DensityMatrix(G @ rho.mat @ G.conj().T)
        conv, cov = -np.inf, 0.0
        for m in FOUR:
            a, b = evaluate(m, rho, E), evaluate(m, sigma, E)
            conv = max(conv, evaluate(m, mix, E) - lam * a - (1 - lam) * b)
            cov = max(cov, abs(evaluate(m, rotrho, rotE) - a))
        return conv, cov

    res = pmap(one, spawn_rngs(1010, 300))
    conv = max(r[0] for r in res)
    cov = max(r[1] for r in res[:100])
    bad = sum(r[0] > 1e-7 for r in res) + sum(r[1] > 1e-7 for r in res[:100])
    verdict(10, "convexity and covariance", bad == 0,
            f"worst convexity excess {conv:.1e}, worst covariance dev {cov:.1e}; violations {bad}")
