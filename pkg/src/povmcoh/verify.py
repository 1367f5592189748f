"""Randomised invariant suites reporting counts and worst margins.

A check records ``excess = lhs - rhs`` for an inequality ``lhs <= rhs + tol``;
it is violated when ``excess > tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import freeops, matops, measures, naimark
from .parallel import pmap, spawn_rngs
from .quantum import DensityMatrix, Povm, edelta, haar_pure, hs_mixed, random_povm, trine
from .randomness import randomness_rate

SUITES = ("inequalities", "monotonicity", "naimark-invariance", "extension-relations", "randomness", "convexity")
ALIASES = {"appendix-a": "extension-relations"}
FOUR = ("rel", "l1", "rob", "geo")


@dataclass
class Check:
    name: str
    tol: float
    count: int = 0
    worst: float = -np.inf
    violations: int = 0
    record_only: bool = False

    def add(self, excess: float):
        self.count += 1
        self.worst = max(self.worst, float(excess))
        if not self.record_only and excess > self.tol:
            self.violations += 1


@dataclass
class SuiteReport:
    suite: str
    checks: dict = field(default_factory=dict)

    def check(self, name: str, tol: float, record_only: bool = False) -> Check:
        if name not in self.checks:
            self.checks[name] = Check(name, tol, record_only=record_only)
        return self.checks[name]

    @property
    def clean(self) -> bool:
        return all(c.violations == 0 for c in self.checks.values())

    def first_failure(self) -> str | None:
        for c in self.checks.values():
            if c.violations:
                return c.name
        return None

    def lines(self) -> list[str]:
        out = [f"suite {self.suite}"]
        for c in self.checks.values():
            tag = " (recorded only)" if c.record_only else ""
            out.append(f"  {c.name}: checks={c.count} violations={c.violations} "
                       f"worst_excess={c.worst:.3e} tol={c.tol:.1e}{tag}")
        out.append(f"  result: {'CLEAN' if self.clean else 'FAIL ' + str(self.first_failure())}")
        return out


def _value(name: str, rho, E: Povm) -> float:
    return measures.evaluate(name, rho, E, form="primal")


def inequalities(samples: int, seed: int, E: Povm | None = None) -> SuiteReport:
    E = trine() if E is None else E
    rep = SuiteReport("inequalities")
    rng = np.random.default_rng(seed)
    pure = [haar_pure(E.dim, rng) for _ in range(samples)]
    mixed = [hs_mixed(E.dim, rng) for _ in range(samples)]

    def vals(rho):
        return (measures.c_rob_povm(rho, E, form="primal").value, measures.c_l1_povm(rho, E),
                measures.c_rel_povm(rho, E))

    n = E.n_outcomes
    for rob, l1, rel in pmap(vals, pure):
        rep.check("pure |rob - l1|", 1e-5).add(abs(rob - l1))
    for rob, l1, rel in pmap(vals, mixed):
        rep.check("rob <= l1", 1e-7).add(rob - l1)
        rep.check("l1 <= n-1", 1e-8).add(l1 - (n - 1))
        rep.check("rel <= log2(1+rob)", 1e-7).add(rel - np.log2(1.0 + rob))
    return rep


def monotonicity(samples: int, seed: int, E: Povm | None = None, n_states: int = 20) -> SuiteReport:
    """Selective PI monotonicity on ``samples`` channels and MPI monotonicity."""
    E = trine() if E is None else E
    ext = naimark.canonical_extension(E)
    rep = SuiteReport("monotonicity")
    rng = np.random.default_rng(seed)
    states = [hs_mixed(E.dim, rng) for _ in range(n_states)]
    base = {m: [_value(m, s, E) for s in states] for m in ("rel", "rob", "l1", "geo")}

    def one(crng):
        fam = ("rejection_general", "pi_unitary_mixture")[int(crng.integers(0, 2))]
        dil = freeops.sample_dilated_pi(ext, fam, crng, k=int(crng.integers(2, 4)))
        Ks = freeops.pi_kraus_from_naimark(dil, ext)
        out = []
        for k, rho in enumerate(states):
            branches = freeops.apply_kraus_selective(rho, Ks)
            for m in ("rel", "rob", "l1"):
                after = sum(p * _value(m, s, E) for p, s in branches)
                out.append((f"strong {m}", base[m][k] - after))
        for k, rho in enumerate(states[:5]):
            img = freeops.apply_mpi(rho, ext, dil, rng=crng)
            for m in ("rel", "rob", "geo"):
                out.append((f"mpi {m}", base[m][k] - _value(m, img, E)))
        return out

    for res in pmap(one, spawn_rngs(seed, samples)):
        for name, margin in res:
            rep.check(f"{name} margin >= 0", 1e-7, record_only=name == "strong l1").add(-margin)
    return rep


def naimark_invariance(samples: int, seed: int) -> SuiteReport:
    rep = SuiteReport("naimark-invariance")
    rng = np.random.default_rng(seed)
    for label, E in (("trine", trine()), ("edelta:0.5", edelta(0.5))):
        can = naimark.canonical_extension(E)
        exts = [can, naimark.pad_extension(can, 2),
                naimark.rotate_extension(can, matops.random_unitary(can.d_prime, rng))]
        states = [hs_mixed(E.dim, rng) for _ in range(samples)]

        def one(rho):
            return {m: [measures.evaluate_block(m, naimark.embed(rho, e), e) for e in exts] for m in FOUR}

        for vals in pmap(one, states):
            for m, v in vals.items():
                rep.check(f"{label} {m} spread", 1e-6).add(max(v) - min(v))
    return rep


def extension_relations(samples: int, seed: int) -> SuiteReport:
    rep = SuiteReport("extension-relations")
    rng = np.random.default_rng(seed)
    E = trine()
    can = naimark.canonical_extension(E)
    G = matops.random_unitary(can.d_prime, rng)
    for label, large in (("pad(2)", naimark.pad_extension(can, 2)), ("rotate", naimark.rotate_extension(can, G))):
        rel = naimark.relate_extensions(can, large, rng=rng, n_checks=20)
        for key, r in rel.residuals.items():
            rep.check(f"{label} relation {key}", 1e-8).add(r)
        for crng in spawn_rngs(rng.integers(2**63), samples):
            fam = ("pi_unitary", "pi_unitary_mixture", "rejection_general")[int(crng.integers(0, 3))]
            K = freeops.sample_dilated_pi(large, fam, crng, k=2)
            _, res = naimark.lift_kraus(rel, K, rng=crng)
            for prop, r in res.items():
                rep.check(f"{label} lift ({prop})", 1e-8).add(r)
    return rep


def randomness(samples: int, seed: int) -> SuiteReport:
    rep = SuiteReport("randomness")
    rngs = spawn_rngs(seed, samples)

    def one(rng):
        d = int(rng.integers(2, 4))
        n = int(rng.integers(2, 5))
        rho = hs_mixed(d, rng)
        E = random_povm(d, n, rng)
        return abs(randomness_rate(rho, E, test_mode=True, rng=rng) - measures.c_rel_povm(rho, E))

    for diff in pmap(one, rngs):
        rep.check("|rate - c_rel|", 1e-8).add(diff)
    return rep


def convexity(samples: int, seed: int) -> SuiteReport:
    """Convexity over mixture triples and joint unitary covariance."""
    rep = SuiteReport("convexity")
    rngs = spawn_rngs(seed, samples)

    def one(rng):
        d = int(rng.integers(2, 4))
        E = trine() if d == 2 and rng.random() < 0.5 else random_povm(d, int(rng.integers(2, 4)), rng)
        rho, sigma = hs_mixed(d, rng), hs_mixed(d, rng)
        lam = float(rng.choice([0.25, 0.5, 0.75]))
        mix = DensityMatrix(lam * rho.mat + (1 - lam) * sigma.mat)
        G = matops.random_unitary(d, rng)
        rotE = Povm(tuple(G @ e @ G.conj().T for e in E.effects))
        rotrho = DensityMatrix(G @ rho.mat @ G.conj().T)
        out = []
        for m in FOUR:
            a, b, c = _value(m, rho, E), _value(m, sigma, E), _value(m, mix, E)
            out.append((f"convex {m}", c - lam * a - (1 - lam) * b))
            out.append((f"covariant {m}", abs(_value(m, rotrho, rotE) - a)))
        return out

    for res in pmap(one, rngs):
        for name, excess in res:
            rep.check(name, 1e-7).add(excess)
    return rep


def run_suite(suite: str, samples: int, seed: int) -> SuiteReport:
    fns = {
        "inequalities": inequalities,
        "monotonicity": monotonicity,
        "naimark-invariance": naimark_invariance,
        "extension-relations": extension_relations,
        "randomness": randomness,
        "convexity": convexity,
    }
    suite = ALIASES.get(suite, suite)
    if suite not in fns:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return fns[suite](samples, seed)
