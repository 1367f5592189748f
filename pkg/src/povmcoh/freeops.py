"""Free operations for POVM coherence.

Kraus operators on the dilated space are screened for block incoherence
(each block is mapped into a single block) and subspace preservation (the
embedded image ``im W`` is invariant). Their compressions ``W^dag K W`` are
the POVM-incoherent Kraus operators on the original space.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import measures, matops
from .errors import (
    DegenerateFamily,
    DimMismatch,
    NotBlockIncoherent,
    NotComplete,
    NotEmbeddedPreserving,
    NotMbi,
    NotSubspacePreserving,
    SamplerExhausted,
)
from .matops import dag
from .naimark import NaimarkExt, block_dephase, embed, random_block_diagonal_state
from .quantum import PROB_FLOOR, DensityMatrix, Povm, as_density, hs_mixed

STRUCT_TOL = 1e-9
COMPLETE_TOL = 1e-8
MAX_ATTEMPTS = 100


@dataclass
class KrausSet:
    ops: tuple
    space: str = "original"
    ext: NaimarkExt | None = None
    flags: dict = field(default_factory=lambda: {
        "complete": False, "block_incoherent": False, "subspace_preserving": False, "strictly": False})
    index_maps: list | None = None

    def __post_init__(self):
        ops = tuple(matops.as_matrix(K, "Kraus operator") for K in self.ops)
        if not ops:
            raise DimMismatch("empty Kraus set")
        if len({K.shape for K in ops}) != 1 or ops[0].shape[0] != ops[0].shape[1]:
            raise DimMismatch("Kraus operators must be square and share one shape")
        if self.space not in ("original", "dilated"):
            raise ValueError(f"unknown space {self.space!r}")
        self.ops = ops

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def completeness_residual(self) -> float:
        return completeness_residual(self.ops)

    def apply(self, M) -> np.ndarray:
        return sum(K @ M @ dag(K) for K in self.ops)

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "ops": [matops.matrix_to_json(K) for K in self.ops],
            "flags": dict(self.flags),
        }

    @classmethod
    def from_json(cls, obj) -> "KrausSet":
        ops = [matops.matrix_from_json(m) for m in obj["ops"]]
        ks = cls(tuple(ops), space=obj.get("space", "original"))
        # Flags are never trusted from input; only completeness is re-derived here.
        ks.flags["complete"] = ks.completeness_residual() <= COMPLETE_TOL
        return ks


def completeness_residual(ops) -> float:
    d = ops[0].shape[1]
    return float(np.linalg.norm(sum(dag(K) @ K for K in ops) - np.eye(d)))


def _check_dilated(K, ext: NaimarkExt) -> np.ndarray:
    K = matops.as_matrix(K, "Kraus operator")
    if K.shape != (ext.d_prime, ext.d_prime):
        raise DimMismatch(f"operator {K.shape} does not act on d'={ext.d_prime}")
    return K


def check_block_incoherent(K, ext: NaimarkExt) -> tuple[bool, dict]:
    """Structural test: every source block feeds at most one target block.

    Returns ``(ok, f)`` with ``f[i]`` the target of each block ``i`` on which
    ``K`` is nonzero.
    """
    K = _check_dilated(K, ext)
    tol = STRUCT_TOL * max(1.0, np.linalg.norm(K))
    f = {}
    ok = True
    for i, Bi in enumerate(ext.bases):
        targets = [j for j, Bj in enumerate(ext.bases) if np.linalg.norm(dag(Bj) @ K @ Bi) > tol]
        if len(targets) > 1:
            ok = False
        elif targets:
            f[i] = targets[0]
    return ok, f


def check_subspace_preserving(K, ext: NaimarkExt) -> bool:
    """``(1 - Pi) K Pi = 0`` with ``Pi = W W^dag``."""
    K = _check_dilated(K, ext)
    Pi = ext.W @ dag(ext.W)
    return bool(np.linalg.norm((np.eye(ext.d_prime) - Pi) @ K @ Pi) <= STRUCT_TOL * max(1.0, np.linalg.norm(K)))


def pi_kraus_from_naimark(Ks: KrausSet, ext: NaimarkExt) -> KrausSet:
    """Compress a validated dilated BI+SP Kraus set to the original space."""
    maps = []
    for l, K in enumerate(Ks.ops):
        ok, f = check_block_incoherent(K, ext)
        if not ok:
            raise NotBlockIncoherent(f"Kraus operator {l} is not block-incoherent", index=l)
        if not check_subspace_preserving(K, ext):
            raise NotSubspacePreserving(f"Kraus operator {l} is not subspace-preserving", index=l)
        maps.append(f)
    res = completeness_residual(Ks.ops)
    if res > COMPLETE_TOL:
        raise NotComplete(f"dilated Kraus set incomplete, residual {res:.3e}")
    strictly = all(check_block_incoherent(dag(K), ext)[0] and check_subspace_preserving(dag(K), ext)
                   for K in Ks.ops)
    Ks.flags.update(complete=True, block_incoherent=True, subspace_preserving=True, strictly=strictly)
    Ks.index_maps = maps
    small = tuple(dag(ext.W) @ K @ ext.W for K in Ks.ops)
    res = completeness_residual(small)
    if res > COMPLETE_TOL:
        raise NotComplete(f"compressed Kraus set incomplete, residual {res:.3e}")
    flags = {"complete": True, "block_incoherent": True, "subspace_preserving": True, "strictly": strictly}
    return KrausSet(small, space="original", ext=ext, flags=flags, index_maps=maps)


# ---------------------------------------------------------------- samplers


def _structured_subspace(ext: NaimarkExt, perm) -> list[np.ndarray]:
    """Real basis of ``{K = sum_i P_perm(i) C_i P_i} cap {K Pi = Pi K}``."""
    B = ext.bases
    Pi = ext.W @ dag(ext.W)
    gens = []
    for i, Bi in enumerate(B):
        Bj = B[perm[i]]
        for a in range(Bj.shape[1]):
            for b in range(Bi.shape[1]):
                E = np.outer(Bj[:, a], Bi[:, b].conj())
                gens += [E, 1j * E]
    if not gens:
        return []
    comm = np.array([np.concatenate([(G @ Pi - Pi @ G).real.ravel(), (G @ Pi - Pi @ G).imag.ravel()])
                     for G in gens]).T
    null = scipy.linalg.null_space(comm, rcond=1e-10)
    return [np.tensordot(null[:, k], np.array(gens), axes=1) for k in range(null.shape[1])]


def _random_in(basis, rng) -> np.ndarray:
    c = rng.standard_normal(len(basis))
    return np.tensordot(c, np.array(basis), axes=1)


def _hermitian_generator(ext: NaimarkExt, rng) -> np.ndarray:
    basis = _structured_subspace(ext, list(range(ext.n)))
    if len(basis) <= 2:
        raise DegenerateFamily(f"only scalar PI unitaries exist for extension {ext.kind}")
    H = matops.hermitian_part(_random_in(basis, rng))
    return H / max(1.0, np.linalg.norm(H, 2)) * np.pi


def _pi_unitary_dilated(ext: NaimarkExt, rng) -> np.ndarray:
    return scipy.linalg.expm(1j * _hermitian_generator(ext, rng))


def parse_family(family: str, k: int | None = None) -> tuple[str, int]:
    m = re.fullmatch(r"\s*([a-z_]+)\s*(?:\(\s*(\d+)\s*\))?\s*", family)
    if not m or m.group(1) not in ("pi_unitary", "pi_unitary_mixture", "rejection_general"):
        raise ValueError(f"unknown PI family {family!r}")
    name = m.group(1)
    if m.group(2) is not None:
        k = int(m.group(2))
    if name == "pi_unitary":
        k = 1
    if k is None or k < 1:
        raise ValueError(f"family {name} needs a positive operator count")
    return name, k


def sample_dilated_pi(ext: NaimarkExt, family: str, rng: np.random.Generator, k: int | None = None) -> KrausSet:
    """Sample a complete, strictly BI+SP Kraus set on the dilated space.

    ``rejection_general`` draws each operator from the linear space of
    block-permuting operators (random permutation, the first one fixed to the
    identity) that commute with ``Pi``. Right normalisation by ``G^{-1/2}``
    keeps both properties since ``G`` is block diagonal and commutes with
    ``Pi``; every output is nevertheless re-checked and rejected on failure.
    """
    name, k = parse_family(family, k)
    if name == "pi_unitary":
        ops = (_pi_unitary_dilated(ext, rng),)
    elif name == "pi_unitary_mixture":
        q = rng.dirichlet(np.ones(k))
        ops = tuple(np.sqrt(ql) * _pi_unitary_dilated(ext, rng) for ql in q)
    else:
        ops = None
        for _ in range(MAX_ATTEMPTS):
            cand = []
            for l in range(k):
                perm = list(range(ext.n)) if l == 0 else list(rng.permutation(ext.n))
                basis = _structured_subspace(ext, perm)
                if not basis:
                    basis = _structured_subspace(ext, list(range(ext.n)))
                cand.append(_random_in(basis, rng))
            G = sum(dag(K) @ K for K in cand)
            if np.linalg.eigvalsh(matops.hermitian_part(G))[0] < 1e-8:
                continue
            Gm = matops.psd_func(G, "power", -0.5)
            cand = [K @ Gm for K in cand]
            if completeness_residual(cand) > 1e-10:
                continue
            if all(check_block_incoherent(K, ext)[0] and check_subspace_preserving(K, ext) for K in cand):
                ops = tuple(cand)
                break
        if ops is None:
            raise SamplerExhausted(f"no valid {k}-operator set after {MAX_ATTEMPTS} attempts")
    return KrausSet(ops, space="dilated", ext=ext)


def sample_pi_channel(ext: NaimarkExt, family: str, rng: np.random.Generator, k: int | None = None) -> KrausSet:
    """PI Kraus set on the original space, validated through the dilated checks."""
    return pi_kraus_from_naimark(sample_dilated_pi(ext, family, rng, k), ext)


def dephasing_kraus(ext: NaimarkExt) -> KrausSet:
    return KrausSet(tuple(ext.projectors), space="dilated", ext=ext)


def identity_kraus(d: int) -> KrausSet:
    flags = {"complete": True, "block_incoherent": True, "subspace_preserving": True, "strictly": True}
    return KrausSet((np.eye(d, dtype=complex),), flags=flags)


# ---------------------------------------------------------------- application


def apply_kraus_selective(rho, Ks: KrausSet) -> list[tuple[float, DensityMatrix]]:
    rho = as_density(rho)
    if rho.dim != Ks.dim:
        raise DimMismatch(f"state dim {rho.dim} vs Kraus dim {Ks.dim}")
    res = Ks.completeness_residual()
    if res > COMPLETE_TOL:
        raise NotComplete(f"Kraus set incomplete, residual {res:.3e}")
    out = []
    for K in Ks.ops:
        M = K @ rho.mat @ dag(K)
        p = float(np.trace(M).real)
        if p >= PROB_FLOOR:
            out.append((p, DensityMatrix.normalized(M)))
    return out


def measurement_map(rho, E: Povm) -> DensityMatrix:
    """``sum_i sqrt(E_i) rho sqrt(E_i)``."""
    rho = as_density(rho)
    if rho.dim != E.dim:
        raise DimMismatch(f"state dim {rho.dim} vs POVM dim {E.dim}")
    return DensityMatrix.normalized(sum(A @ rho.mat @ dag(A) for A in E.meas_ops))


def apply_mpi(rho, ext: NaimarkExt, Lam_big: KrausSet, rng: np.random.Generator | None = None,
              n_checks: int = 20) -> DensityMatrix:
    """``W^dag Lam[W rho W^dag] W`` after sampled checks of the two preconditions."""
    rho = as_density(rho)
    if rho.dim != ext.d or Lam_big.dim != ext.d_prime:
        raise DimMismatch("state, channel and extension dimensions disagree")
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(n_checks):
        out = Lam_big.apply(random_block_diagonal_state(ext, rng))
        r = np.linalg.norm(out - block_dephase(out, ext))
        if r > 1e-8:
            raise NotMbi(f"block-diagonal input acquired coherence {r:.3e}")
    Pi = ext.W @ dag(ext.W)
    Pc = np.eye(ext.d_prime) - Pi
    for _ in range(n_checks):
        out = Lam_big.apply(embed(hs_mixed(ext.d, rng), ext))
        r = max(np.linalg.norm(Pc @ out @ Pc), np.linalg.norm(Pc @ out @ Pi))
        if r > 1e-8:
            raise NotEmbeddedPreserving(f"embedded set left by {r:.3e}")
    out = Lam_big.apply(embed(rho, ext))
    return DensityMatrix.normalized(dag(ext.W) @ out @ ext.W)


def check_strong_monotonicity(measure: str, rho, Ks: KrausSet, E: Povm) -> float:
    """``C(rho) - sum_l p_l C(rho_l)`` for a selective PI operation."""
    before = measures.evaluate(measure, rho, E)
    after = sum(p * measures.evaluate(measure, s, E) for p, s in apply_kraus_selective(rho, Ks))
    return before - after
