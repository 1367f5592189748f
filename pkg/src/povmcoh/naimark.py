"""Naimark extensions of POVMs and the channels relating two extensions.

An extension is stored as an embedding isometry ``W`` (original space into
the dilated space) together with orthogonal projectors ``P_i`` such that
``W^dag P_i W = E_i``. Block dephasing, embedded states and all block
coherence quantities are defined relative to these projectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matops
from .errors import (
    DimMismatch,
    EmptyBlock,
    LiftVerificationFailed,
    RelationVerificationFailed,
    UnsupportedPair,
    ValidationError,
)
from .matops import dag
from .quantum import DensityMatrix, Povm, as_density, hs_mixed

EXT_TOL = 1e-9
POVM_TOL = 1e-8
RELATION_TOL = 1e-8


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NaimarkExt:
    W: np.ndarray
    projectors: tuple
    povm: Povm
    kind: str = "canonical"
    local_dim: int | None = None  # set when the space is C^local (x) C^n
    bases: tuple = field(init=False, repr=False)

    def __post_init__(self):
        W = matops.as_matrix(self.W, "W")
        Ps = [matops.as_matrix(P, "projector") for P in self.projectors]
        dp, d = W.shape
        if d != self.povm.dim or len(Ps) != self.povm.n_outcomes:
            raise DimMismatch("extension does not match the POVM dimensions")
        if np.linalg.norm(dag(W) @ W - np.eye(d)) > EXT_TOL:
            raise ValidationError("W is not an isometry")
        for i, P in enumerate(Ps):
            if P.shape != (dp, dp):
                raise DimMismatch(f"projector {i} has shape {P.shape}")
            if np.linalg.norm(P - dag(P)) > EXT_TOL or np.linalg.norm(P @ P - P) > EXT_TOL:
                raise ValidationError(f"P_{i} is not an orthogonal projector")
            for j in range(i):
                if np.linalg.norm(P @ Ps[j]) > EXT_TOL:
                    raise ValidationError(f"P_{i} and P_{j} are not orthogonal")
        if np.linalg.norm(sum(Ps) - np.eye(dp)) > EXT_TOL:
            raise ValidationError("projectors do not sum to the identity")
        for i, (P, E) in enumerate(zip(Ps, self.povm.effects)):
            if np.linalg.norm(dag(W) @ P @ W - E) > POVM_TOL:
                raise ValidationError(f"W^dag P_{i} W differs from E_{i}")
        object.__setattr__(self, "W", _frozen(W))
        object.__setattr__(self, "projectors", tuple(_frozen(P) for P in Ps))
        object.__setattr__(self, "bases", tuple(_frozen(matops.block_basis(P)) for P in Ps))

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def n(self) -> int:
        return len(self.projectors)

    @property
    def d_prime(self) -> int:
        return self.W.shape[0]

    @property
    def embed_projector(self) -> np.ndarray:
        """Projector ``W W^dag`` onto the embedded original space."""
        return self.W @ dag(self.W)

    def block_ranks(self) -> list[int]:
        return [B.shape[1] for B in self.bases]

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "d_prime": self.d_prime,
            "W": matops.matrix_to_json(self.W),
            "projectors": [matops.matrix_to_json(P) for P in self.projectors],
        }


def canonical_extension(E: Povm) -> NaimarkExt:
    """Extension on ``C^d (x) C^n`` with ``W|psi> = sum_i A_i|psi> (x) |i>``."""
    d, n = E.dim, E.n_outcomes
    W = np.stack(E.meas_ops, axis=1).reshape(d * n, d)
    Ps = []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        Ps.append(np.kron(np.eye(d), e))
    return NaimarkExt(W, tuple(Ps), E, kind="canonical", local_dim=d)


def self_extension(E: Povm) -> NaimarkExt:
    """A projective measurement is its own extension with ``W = 1``."""
    if not E.is_projective():
        raise ValidationError("self extension needs a projective measurement")
    return NaimarkExt(np.eye(E.dim), E.effects, E, kind="self")


def pad_extension(ext: NaimarkExt, k: int) -> NaimarkExt:
    """Enlarge every block by ``k`` dimensions without touching ``W``."""
    if k < 1:
        raise ValidationError("pad size must be at least 1")
    n = ext.n
    if ext.local_dim is not None:
        m = ext.local_dim
        W3 = np.zeros((m + k, n, ext.d), dtype=complex)
        W3[:m] = ext.W.reshape(m, n, ext.d)
        Ps = []
        for i in range(n):
            e = np.zeros((n, n))
            e[i, i] = 1.0
            Ps.append(np.kron(np.eye(m + k), e))
        return NaimarkExt(W3.reshape((m + k) * n, ext.d), tuple(Ps), ext.povm,
                          kind=f"pad:{k}", local_dim=m + k)
    dp = ext.d_prime
    new = dp + k * n
    W = np.zeros((new, ext.d), dtype=complex)
    W[:dp] = ext.W
    Ps = []
    for i, P in enumerate(ext.projectors):
        Pn = np.zeros((new, new), dtype=complex)
        Pn[:dp, :dp] = P
        lo = dp + i * k
        Pn[lo:lo + k, lo:lo + k] = np.eye(k)
        Ps.append(Pn)
    return NaimarkExt(W, tuple(Ps), ext.povm, kind=f"pad:{k}")


def rotate_extension(ext: NaimarkExt, G) -> NaimarkExt:
    G = matops.as_matrix(G, "G")
    if G.shape != (ext.d_prime, ext.d_prime):
        raise DimMismatch(f"rotation {G.shape} does not act on d'={ext.d_prime}")
    if np.linalg.norm(dag(G) @ G - np.eye(ext.d_prime)) > EXT_TOL:
        raise ValidationError("rotation is not unitary")
    return NaimarkExt(G @ ext.W, tuple(G @ P @ dag(G) for P in ext.projectors), ext.povm,
                      kind="rotate")


def variant_extension(ext: NaimarkExt, kind: str, arg) -> NaimarkExt:
    if kind == "pad":
        return pad_extension(ext, int(arg))
    if kind == "rotate":
        return rotate_extension(ext, arg)
    raise ValueError(f"unknown variant {kind!r}")


def _check_dim(M, ext):
    M = matops.as_matrix(M)
    if M.shape != (ext.d_prime, ext.d_prime):
        raise DimMismatch(f"operator {M.shape} does not act on d'={ext.d_prime}")
    return M


def block_dephase(M, ext: NaimarkExt) -> np.ndarray:
    M = _check_dim(M, ext)
    return sum(P @ M @ P for P in ext.projectors)


def embed(rho, ext: NaimarkExt) -> np.ndarray:
    rho = as_density(rho)
    if rho.dim != ext.d:
        raise DimMismatch(f"state dim {rho.dim} vs extension d={ext.d}")
    return ext.W @ rho.mat @ dag(ext.W)


def max_coherent_block_state(ext: NaimarkExt) -> np.ndarray:
    """Uniform superposition of the first basis vector of every block."""
    vecs = []
    for i, B in enumerate(ext.bases):
        if B.shape[1] == 0:
            raise EmptyBlock(f"block {i} is empty")
        vecs.append(B[:, 0])
    psi = sum(vecs) / np.sqrt(len(vecs))
    return np.outer(psi, psi.conj())


def random_block_vector(ext: NaimarkExt, i: int, rng) -> np.ndarray:
    """Haar-random unit vector inside the range of ``P_i``."""
    B = ext.bases[i]
    c = rng.standard_normal(B.shape[1]) + 1j * rng.standard_normal(B.shape[1])
    return B @ (c / np.linalg.norm(c))


def random_block_diagonal_state(ext: NaimarkExt, rng) -> np.ndarray:
    return block_dephase(hs_mixed(ext.d_prime, rng).mat, ext)


@dataclass(frozen=True)
class ExtensionRelation:
    """Isometry ``Q`` (small into large), block unitary ``U`` and reversal Kraus set."""

    small: NaimarkExt
    large: NaimarkExt
    Q: np.ndarray
    U: np.ndarray
    reversal_kraus: tuple
    residuals: dict

    @property
    def d_min(self) -> int:
        return self.small.d_prime

    def channel_N(self, X) -> np.ndarray:
        """``N = R o U`` from large-space operators to small-space operators."""
        Y = self.U @ X @ dag(self.U)
        return sum(R @ Y @ dag(R) for R in self.reversal_kraus)


def _block_inclusion(small: NaimarkExt, large: NaimarkExt) -> np.ndarray:
    Q = np.zeros((large.d_prime, small.d_prime), dtype=complex)
    for Bs, Bl in zip(small.bases, large.bases):
        r = Bs.shape[1]
        if Bl.shape[1] < r:
            raise UnsupportedPair("large extension has a smaller block than the small one")
        Q += Bl[:, :r] @ dag(Bs)
    return Q


def _block_procrustes(large: NaimarkExt, target: np.ndarray) -> np.ndarray:
    """Block-diagonal unitary ``U`` with ``U W_large = target``."""
    U = np.zeros((large.d_prime, large.d_prime), dtype=complex)
    for B in large.bases:
        x = dag(B) @ large.W
        y = dag(B) @ target
        L, _, Rh = np.linalg.svd(y @ dag(x))
        U += B @ (L @ Rh) @ dag(B)
    return U


def _reversal_kraus(Q: np.ndarray, small: NaimarkExt) -> list[np.ndarray]:
    dl, ds = Q.shape
    S_perp = np.eye(dl) - Q @ dag(Q)
    out_basis = np.hstack(small.bases)
    ops = [dag(Q)]
    scale = 1.0 / np.sqrt(ds)
    for b in range(dl):
        row = S_perp[b]
        if np.linalg.norm(row) < 1e-12:
            continue
        for a in range(ds):
            ops.append(scale * np.outer(out_basis[:, a], row))
    return ops


def relate_extensions(small: NaimarkExt, large: NaimarkExt, hint="auto", rng=None,
                      n_checks: int = 20) -> ExtensionRelation:
    """Build and verify the relation between two extensions of one POVM.

    ``hint`` is ``"identity"``, ``"pad_inclusion"``, ``("rotation", G)``,
    ``("explicit", Q)`` or ``"auto"`` (block-basis inclusion with a block
    Procrustes unitary). Verification uses ``n_checks`` random states.
    """
    if small.povm is not large.povm:
        diff = max(np.linalg.norm(a - b) for a, b in zip(small.povm.effects, large.povm.effects)) \
            if small.povm.n_outcomes == large.povm.n_outcomes and small.d == large.d else np.inf
        if diff > POVM_TOL:
            raise UnsupportedPair("extensions belong to different POVMs")
    if any(rs > rl for rs, rl in zip(small.block_ranks(), large.block_ranks())):
        raise UnsupportedPair("block ranks of the large extension must dominate")
    rng = np.random.default_rng(0) if rng is None else rng

    if hint == "identity":
        if small.d_prime != large.d_prime:
            raise UnsupportedPair("identity hint needs equal dimensions")
        Q = np.eye(small.d_prime, dtype=complex)
        U = np.eye(large.d_prime, dtype=complex)
    elif hint == "pad_inclusion":
        Q = _block_inclusion(small, large)
        U = np.eye(large.d_prime, dtype=complex)
    elif hint == "auto":
        Q = _block_inclusion(small, large)
        U = _block_procrustes(large, Q @ small.W)
    elif isinstance(hint, tuple) and hint[0] == "rotation":
        Q = matops.as_matrix(hint[1], "G")
        U = np.eye(large.d_prime, dtype=complex)
    elif isinstance(hint, tuple) and hint[0] == "explicit":
        Q = matops.as_matrix(hint[1], "Q")
        U = _block_procrustes(large, Q @ small.W)
    else:
        raise UnsupportedPair(f"no construction for hint {hint!r}")
    if Q.shape != (large.d_prime, small.d_prime):
        raise UnsupportedPair(f"Q has shape {Q.shape}")

    R = _reversal_kraus(Q, small)
    res = {
        "Q_isometry": float(np.linalg.norm(dag(Q) @ Q - np.eye(small.d_prime))),
        "Q_intertwines": max(float(np.linalg.norm(Pl @ Q - Q @ Ps))
                             for Pl, Ps in zip(large.projectors, small.projectors)),
        "U_unitary": float(np.linalg.norm(dag(U) @ U - np.eye(large.d_prime))),
        "U_commutes": max(float(np.linalg.norm(U @ P - P @ U)) for P in large.projectors),
        "U_embedding": float(np.linalg.norm(U @ large.W - Q @ small.W)),
        "R_complete": float(np.linalg.norm(sum(dag(r) @ r for r in R) - np.eye(large.d_prime))),
    }
    rel = ExtensionRelation(small, large, _frozen(Q), _frozen(U), tuple(_frozen(r) for r in R), res)
    emb = dephase = 0.0
    for _ in range(n_checks):
        rho = hs_mixed(small.d, rng)
        emb = max(emb, float(np.linalg.norm(rel.channel_N(embed(rho, large)) - embed(rho, small))))
        X = hs_mixed(large.d_prime, rng).mat
        lhs = rel.channel_N(block_dephase(X, large))
        rhs = block_dephase(rel.channel_N(X), small)
        dephase = max(dephase, float(np.linalg.norm(lhs - rhs)))
    res["N_embedding"] = emb
    res["N_dephasing"] = dephase
    worst = max(res, key=res.get)
    if res[worst] > RELATION_TOL:
        raise RelationVerificationFailed(f"{worst} residual {res[worst]:.3e}", residual=res[worst])
    return rel


def lift_kraus(relation: ExtensionRelation, K_large, rng=None, samples_per_block: int = 3):
    """Pull BI and SP Kraus operators on the large space back to the small one.

    Returns the operators ``R_m U K_l U^dag Q`` indexed ``[m][l]`` flattened
    with ``m`` major, together with a dictionary of verification residuals.
    """
    ops = [matops.as_matrix(K) for K in getattr(K_large, "ops", K_large)]
    small, large = relation.small, relation.large
    rng = np.random.default_rng(1) if rng is None else rng
    U, Q = relation.U, relation.Q
    inner = [U @ K @ dag(U) @ Q for K in ops]
    lifted = [[R @ X for X in inner] for R in relation.reversal_kraus]
    flat = [K for row in lifted for K in row]

    res_i = float(np.linalg.norm(sum(dag(K) @ K for K in flat) - np.eye(small.d_prime)))

    res_ii = 0.0
    for K in flat:
        for i in range(small.n):
            for _ in range(samples_per_block):
                v = K @ random_block_vector(small, i, rng)
                if np.linalg.norm(v) < 1e-14:
                    continue
                parts = [np.linalg.norm(P @ v) for P in small.projectors]
                j = int(np.argmax(parts))
                res_ii = max(res_ii, float(np.linalg.norm(v - small.projectors[j] @ v)))

    Ws, Wl = small.W, large.W
    res_iii = 0.0
    for m, row in enumerate(lifted):
        for K_hat, K in zip(row, ops):
            want = dag(Wl) @ K @ Wl if m == 0 else np.zeros((small.d, small.d))
            res_iii = max(res_iii, float(np.linalg.norm(dag(Ws) @ K_hat @ Ws - want)))

    residuals = {"i": res_i, "ii": res_ii, "iii": res_iii}
    for key, val in residuals.items():
        if val > RELATION_TOL:
            raise LiftVerificationFailed(f"property {key} residual {val:.3e}", prop=key, residual=val)
    return flat, residuals


prop2_kraus_lift = lift_kraus
