"""Coherence quantifiers with respect to a POVM.

Every POVM measure has a block counterpart evaluated on an embedded state
and a Naimark extension; the two agree for any extension of the POVM.
Internally the robustness programs index the dilated space outcome-major,
``(i, a) -> i * d + a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import matops, sdp
from .errors import DimMismatch, NotPure
from .matops import dag
from .naimark import NaimarkExt, block_dephase, canonical_extension
from .quantum import PROB_FLOOR, Povm, as_density, measure_stats, shannon, spectrum_entropy, vn_entropy

MEASURES = ("rel", "l1", "rob", "max", "geo")


@dataclass
class MeasureReport:
    name: str
    value: float
    extension_used: NaimarkExt | None = None
    certificate: Any = None
    certificate_gap: float | None = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "extension": "canonical" if self.extension_used is None else self.extension_used.kind,
            "certificate_gap": self.certificate_gap,
        }


def _check(rho, E: Povm):
    rho = as_density(rho)
    if rho.dim != E.dim:
        raise DimMismatch(f"state dim {rho.dim} vs POVM dim {E.dim}")
    return rho


def _cross_blocks(rho, E: Povm, meas_ops=None):
    A = E.meas_ops if meas_ops is None else meas_ops
    return [[Ai @ rho.mat @ dag(Aj) for Aj in A] for Ai in A]


def c_rel_block(M, ext: NaimarkExt) -> float:
    """``S(Delta[M]) - S(M)`` for a density operator on the dilated space."""
    M = matops.as_matrix(M)
    if M.shape != (ext.d_prime, ext.d_prime):
        raise DimMismatch(f"operator {M.shape} does not act on d'={ext.d_prime}")
    # Delta[M] is block diagonal; its spectrum is the union of block spectra.
    w = np.concatenate([np.linalg.eigvalsh(matops.hermitian_part(dag(B) @ M @ B)) for B in ext.bases])
    return spectrum_entropy(w) - vn_entropy(M)


def c_rel_povm(rho, E: Povm, meas_ops=None) -> float:
    """``H(p) + sum_i p_i S(rho_i) - S(rho)``; outcomes with ``p_i < 1e-12`` are dropped."""
    rho = _check(rho, E)
    if meas_ops is None:
        stats = measure_stats(rho, E)
        probs, posts = stats.probs, stats.post_states
        post_entropy = sum(p * vn_entropy(s) for p, s in zip(probs, posts) if s is not None)
    else:
        probs = np.array([np.trace(E_i @ rho.mat).real for E_i in E.effects])
        post_entropy = 0.0
        for p, A in zip(probs, meas_ops):
            if p >= PROB_FLOOR:
                post_entropy += p * vn_entropy(A @ rho.mat @ dag(A) / p)
    probs = np.clip(probs, 0.0, None)
    return shannon(probs / probs.sum()) + post_entropy - vn_entropy(rho)


def c_l1_povm(rho, E: Povm) -> float:
    rho = _check(rho, E)
    blocks = _cross_blocks(rho, E)
    n = E.n_outcomes
    return 2.0 * sum(matops.trace_norm(blocks[i][j]) for i in range(n) for j in range(i + 1, n))


def c_l1_block(M, ext: NaimarkExt) -> float:
    M = matops.as_matrix(M)
    n = ext.n
    B = ext.bases
    return 2.0 * sum(matops.trace_norm(dag(B[i]) @ M @ B[j]) for i in range(n) for j in range(i + 1, n))


def _rob_primal_problem(rho, E: Povm) -> sdp.SdpProblem:
    d, n = E.dim, E.n_outcomes
    N = d * n
    blocks = _cross_blocks(rho, E)
    cons = []
    for i in range(n):
        for j in range(i + 1, n):
            rows = list(range(i * d, (i + 1) * d))
            cols = list(range(j * d, (j + 1) * d))
            cons += sdp.entry_constraints(N, 0, -blocks[i][j], (rows, cols))
    return sdp.SdpProblem([N], [np.eye(N)], cons)


def _rob_dual_problem(rho, E: Povm) -> sdp.SdpProblem:
    d, n = E.dim, E.n_outcomes
    N = d * n
    blocks = _cross_blocks(rho, E)
    Mbig = np.block(blocks)
    cons = []
    for i in range(n):
        idx = list(range(i * d, (i + 1) * d))
        cons += sdp.entry_constraints(N, 0, np.eye(d), idx)
    return sdp.SdpProblem([N], [-matops.hermitian_part(Mbig)], cons)


def c_rob_povm(rho, E: Povm, form: str = "both") -> MeasureReport:
    """Robustness of POVM coherence from the primal and/or dual program.

    ``form="both"`` solves the two programs independently, requires them to
    agree within 1e-6 and reports the primal (upper) value.
    """
    rho = _check(rho, E)
    primal = dual = None
    if form in ("primal", "both"):
        primal = sdp.solve(_rob_primal_problem(rho, E))
    if form in ("dual", "both"):
        dual = sdp.solve(_rob_dual_problem(rho, E))
    if form == "primal":
        return MeasureReport("rob", max(0.0, primal.primal_value), certificate={"primal": primal},
                             certificate_gap=primal.gap)
    dual_value = -dual.primal_value - 1.0
    if form == "dual":
        return MeasureReport("rob", max(0.0, dual_value), certificate={"dual": dual},
                             certificate_gap=dual.gap)
    if form != "both":
        raise ValueError(f"unknown form {form!r}")
    gap = primal.primal_value - dual_value
    if abs(gap) > 1e-6:
        raise sdp.NumericalFailure(f"robustness primal/dual disagree by {gap:.3e}",
                                   residuals={"gap": gap})
    return MeasureReport("rob", max(0.0, primal.primal_value),
                         certificate={"primal": primal, "dual": dual, "dual_value": dual_value},
                         certificate_gap=gap)


def c_rob_block(M, ext: NaimarkExt) -> float:
    """Block robustness ``min{tr D - 1 : D block diagonal, D >= M}``."""
    M = matops.hermitian_part(matops.as_matrix(M))
    dp = ext.d_prime
    dims = [B.shape[1] for B in ext.bases] + [dp]
    slack = len(dims) - 1
    cons = []
    for p in range(dp):
        for q in range(p, dp):
            if p == q:
                e = np.zeros((dp, dp), dtype=complex)
                e[p, p] = 1.0
                herms = [(e, M[p, p].real)]
            else:
                re, im = sdp.hermitian_entry_pair(dp, p, q)
                herms = [(re, M[p, q].real), (im, M[p, q].imag)]
            for H, rhs in herms:
                parts = {i: dag(B) @ H @ B for i, B in enumerate(ext.bases)}
                parts[slack] = -H
                cons.append((parts, float(rhs)))
    cost = [np.eye(n) for n in dims[:-1]] + [np.zeros((dp, dp))]
    sol = sdp.solve(sdp.SdpProblem(dims, cost, cons))
    return max(0.0, sol.primal_value - 1.0)


def c_max_povm(rho, E: Povm, form: str = "both") -> MeasureReport:
    rep = c_rob_povm(rho, E, form=form)
    return MeasureReport("max", float(np.log2(1.0 + rep.value)), certificate=rep.certificate,
                         certificate_gap=rep.certificate_gap)


def _psd_factor(M, tol=1e-12) -> np.ndarray:
    w, V = np.linalg.eigh(matops.hermitian_part(M))
    keep = w > tol
    return V[:, keep] * np.sqrt(w[keep])


def _geo_fidelity_sdp(R: np.ndarray, ext: NaimarkExt) -> tuple[float, sdp.SdpSolution]:
    """Maximal fidelity between ``R R^dag`` and a block-diagonal state.

    Uses ``F(RR^dag, sigma) = tr sqrt(R^dag sigma R)`` and the program
    ``max Re tr Y`` over ``[[1, Y], [Y^dag, R^dag sigma R]] >= 0``.
    """
    r = R.shape[1]
    dims = [2 * r] + [B.shape[1] for B in ext.bases]
    cons = sdp.entry_constraints(2 * r, 0, np.eye(r), list(range(r)))
    RB = [dag(B) @ R for B in ext.bases]  # r_i x r
    for p in range(r):
        for q in range(p, r):
            if p == q:
                h = np.zeros((r, r), dtype=complex)
                h[p, p] = 1.0
                herms = [h]
            else:
                herms = list(sdp.hermitian_entry_pair(r, p, q))
            for h in herms:
                big = np.zeros((2 * r, 2 * r), dtype=complex)
                big[r:, r:] = h
                parts = {0: big}
                for i, X in enumerate(RB):
                    parts[i + 1] = -(X @ h @ dag(X))
                cons.append((parts, 0.0))
    cons.append(({i + 1: np.eye(n) for i, n in enumerate(dims[1:])}, 1.0))
    C0 = np.zeros((2 * r, 2 * r), dtype=complex)
    C0[:r, r:] = -0.5 * np.eye(r)
    C0[r:, :r] = -0.5 * np.eye(r)
    cost = [C0] + [np.zeros((n, n)) for n in dims[1:]]
    sol = sdp.solve(sdp.SdpProblem(dims, cost, cons))
    return min(1.0, max(0.0, -sol.primal_value)), sol


def c_geo_block(M, ext: NaimarkExt) -> float:
    """``1 - max F^2(M, Delta[sigma])`` over dilated-space states ``sigma``."""
    M = matops.as_matrix(M)
    if M.shape != (ext.d_prime, ext.d_prime):
        raise DimMismatch(f"operator {M.shape} does not act on d'={ext.d_prime}")
    F, _ = _geo_fidelity_sdp(_psd_factor(M), ext)
    return min(1.0, max(0.0, 1.0 - F * F))


def c_geo_povm(rho, E: Povm, ext: NaimarkExt | None = None) -> MeasureReport:
    rho = _check(rho, E)
    ext = canonical_extension(E) if ext is None else ext
    F, sol = _geo_fidelity_sdp(ext.W @ _psd_factor(rho.mat), ext)
    return MeasureReport("geo", min(1.0, max(0.0, 1.0 - F * F)), extension_used=ext,
                         certificate={"fidelity": F, "solution": sol}, certificate_gap=sol.gap)


def pure_dual_witness(psi, E: Povm):
    """Feasible point of the robustness dual program built from a pure state.

    Returns ``(blocks, value)`` with ``blocks[i, j]`` the ``d x d`` block
    ``|phi_i><phi_j|`` (identity on the diagonal, zero for discarded outcomes)
    and ``value`` the dual objective it attains.
    """
    rho = _check(psi, E)
    if abs(rho.purity() - 1.0) > 1e-9:
        raise NotPure(f"purity {rho.purity():.12f} is not 1")
    w, V = np.linalg.eigh(rho.mat)
    v = V[:, -1]
    d, n = E.dim, E.n_outcomes
    probs = np.array([np.vdot(v, Ei @ v).real for Ei in E.effects])
    keep = [i for i in range(n) if probs[i] >= PROB_FLOOR]
    phis = {i: E.meas_ops[i] @ v / np.sqrt(probs[i]) for i in keep}
    blocks = np.zeros((n, n, d, d), dtype=complex)
    for i in range(n):
        blocks[i, i] = np.eye(d)
        for j in range(n):
            if i != j and i in phis and j in phis:
                blocks[i, j] = np.outer(phis[i], phis[j].conj())
    cross = _cross_blocks(rho, E)
    value = sum(np.trace(blocks[j, i] @ cross[i][j]).real for i in range(n) for j in range(n) if i != j)
    big = blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)
    if np.linalg.eigvalsh(matops.hermitian_part(big))[0] < -1e-10:
        raise sdp.NumericalFailure("witness is not positive semidefinite")
    return blocks, float(value)


def evaluate(name: str, rho, E: Povm, **kw) -> float:
    """Numeric value of a named measure (``rel``, ``l1``, ``rob``, ``max``, ``geo``)."""
    if name == "rel":
        return c_rel_povm(rho, E)
    if name == "l1":
        return c_l1_povm(rho, E)
    if name == "rob":
        return c_rob_povm(rho, E, form=kw.get("form", "primal")).value
    if name == "max":
        return c_max_povm(rho, E, form=kw.get("form", "primal")).value
    if name == "geo":
        return c_geo_povm(rho, E).value
    raise ValueError(f"unknown measure {name!r}")


def report(name: str, rho, E: Povm) -> MeasureReport:
    if name == "rob":
        return c_rob_povm(rho, E, form="both")
    if name == "max":
        return c_max_povm(rho, E, form="both")
    if name == "geo":
        return c_geo_povm(rho, E)
    return MeasureReport(name, evaluate(name, rho, E))


def evaluate_block(name: str, M, ext: NaimarkExt) -> float:
    if name == "rel":
        return c_rel_block(M, ext)
    if name == "l1":
        return c_l1_block(M, ext)
    if name == "rob":
        return c_rob_block(M, ext)
    if name == "geo":
        return c_geo_block(M, ext)
    raise ValueError(f"unknown block measure {name!r}")


def is_block_diagonal(M, ext: NaimarkExt, tol=1e-9) -> bool:
    return bool(np.linalg.norm(M - block_dephase(M, ext)) <= tol)
