"""Small dense semidefinite programs over complex Hermitian blocks.

Standard primal form::

    minimize    sum_b <C_b, Z_b>
    subject to  sum_b <A_kb, Z_b> = b_k    for every k
                Z_b >= 0

with ``<X, Y> = Re tr(X Y)``. The dual is ``maximize b.y`` subject to
``C_b - sum_k y_k A_kb = S_b >= 0``.

The solver is an infeasible-start primal-dual path-following method using
the HKM search direction with a Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimMismatch, NonHermitian, NumericalFailure

log = logging.getLogger(__name__)

GAP_TOL = 1e-7
FEAS_TOL = 1e-8
STEP_FRACTION = 0.98
MAX_ITER = 200
STALL_ITERS = 6


def hermitian_entry_pair(n: int, p: int, q: int):
    """Hermitian matrices whose inner products with ``Z`` give Re and Im of ``Z[p, q]``."""
    re = np.zeros((n, n), dtype=complex)
    im = np.zeros((n, n), dtype=complex)
    re[p, q] = re[q, p] = 0.5
    im[p, q] = 0.5j
    im[q, p] = -0.5j
    return re, im


def entry_constraints(n: int, block: int, target: np.ndarray, index):
    """Constraints fixing ``Z_block[index[a], index[b]] = target[a, b]`` for a Hermitian target.

    ``index`` lists the rows of the variable block corresponding to the rows of
    ``target``; a rectangular target given as ``(rows, cols)`` index pair fixes
    an off-diagonal sub-block instead.
    """
    out = []
    if isinstance(index, tuple):
        rows, cols = index
        for a, p in enumerate(rows):
            for c, q in enumerate(cols):
                re, im = hermitian_entry_pair(n, p, q)
                out.append(({block: re}, float(target[a, c].real)))
                out.append(({block: im}, float(target[a, c].imag)))
        return out
    for a, p in enumerate(index):
        e = np.zeros((n, n), dtype=complex)
        e[p, p] = 1.0
        out.append(({block: e}, float(target[a, a].real)))
        for c in range(a + 1, len(index)):
            re, im = hermitian_entry_pair(n, p, index[c])
            out.append(({block: re}, float(target[a, c].real)))
            out.append(({block: im}, float(target[a, c].imag)))
    return out


def _realvec(M: np.ndarray) -> np.ndarray:
    return np.concatenate([M.real.ravel(), M.imag.ravel()])


@dataclass
class SdpProblem:
    """Block-diagonal SDP in standard form.

    ``constraints`` is a list of ``(parts, rhs)`` with ``parts`` a mapping from
    block index to the Hermitian coefficient matrix on that block (missing
    blocks are zero). Linearly dependent rows are removed at construction;
    an inconsistent dependent row marks the problem infeasible.
    """

    block_dims: list
    cost: list
    constraints: list
    A: list = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)
    inconsistent: bool = field(init=False, default=False)

    def __post_init__(self):
        dims = [int(n) for n in self.block_dims]
        if len(self.cost) != len(dims):
            raise DimMismatch("one cost matrix per block is required")
        cost = []
        for n, C in zip(dims, self.cost):
            C = np.asarray(C, dtype=complex)
            if C.shape != (n, n):
                raise DimMismatch(f"cost block {C.shape} vs dimension {n}")
            if np.linalg.norm(C - C.conj().T) > 1e-10 * max(1.0, np.linalg.norm(C)):
                raise NonHermitian("cost matrix is not Hermitian")
            cost.append(0.5 * (C + C.conj().T))
        m = len(self.constraints)
        A = [np.zeros((m, n, n), dtype=complex) for n in dims]
        b = np.zeros(m)
        for k, (parts, rhs) in enumerate(self.constraints):
            for blk, Ak in parts.items():
                Ak = np.asarray(Ak, dtype=complex)
                if Ak.shape != (dims[blk], dims[blk]):
                    raise DimMismatch(f"constraint {k} block {blk} has shape {Ak.shape}")
                if np.linalg.norm(Ak - Ak.conj().T) > 1e-10 * max(1.0, np.linalg.norm(Ak)):
                    raise NonHermitian(f"constraint {k} is not Hermitian")
                A[blk][k] = 0.5 * (Ak + Ak.conj().T)
            b[k] = float(rhs)
        self.block_dims = dims
        self.cost = cost
        self.A, self.b = self._prune(A, b)

    def _prune(self, A, b):
        m = len(b)
        if m == 0:
            return A, b
        rows = np.hstack([np.array([_realvec(Ab[k]) for k in range(m)]) for Ab in A])
        _, R, piv = scipy.linalg.qr(rows.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        scale = max(diag[0], 1.0) if diag.size else 1.0
        rank = int(np.sum(diag > 1e-10 * scale))
        keep = np.sort(piv[:rank])
        if rank < m:
            drop = np.setdiff1d(np.arange(m), keep)
            coef, *_ = np.linalg.lstsq(rows[keep].T, rows[drop].T, rcond=None)
            mismatch = np.abs(coef.T @ b[keep] - b[drop])
            if np.any(mismatch > 1e-9 * (1 + np.abs(b[drop]))):
                self.inconsistent = True
            log.debug("pruned %d dependent constraints", m - rank)
        return [Ab[keep] for Ab in A], b[keep]

    @property
    def n_constraints(self) -> int:
        return len(self.b)

    def apply_A(self, X) -> np.ndarray:
        out = np.zeros(len(self.b))
        for Ab, Xb in zip(self.A, X):
            out += np.einsum("kij,ji->k", Ab, Xb).real
        return out

    def apply_At(self, y) -> list:
        return [np.einsum("k,kij->ij", y, Ab) for Ab in self.A]

    def objective(self, X) -> float:
        return float(sum(np.einsum("ij,ji->", C, Xb).real for C, Xb in zip(self.cost, X)))


@dataclass
class SdpSolution:
    Z: list
    y: np.ndarray
    S: list
    primal_value: float
    dual_value: float
    gap: float
    status: str
    iterations: int
    residuals: dict

    @property
    def value(self) -> float:
        return self.primal_value


def _herm(M):
    return 0.5 * (M + M.conj().T)


def _inv_psd(S):
    L = np.linalg.cholesky(S)
    Li = scipy.linalg.solve_triangular(L, np.eye(len(S)), lower=True)
    return Li.conj().T @ Li


def _max_step(X, dX):
    """Largest alpha with ``X + alpha dX >= 0``."""
    L = np.linalg.cholesky(X)
    T = scipy.linalg.solve_triangular(L, dX, lower=True)
    T = scipy.linalg.solve_triangular(L, T.conj().T, lower=True)
    lam = np.linalg.eigvalsh(_herm(T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _inner(X, Y):
    return float(sum(np.einsum("ij,ji->", a, b).real for a, b in zip(X, Y)))


def solve(p: SdpProblem, max_iter: int = MAX_ITER, verbose: bool = False) -> SdpSolution:
    """Solve ``p``; raises NumericalFailure when no tolerance is reached."""
    dims = p.block_dims
    N = sum(dims)
    b, C, A = p.b, p.cost, p.A
    m = len(b)
    if p.inconsistent:
        return SdpSolution([np.zeros((n, n)) for n in dims], np.zeros(m), [np.zeros((n, n)) for n in dims],
                           np.inf, np.inf, np.nan, "Infeasible", 0, {})

    normA = max([np.linalg.norm(Ab[k]) for Ab in A for k in range(m)] or [1.0])
    normC = np.sqrt(sum(np.linalg.norm(Cb) ** 2 for Cb in C))
    normb = np.linalg.norm(b)
    xi = max(10.0, np.sqrt(N), N * max(1.0, np.max(np.abs(b), initial=0.0)) / (1.0 + normA))
    eta = max(10.0, np.sqrt(N), normC, normA)
    X = [xi * np.eye(n, dtype=complex) for n in dims]
    S = [eta * np.eye(n, dtype=complex) for n in dims]
    y = np.zeros(m)

    best = None
    status = None
    it = 0
    for it in range(1, max_iter + 1):
        rp = b - p.apply_A(X)
        AtY = p.apply_At(y)
        Rd = [Cb - a - s for Cb, a, s in zip(C, AtY, S)]
        mu = _inner(X, S) / N
        pobj = p.objective(X)
        dobj = float(b @ y)
        pinf = np.linalg.norm(rp) / (1.0 + normb)
        dinf = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd)) / (1.0 + normC)
        gap = max(abs(pobj - dobj), mu * N)
        rel_gap = gap / max(1.0, abs(pobj), abs(dobj))
        if verbose:
            log.info("it %3d pobj %.10e dobj %.10e gap %.2e pinf %.2e dinf %.2e",
                     it, pobj, dobj, rel_gap, pinf, dinf)
        score = max(rel_gap, pinf, dinf)
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in X], y.copy(), [s.copy() for s in S], it)
        if rel_gap < 1e-10 and pinf < 1e-11 and dinf < 1e-11:
            status = "converged"
            break
        if it - best[4] >= STALL_ITERS:
            status = "stalled"
            break
        if dobj > 1e10 * (1 + abs(pobj)) and dinf < 1e-6:
            status = "Infeasible"
            break
        if pobj < -1e10 * (1 + abs(dobj)) and pinf < 1e-6:
            status = "Unbounded"
            break

        try:
            Sinv = [_inv_psd(s) for s in S]
        except np.linalg.LinAlgError:
            status = "stalled"
            break
        # M_kl = Re tr(G_k G_l^dag) with G_k = Ls^-1 A_k Lx. Solving through a QR factor of
        # the stacked real G avoids squaring its condition number.
        parts = []
        try:
            for Ab, Xb, Sb in zip(A, X, S):
                n = Xb.shape[0]
                Lx = np.linalg.cholesky(Xb)
                Ls = np.linalg.cholesky(Sb)
                H = (Ab @ Lx).transpose(1, 0, 2).reshape(n, m * n)
                G = scipy.linalg.solve_triangular(Ls, H, lower=True)
                G = G.reshape(n, m, n).transpose(1, 0, 2).reshape(m, n * n)
                parts += [G.real, G.imag]
        except np.linalg.LinAlgError:
            status = "stalled"
            break
        Rf = scipy.linalg.qr(np.hstack(parts).T, mode="r")[0][:m]

        def msolve(r):
            z = scipy.linalg.solve_triangular(Rf, r, trans="T")
            return scipy.linalg.solve_triangular(Rf, z)

        def direction(T):
            dy = msolve(rp - p.apply_A([_herm(t) for t in T]))
            Aty = p.apply_At(dy)
            dS = [r - a for r, a in zip(Rd, Aty)]
            dX = [_herm(t + Xb @ a @ Si) for t, Xb, a, Si in zip(T, X, Aty, Sinv)]
            return dX, dy, dS

        def steps(dX, dS):
            try:
                ap = min([_max_step(Xb, d) for Xb, d in zip(X, dX)])
                ad = min([_max_step(Sb, d) for Sb, d in zip(S, dS)])
            except np.linalg.LinAlgError:
                return 0.0, 0.0
            return min(1.0, ap), min(1.0, ad)

        # predictor
        T0 = [-Xb - Xb @ r @ Si for Xb, r, Si in zip(X, Rd, Sinv)]
        dXa, dya, dSa = direction(T0)
        ap, ad = steps(dXa, dSa)
        mu_aff = _inner([Xb + ap * d for Xb, d in zip(X, dXa)],
                        [Sb + ad * d for Sb, d in zip(S, dSa)]) / N
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
        # corrector
        T1 = [t + sigma * mu * Si - da @ ds @ Si
              for t, Si, da, ds in zip(T0, Sinv, dXa, dSa)]
        dX, dy, dS = direction(T1)
        ap, ad = steps(dX, dS)
        ap = min(1.0, STEP_FRACTION * ap)
        ad = min(1.0, STEP_FRACTION * ad)
        if ap < 1e-12 and ad < 1e-12:
            status = "stalled"
            break
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        S = [Sb + ad * d for Sb, d in zip(S, dS)]
        y = y + ad * dy
    else:
        status = "iteration_limit"

    if status in ("Infeasible", "Unbounded"):
        return SdpSolution(X, y, S, p.objective(X), float(b @ y), np.nan, status, it, {})

    _, X, y, S, _ = best
    rp = b - p.apply_A(X)
    Rd = [Cb - a - s for Cb, a, s in zip(C, p.apply_At(y), S)]
    pobj, dobj = p.objective(X), float(b @ y)
    res = {
        "primal_residual": float(np.linalg.norm(rp)),
        "dual_residual": float(np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd))),
        "min_eig_Z": float(min(np.linalg.eigvalsh(_herm(x))[0] for x in X)),
        "complementarity": _inner(X, S),
    }
    gap = pobj - dobj
    scale = max(1.0, abs(pobj))
    if (abs(gap) <= GAP_TOL * scale and res["primal_residual"] <= FEAS_TOL
            and res["dual_residual"] <= FEAS_TOL * max(1.0, normC) and res["min_eig_Z"] >= -FEAS_TOL):
        final = "Optimal"
    elif abs(gap) <= 1e-4 * scale and res["primal_residual"] <= 1e-6:
        final = "SlowProgress"
    else:
        raise NumericalFailure(
            f"no convergence after {it} iterations (gap {gap:.2e}, "
            f"primal residual {res['primal_residual']:.2e})", residuals=res)
    return SdpSolution(X, y, S, pobj, dobj, gap, final, it, res)
