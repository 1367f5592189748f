"""Dense complex matrix kernels.

Everything here works on plain ``numpy`` complex arrays. Tolerances follow
double precision for matrices up to a few hundred rows.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    DimMismatch,
    InfeasibleBlockCompletion,
    NoConvergence,
    NonHermitian,
    NotIsometry,
    NotPsd,
    ValidationError,
)

HERM_TOL = 1e-9
PSD_TOL = 1e-9
LOG_FLOOR = 1e-12


class HermEig(NamedTuple):
    evals: np.ndarray
    evecs: np.ndarray


def as_matrix(M, name="matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise DimMismatch(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def dag(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + dag(M))


def is_hermitian(M, tol=HERM_TOL) -> bool:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    return np.linalg.norm(M - dag(M)) <= tol * max(1.0, np.linalg.norm(M))


def herm_eig(M) -> HermEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized first so rounding noise in the anti-Hermitian
    part cannot produce complex eigenvalues.
    """
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimMismatch(f"square matrix required, got {M.shape}")
    if not is_hermitian(M):
        raise NonHermitian(
            f"anti-Hermitian residual {np.linalg.norm(M - dag(M)):.3e} too large"
        )
    try:
        w, V = np.linalg.eigh(hermitian_part(M))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return HermEig(w, V)


def psd_func(M, func: str = "sqrt", p: float | None = None) -> np.ndarray:
    """Apply a spectral function to a PSD matrix.

    ``func`` is one of ``"sqrt"``, ``"log2_clipped"`` or ``"power"`` (with
    exponent ``p``). Eigenvalues are clipped at zero first; for the clipped
    logarithm eigenvalues below ``1e-12`` map to zero.
    """
    w, V = herm_eig(M)
    if w.size and w[0] < -PSD_TOL:
        raise NotPsd(f"minimum eigenvalue {w[0]:.3e} below -{PSD_TOL}")
    w = np.clip(w, 0.0, None)
    if func == "sqrt":
        f = np.sqrt(w)
    elif func == "log2_clipped":
        f = np.zeros_like(w)
        keep = w > LOG_FLOOR
        f[keep] = np.log2(w[keep])
    elif func == "power":
        if p is None:
            raise ValueError("power requires an exponent p")
        f = np.zeros_like(w)
        keep = w > LOG_FLOOR if p < 0 else w > 0
        f[keep] = w[keep] ** p
    else:
        raise ValueError(f"unknown spectral function {func!r}")
    return (V * f) @ dag(V)


def sqrtm_psd(M) -> np.ndarray:
    return psd_func(M, "sqrt")


def trace_norm(M) -> float:
    """Sum of singular values."""
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def operator_norm(M) -> float:
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def _check_state_like(rho, name):
    rho = as_matrix(rho, name)
    if rho.shape[0] != rho.shape[1]:
        raise DimMismatch(f"{name} must be square")
    w = herm_eig(rho).evals
    if w[0] < -PSD_TOL:
        raise NotPsd(f"{name} has eigenvalue {w[0]:.3e}")
    return rho


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``tr sqrt(sqrt(rho) sigma sqrt(rho))`` (not squared).

    Evaluated as the trace norm of ``sqrt(rho) sqrt(sigma)``, which is the
    same quantity with better conditioning.
    """
    rho = _check_state_like(rho, "rho")
    sigma = _check_state_like(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise DimMismatch(f"shapes {rho.shape} and {sigma.shape} differ")
    return trace_norm(sqrtm_psd(rho) @ sqrtm_psd(sigma))


def kron(A, B) -> np.ndarray:
    return np.kron(as_matrix(A, "A"), as_matrix(B, "B"))


def partial_trace(M, dims: tuple[int, int], keep: str = "A") -> np.ndarray:
    """Trace out one factor of a bipartite operator on ``C^dA (x) C^dB``."""
    M = as_matrix(M)
    dA, dB = (int(x) for x in dims)
    if M.shape != (dA * dB, dA * dB):
        raise DimMismatch(f"matrix {M.shape} incompatible with dims {(dA, dB)}")
    T = M.reshape(dA, dB, dA, dB)
    if keep == "A":
        return np.einsum("ajbj->ab", T)
    if keep == "B":
        return np.einsum("iaib->ab", T)
    raise ValueError("keep must be 'A' or 'B'")


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def _gram_schmidt_extend(cols: list[np.ndarray], candidates, target: int, tol=1e-10):
    for c in candidates:
        if len(cols) >= target:
            break
        v = np.array(c, dtype=complex)
        for _ in range(2):
            for u in cols:
                v = v - u * np.vdot(u, v)
        nv = np.linalg.norm(v)
        if nv > tol:
            cols.append(v / nv)
    return cols


def complete_to_unitary(V, blocks=None) -> np.ndarray:
    """Extend an isometry to a unitary.

    Without ``blocks`` the result has ``V`` as its leading columns and the
    remaining columns come from Gram-Schmidt over the standard basis, so a
    standard-basis prefix completes to the identity.

    With ``blocks`` (a list of orthogonal projectors summing to identity) every
    column of ``V`` must lie inside one block. The completion then acts inside
    each block separately, so the returned ``U`` commutes with every block
    projector. Writing ``B_b`` for the block basis (standard basis vectors when
    the projector is diagonal), ``U B_b[:, :k_b]`` equals the ``k_b`` columns of
    ``V`` sitting in block ``b``, in their original order.
    """
    V = as_matrix(V, "V")
    d, k = V.shape
    if k > d or np.linalg.norm(dag(V) @ V - np.eye(k)) > 1e-9:
        raise NotIsometry("input columns are not orthonormal")
    if blocks is None:
        cols = [V[:, j] for j in range(k)]
        cols = _gram_schmidt_extend(cols, np.eye(d, dtype=complex), d)
        if len(cols) != d:  # pragma: no cover - cannot happen for an isometry
            raise InfeasibleBlockCompletion("Gram-Schmidt lost rank")
        return np.column_stack(cols)

    blocks = [as_matrix(P, "block") for P in blocks]
    U = np.zeros((d, d), dtype=complex)
    owner = []
    for j in range(k):
        hits = [b for b, P in enumerate(blocks) if np.linalg.norm(P @ V[:, j] - V[:, j]) <= 1e-9]
        if len(hits) != 1:
            raise InfeasibleBlockCompletion(f"column {j} does not lie in exactly one block")
        owner.append(hits[0])
    for b, P in enumerate(blocks):
        B = block_basis(P)
        r = B.shape[1]
        mine = [V[:, j] for j in range(k) if owner[j] == b]
        if len(mine) > r:
            raise InfeasibleBlockCompletion(f"block {b} has rank {r} < {len(mine)} columns")
        cols = _gram_schmidt_extend(list(mine), B.T, r)
        if len(cols) != r:
            raise InfeasibleBlockCompletion(f"could not complete block {b}")
        U += np.column_stack(cols) @ dag(B)
    return U


def block_basis(P, tol=1e-9) -> np.ndarray:
    """Orthonormal basis (as columns) of the range of a projector.

    Diagonal projectors return standard basis vectors in increasing order.
    """
    P = as_matrix(P, "projector")
    diag = np.real(np.diag(P))
    if np.linalg.norm(P - np.diag(np.diag(P))) <= tol:
        idx = np.flatnonzero(diag > 0.5)
        return np.eye(P.shape[0], dtype=complex)[:, idx]
    w, Vec = herm_eig(P)
    return Vec[:, w > 0.5][:, ::-1]


def matrix_to_json(M) -> dict:
    """Serialize a matrix as ``{"rows", "cols", "data": [[re, im], ...]}``."""
    A = as_matrix(M)
    flat = A.ravel()
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj) -> np.ndarray:
    try:
        r, c = int(obj["rows"]), int(obj["cols"])
        data = np.asarray(obj["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix JSON: {exc}") from exc
    if r <= 0 or c <= 0 or data.shape != (r * c, 2):
        raise ValidationError(f"matrix JSON data has shape {data.shape}, expected {(r * c, 2)}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("matrix JSON contains non-finite values")
    return (data[:, 0] + 1j * data[:, 1]).reshape(r, c)
