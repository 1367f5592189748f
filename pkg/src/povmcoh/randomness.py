"""Private randomness of POVM outcomes against a purifying eavesdropper."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matops
from .errors import DimMismatch, NumericalFailure
from .matops import dag
from .quantum import PROB_FLOOR, DensityMatrix, Povm, as_density, shannon, vn_entropy

RANK_TOL = 1e-12


@dataclass
class CqState:
    """Outcome distribution with conditional system and environment states."""

    probs: np.ndarray
    env_states: list
    sys_states: list
    env_marginal: DensityMatrix

    def __post_init__(self):
        if abs(float(np.sum(self.probs)) - 1.0) > 1e-9:
            raise NumericalFailure(f"probabilities sum to {np.sum(self.probs)!r}")
        for i, (sA, sE) in enumerate(zip(self.sys_states, self.env_states)):
            if sA is None:
                continue
            if abs(vn_entropy(sA) - vn_entropy(sE)) > 1e-8:
                raise NumericalFailure(f"conditional state {i} is not pure on A and E")


def purify(rho) -> np.ndarray:
    """Minimal purification on ``A (x) E`` with ``dim E = rank(rho)``.

    The vector is ordered system-major; its environment dimension is
    ``len(vec) // rho.dim``.
    """
    rho = as_density(rho)
    w, V = np.linalg.eigh(rho.mat)
    keep = w > RANK_TOL
    w, V = w[keep], V[:, keep]
    r = len(w)
    psi = (V * np.sqrt(w)).reshape(rho.dim * r)
    return psi / np.linalg.norm(psi)


def _check(rho, F: Povm):
    rho = as_density(rho)
    if rho.dim != F.dim:
        raise DimMismatch(f"state dim {rho.dim} vs POVM dim {F.dim}")
    return rho


def cq_post_state(rho, F: Povm, gauge=None, purification=None) -> CqState:
    """Post-measurement cq-state from ``(A_i (x) 1)|psi>`` with ``A_i = U_i sqrt(F_i)``."""
    rho = _check(rho, F)
    psi = purify(rho) if purification is None else np.asarray(purification, dtype=complex).ravel()
    d = rho.dim
    r = psi.size // d
    if psi.size != d * r:
        raise DimMismatch("purification length is not a multiple of the system dimension")
    Psi = psi.reshape(d, r)
    ops = F.meas_ops if gauge is None else [U @ A for U, A in zip(gauge, F.meas_ops)]
    probs, env, sys = [], [], []
    for A in ops:
        T = A @ Psi  # (A (x) 1)|psi> as a d x r coefficient matrix
        p = float(np.vdot(T, T).real)
        probs.append(p)
        if p < PROB_FLOOR:
            env.append(None)
            sys.append(None)
            continue
        T = T / np.sqrt(p)
        env.append(DensityMatrix.normalized(T.T @ T.conj()))
        sys.append(DensityMatrix.normalized(T @ dag(T)))
    probs = np.array(probs)
    probs = probs / probs.sum()
    return CqState(probs, env, sys, DensityMatrix.normalized(Psi.T @ Psi.conj()))


def _rate(cq: CqState) -> float:
    cond = sum(p * vn_entropy(s) for p, s in zip(cq.probs, cq.env_states) if s is not None)
    return shannon(cq.probs) + cond - vn_entropy(cq.env_marginal)


def randomness_rate(rho, F: Povm, test_mode: bool = False, rng: np.random.Generator | None = None,
                    n_purifications: int = 5) -> float:
    """``S(X|E) = H(p) + sum_i p_i S(rho_E|i) - S(rho_E)`` on the minimal purification.

    In ``test_mode`` the value is recomputed on ``n_purifications`` purifications
    obtained from random isometries on the environment, and any disagreement
    above 1e-8 raises NumericalFailure.
    """
    rho = _check(rho, F)
    psi = purify(rho)
    rate = _rate(cq_post_state(rho, F, purification=psi))
    if test_mode:
        rng = np.random.default_rng(0) if rng is None else rng
        d = rho.dim
        r = psi.size // d
        for _ in range(n_purifications):
            extra = int(rng.integers(0, 3))
            V = matops.random_unitary(r + extra, rng)[:, :r]
            alt = (psi.reshape(d, r) @ V.T).ravel()
            other = _rate(cq_post_state(rho, F, purification=alt))
            if abs(other - rate) > 1e-8:
                raise NumericalFailure(f"rate depends on purification ({other - rate:.3e})")
    return rate
