"""Validated quantum states and POVMs, entropies and random sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matops
from .errors import (
    BlochConstraintViolation,
    CompletenessViolation,
    DimMismatch,
    InvalidDistribution,
    NonHermitian,
    NotPsd,
    OutOfRange,
    ValidationError,
)
from .matops import dag

STATE_TOL = 1e-9
COMPLETENESS_TOL = 1e-8
PROB_FLOOR = 1e-12
ZERO_EFFECT_TRACE = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    mat: np.ndarray

    def __post_init__(self):
        M = matops.as_matrix(self.mat, "rho")
        if M.shape[0] != M.shape[1]:
            raise DimMismatch(f"density matrix must be square, got {M.shape}")
        if not matops.is_hermitian(M, STATE_TOL):
            raise NonHermitian("density matrix is not Hermitian")
        M = matops.hermitian_part(M)
        w = np.linalg.eigvalsh(M)
        if w[0] < -STATE_TOL:
            raise NotPsd(f"density matrix has eigenvalue {w[0]:.3e}")
        tr = np.trace(M).real
        if abs(tr - 1.0) > STATE_TOL:
            raise ValidationError(f"density matrix has trace {tr!r}")
        object.__setattr__(self, "mat", _frozen(M))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_vector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)

    @classmethod
    def normalized(cls, M) -> "DensityMatrix":
        """Build from a PSD matrix after symmetrizing and rescaling the trace."""
        M = matops.hermitian_part(np.asarray(M, dtype=complex))
        return cls(M / np.trace(M).real)

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)

    def to_json(self) -> dict:
        return {"dim": self.dim, "rho": matops.matrix_to_json(self.mat)}

    @classmethod
    def from_json(cls, obj) -> "DensityMatrix":
        try:
            d = int(obj["dim"])
            M = matops.matrix_from_json(obj["rho"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed state JSON: {exc}") from exc
        if M.shape != (d, d):
            raise DimMismatch(f"state JSON dim {d} but matrix {M.shape}")
        return cls(M)


def as_density(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)


@dataclass(frozen=True)
class Povm:
    """A POVM with measurement operators fixed to ``A_i = sqrt(E_i)``.

    Zero effects are kept (flagged in ``zero_effects``) so outcome indices
    stay aligned across parameter families.
    """

    effects: tuple
    meas_ops: tuple = field(init=False)
    zero_effects: tuple = field(init=False)
    labels: tuple | None = None

    def __post_init__(self):
        effects = [matops.as_matrix(E, f"effect {i}") for i, E in enumerate(self.effects)]
        if not effects:
            raise ValidationError("a POVM needs at least one effect")
        d = effects[0].shape[0]
        for i, E in enumerate(effects):
            if E.shape != (d, d):
                raise DimMismatch(f"effect {i} has shape {E.shape}, expected {(d, d)}")
            if not matops.is_hermitian(E, STATE_TOL):
                raise NotPsd(f"effect {i} is not Hermitian", index=i)
            w = np.linalg.eigvalsh(matops.hermitian_part(E))
            if w[0] < -STATE_TOL:
                raise NotPsd(f"effect {i} has eigenvalue {w[0]:.3e}", index=i)
        effects = [matops.hermitian_part(E) for E in effects]
        residual = float(np.linalg.norm(sum(effects) - np.eye(d)))
        if residual > COMPLETENESS_TOL:
            raise CompletenessViolation(
                f"effects sum to identity only within {residual:.3e}", residual=residual
            )
        meas = [matops.sqrtm_psd(E) for E in effects]
        zeros = [bool(np.trace(E).real < ZERO_EFFECT_TRACE) for E in effects]
        if self.labels is not None and len(self.labels) != len(effects):
            raise ValidationError("labels must match the number of effects")
        object.__setattr__(self, "effects", tuple(_frozen(E) for E in effects))
        object.__setattr__(self, "meas_ops", tuple(_frozen(A) for A in meas))
        object.__setattr__(self, "zero_effects", tuple(zeros))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def is_projective(self, tol=1e-9) -> bool:
        return all(np.linalg.norm(E @ E - E) <= tol for E in self.effects)

    def conjugated(self, G) -> "Povm":
        """The POVM ``{G E_i G^dag}`` for a unitary ``G``."""
        G = np.asarray(G, dtype=complex)
        return Povm(tuple(G @ E @ dag(G) for E in self.effects), labels=self.labels)

    def to_json(self) -> dict:
        out = {"dim": self.dim, "effects": [matops.matrix_to_json(E) for E in self.effects]}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_json(cls, obj) -> "Povm":
        try:
            d = int(obj["dim"])
            effects = [matops.matrix_from_json(e) for e in obj["effects"]]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed POVM JSON: {exc}") from exc
        for E in effects:
            if E.shape != (d, d):
                raise DimMismatch(f"POVM JSON dim {d} but effect {E.shape}")
        return validate_povm(effects, labels=obj.get("labels"))


def validate_povm(effects, labels=None) -> Povm:
    return Povm(tuple(effects), labels=labels)


@dataclass(frozen=True)
class OutcomeStats:
    probs: np.ndarray
    post_states: tuple  # DensityMatrix or None per outcome


def bloch_qubit_povm(alphas, m_vecs) -> Povm:
    """Qubit POVM with effects ``alpha_i (1 + m_i . sigma)``."""
    alphas = np.asarray(alphas, dtype=float)
    m = np.asarray(m_vecs, dtype=float).reshape(len(alphas), 3)
    if np.any(alphas < 0):
        raise BlochConstraintViolation("weights must be nonnegative", "alpha_nonnegative")
    if abs(alphas.sum() - 1.0) > 1e-10:
        raise BlochConstraintViolation(f"weights sum to {alphas.sum()!r}", "alpha_sum")
    if np.linalg.norm(alphas @ m) > 1e-10:
        raise BlochConstraintViolation("weighted Bloch vectors do not cancel", "vector_balance")
    if np.any(np.linalg.norm(m, axis=1) > 1 + 1e-10):
        raise BlochConstraintViolation("Bloch vector longer than one", "vector_length")
    effects = [a * (np.eye(2) + sum(mi[k] * PAULIS[k] for k in range(3))) for a, mi in zip(alphas, m)]
    return validate_povm(effects)


def edelta_params(delta: float):
    """Weights and Bloch directions of the distorted trine family."""
    if not 0.0 <= delta <= 1.0:
        raise OutOfRange(f"delta={delta!r} outside [0, 1]")
    t = delta / (3.0 - delta)
    s = np.sqrt(1.0 - t * t)
    alphas = np.array([delta / 3.0, 0.5 * (1 - delta / 3.0), 0.5 * (1 - delta / 3.0)])
    m = np.array([[1.0, 0.0, 0.0], [-t, s, 0.0], [-t, -s, 0.0]])
    return alphas, m


def edelta(delta: float) -> Povm:
    """Three-outcome qubit POVM interpolating Y measurement (0) and trine (1)."""
    return bloch_qubit_povm(*edelta_params(float(delta)))


def z_basis(d: int = 2) -> Povm:
    I = np.eye(d)
    return validate_povm([np.outer(I[i], I[i]) for i in range(d)])


def trine() -> Povm:
    return edelta(1.0)


def shannon(p) -> float:
    """Shannon entropy in bits; entries below 1e-12 contribute nothing."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0 or np.any(p < -PROB_FLOOR) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidDistribution(f"not a probability vector: {p}")
    q = p[p > PROB_FLOOR]
    return float(max(0.0, -np.sum(q * np.log2(q))))


def spectrum_entropy(w) -> float:
    w = np.asarray(w, dtype=float)
    w = w[w > PROB_FLOOR]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def vn_entropy(rho) -> float:
    """Von Neumann entropy in bits."""
    M = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    return spectrum_entropy(np.linalg.eigvalsh(matops.hermitian_part(M)))


def measure_stats(rho, E: Povm) -> OutcomeStats:
    rho = as_density(rho)
    if rho.dim != E.dim:
        raise DimMismatch(f"state dim {rho.dim} vs POVM dim {E.dim}")
    probs = np.array([np.trace(Ei @ rho.mat).real for Ei in E.effects])
    posts = []
    for p, A in zip(probs, E.meas_ops):
        if p < PROB_FLOOR:
            posts.append(None)
        else:
            posts.append(DensityMatrix.normalized(A @ rho.mat @ dag(A)))
    return OutcomeStats(probs, tuple(posts))


def haar_pure(d: int, rng: np.random.Generator) -> DensityMatrix:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return DensityMatrix.from_vector(v)


def hs_mixed(d: int, rng: np.random.Generator) -> DensityMatrix:
    """Hilbert-Schmidt random state: partial trace of a Haar pure state on d x d."""
    v = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
    v /= np.linalg.norm(v)
    return DensityMatrix.normalized(matops.partial_trace(np.outer(v, v.conj()), (d, d), keep="A"))


def random_povm(d: int, n: int, rng: np.random.Generator) -> Povm:
    """Random POVM ``S^{-1/2} G_i S^{-1/2}`` with Wishart ``G_i``."""
    Gs = []
    for _ in range(n):
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        Gs.append(X @ dag(X))
    S_inv_half = matops.psd_func(sum(Gs), "power", p=-0.5)
    return validate_povm([S_inv_half @ G @ S_inv_half for G in Gs])


def sample(kind: str, rng: np.random.Generator, d: int = 2, n: int = 3):
    if d < 2:
        raise ValidationError("sampling requires d >= 2")
    if kind == "haar_pure":
        return haar_pure(d, rng)
    if kind == "hs_mixed":
        return hs_mixed(d, rng)
    if kind == "random_povm":
        if n < 2:
            raise ValidationError("random POVMs need n >= 2")
        return random_povm(d, n, rng)
    raise ValueError(f"unknown sample kind {kind!r}")


def is_extremal_rank_one(E: Povm) -> bool:
    """True when the nonzero effects are rank one and linearly independent."""
    nonzero = [Ei for Ei in E.effects if np.trace(Ei).real >= ZERO_EFFECT_TRACE]
    for Ei in nonzero:
        w = np.linalg.eigvalsh(Ei)
        if len(w) > 1 and w[-2] >= 1e-9:
            return False
    stacked = np.array([np.concatenate([Ei.real.ravel(), Ei.imag.ravel()]) for Ei in nonzero])
    return bool(np.linalg.svd(stacked, compute_uv=False)[-1] > 1e-8)


_S = 1 / np.sqrt(2)
NAMED_VECTORS = {
    "psi_x": np.array([_S, _S], dtype=complex),
    "psi_y": np.array([_S, 1j * _S], dtype=complex),
    "psi_z": np.array([1, 0], dtype=complex),
}


def named_state(name: str) -> DensityMatrix:
    if name in NAMED_VECTORS:
        return DensityMatrix.from_vector(NAMED_VECTORS[name])
    if name == "mixed":
        return DensityMatrix.mixed(2)
    raise ValidationError(f"unknown state name {name!r}")


def named_povm(name: str) -> Povm:
    if name == "z-basis":
        return z_basis(2)
    if name == "trine":
        return trine()
    if name.startswith("edelta:"):
        try:
            delta = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise ValidationError(f"bad delta in {name!r}") from exc
        return edelta(delta)
    raise ValidationError(f"unknown POVM name {name!r}")
