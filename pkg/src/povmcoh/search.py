"""Optimisation of coherence over state space and sampling experiments."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import measures
from .errors import NotConverged, ValidationError
from .matops import dag
from .parallel import pmap, spawn_rngs
from .quantum import NAMED_VECTORS, DensityMatrix, Povm, edelta, haar_pure, hs_mixed, named_state, spectrum_entropy

MAX_DIM = 8
FATOL = 1e-9
SWEEP_STATES = ("psi_x", "psi_y", "psi_z", "mixed")
SWEEP_HEADER = ("delta",) + SWEEP_STATES + ("min", "max")
SCATTER_HEADER = ("kind", "c_rob", "c_rel", "c_l1")


@dataclass
class OptResult:
    state: DensityMatrix
    value: float
    objective: str
    measure: str
    restarts_used: int
    converged: bool


def _fast_rel(M: np.ndarray, ops: np.ndarray) -> float:
    # H(p) + sum p_i S(rho_i) is the entropy of the union of spectra of A_i M A_i^dag.
    post = ops @ M @ dag(ops)
    w = np.linalg.eigvalsh(0.5 * (post + dag(post))).ravel()
    return spectrum_entropy(w) - spectrum_entropy(np.linalg.eigvalsh(M))


def _objective_fn(E: Povm, measure: str):
    if measure == "rel":
        ops = np.array(E.meas_ops)
        return lambda M: _fast_rel(M, ops)
    if measure not in measures.MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    return lambda M: measures.evaluate(measure, DensityMatrix(M), E)


def _mixed_from(x: np.ndarray, d: int) -> np.ndarray:
    L = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
    M = L @ dag(L)
    return M / np.trace(M).real


def _pure_from(x: np.ndarray, d: int) -> np.ndarray:
    v = x[:d] + 1j * x[d:]
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def _seed_points(d: int, pure: bool) -> list[np.ndarray]:
    vecs = [NAMED_VECTORS[k] for k in ("psi_x", "psi_y", "psi_z")] if d == 2 else \
        [np.eye(d)[0], np.ones(d) / np.sqrt(d)]
    pts = []
    if pure:
        for v in vecs:
            pts.append(np.concatenate([v.real, v.imag]))
        return pts
    L0 = np.eye(d, dtype=complex)
    pts.append(np.concatenate([L0.real.ravel(), L0.imag.ravel()]))
    for v in vecs:
        # Full-rank factor close to the pure seed so the simplex is not degenerate.
        L = np.outer(v, v.conj()) + 1e-3 * np.eye(d)
        pts.append(np.concatenate([L.real.ravel(), L.imag.ravel()]))
    return pts


def extremal_coherence(E: Povm, measure: str = "rel", objective: str = "min", restarts: int = 20,
                       rng: np.random.Generator | None = None, seed: int = 0) -> OptResult:
    """Minimise or maximise a measure over states by multi-start Nelder-Mead.

    The minimum is searched over mixed states ``L L^dag / tr`` and the maximum
    over pure states, which suffices for convex measures.
    """
    d = E.dim
    if d > MAX_DIM:
        raise ValidationError(f"dimension {d} exceeds the search limit {MAX_DIM}")
    if objective not in ("min", "max"):
        raise ValueError("objective must be 'min' or 'max'")
    pure = objective == "max"
    sign = -1.0 if pure else 1.0
    f = _objective_fn(E, measure)
    to_state = _pure_from if pure else _mixed_from

    def cost(x):
        return sign * f(to_state(x, d))

    rng = np.random.default_rng(seed) if rng is None else rng
    starts = _seed_points(d, pure)
    npar = 2 * d if pure else 2 * d * d
    starts += [rng.standard_normal(npar) for _ in range(max(0, restarts - len(starts)))]
    opts = {"fatol": FATOL, "xatol": 1e-9, "maxiter": 400 * npar, "maxfev": 400 * npar}

    def run(x0):
        r = scipy.optimize.minimize(cost, x0, method="Nelder-Mead", options=opts)
        return r.fun, r.x, bool(r.success)

    runs = pmap(run, starts)
    best = min(range(len(runs)), key=lambda k: runs[k][0])
    fun, x, ok = runs[best]
    # One polishing restart from the incumbent resets a possibly collapsed simplex.
    fun2, x2, ok2 = run(x)
    if fun2 <= fun:
        fun, x, ok = fun2, x2, ok2
    state = DensityMatrix.normalized(to_state(x, d))
    res = OptResult(state, float(f(state.mat)), objective, measure, len(starts) + 1, ok)
    if not ok:
        raise NotConverged(f"{objective} search for {measure} did not converge", best=res)
    return res


def delta_sweep(grid, states=SWEEP_STATES, with_extremes: bool = False, restarts: int = 20,
                seed: int = 0) -> list[dict]:
    """Rows of ``c_rel`` for named states along the ``E(delta)`` family."""
    grid = [float(x) for x in grid]
    if any(not 0.0 <= x <= 1.0 for x in grid):
        raise ValidationError("sweep grid must lie in [0, 1]")
    named = {s: named_state(s) for s in states}
    rngs = spawn_rngs(seed, len(grid))

    def row(item):
        delta, rng = item
        E = edelta(delta)
        out = {"delta": delta}
        for s, rho in named.items():
            out[s] = measures.c_rel_povm(rho, E)
        if with_extremes:
            out["min"] = extremal_coherence(E, "rel", "min", restarts, rng=rng).value
            out["max"] = extremal_coherence(E, "rel", "max", restarts, rng=rng).value
        return out

    return pmap(row, list(zip(grid, rngs)))


def sweep_contract_violations(rows: list[dict]) -> list[str]:
    """Endpoint checks: at 0 the Y basis values, at 1 the trine value of 1/2."""
    bad = []
    for r in rows:
        if r["delta"] == 0.0:
            for k, want in (("psi_y", 0.0), ("psi_x", 1.0), ("psi_z", 1.0)):
                if k in r and abs(r[k] - want) > 1e-8:
                    bad.append(f"delta=0 {k}={r[k]!r}")
        if r["delta"] == 1.0 and "mixed" in r and abs(r["mixed"] - 0.585) > 5e-4:
            bad.append(f"delta=1 mixed={r['mixed']!r}")
    return bad


def scatter_experiment(E: Povm, n_pure: int, n_mixed: int, rng: np.random.Generator) -> list[tuple]:
    """Rows ``(kind, c_rob, c_rel, c_l1)`` for Haar pure and HS mixed samples."""
    d = E.dim
    samples = [("pure", haar_pure(d, rng)) for _ in range(n_pure)]
    samples += [("mixed", hs_mixed(d, rng)) for _ in range(n_mixed)]

    def row(item):
        kind, rho = item
        return (kind, measures.c_rob_povm(rho, E, form="primal").value,
                measures.c_rel_povm(rho, E), measures.c_l1_povm(rho, E))

    return pmap(row, samples)


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return f"{x:.12g}"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        vals = [r.get(h) for h in header] if isinstance(r, dict) else list(r)
        w.writerow([fmt(v) for v in vals])
    return buf.getvalue()
