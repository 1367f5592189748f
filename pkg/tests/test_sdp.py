import numpy as np
import pytest

from conftest import random_hermitian, random_psd
from povmcoh import measures
from povmcoh.errors import DimMismatch, NonHermitian
from povmcoh.naimark import canonical_extension
from povmcoh.quantum import named_state, z_basis
from povmcoh.sdp import SdpProblem, entry_constraints, solve


def _random_instance(rng, dims=(3, 2), m=5):
    """Strictly feasible primal and dual by construction."""
    Z0 = [random_psd(n, rng) + np.eye(n) for n in dims]
    cons = []
    for _ in range(m):
        parts = {b: random_hermitian(n, rng) for b, n in enumerate(dims)}
        rhs = sum(np.trace(parts[b] @ Z0[b]).real for b in parts)
        cons.append((parts, rhs))
    y0 = rng.standard_normal(m)
    cost = [random_psd(n, rng) + np.eye(n) + sum(y0[k] * cons[k][0][b] for k in range(m))
            for b, n in enumerate(dims)]
    return SdpProblem(list(dims), cost, cons)


def _realify(M):
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def _oracle_value(p: SdpProblem) -> float:
    """Dual of the doubled real symmetric problem solved by cvxopt."""
    cvxopt = pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers

    m = p.n_constraints
    Gs, hs = [], []
    for b, n in enumerate(p.block_dims):
        cols = [0.5 * _realify(p.A[b][k]).ravel(order="F") for k in range(m)]
        Gs.append(matrix(np.column_stack(cols)))
        hs.append(matrix(0.5 * _realify(p.cost[b])))
    solvers.options.update({"show_progress": False, "abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9})
    sol = solvers.sdp(matrix(-p.b), Gs=Gs, hs=hs)
    assert sol["status"] == "optimal"
    return float(p.b @ np.array(sol["x"]).ravel())


def test_trivial_examples():
    e = np.ones((1, 1))
    sol = solve(SdpProblem([1], [e], [({0: e}, 1.0)]))
    assert sol.status == "Optimal" and sol.primal_value == pytest.approx(1.0, abs=1e-8)
    sol = solve(SdpProblem([2], [np.diag([1.0, 2.0])], [({0: np.eye(2)}, 1.0)]))
    assert sol.primal_value == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(sol.Z[0], np.diag([1.0, 0.0]), atol=1e-6)


def test_robustness_pure_example():
    rep = measures.c_rob_povm(named_state("psi_x"), z_basis(2), form="both")
    assert rep.value == pytest.approx(1.0, abs=1e-7)
    primal, dual = rep.certificate["primal"], rep.certificate["dual"]
    assert abs(primal.primal_value - (-dual.primal_value - 1.0)) <= 1e-7


def test_realification_oracle():
    rng = np.random.default_rng(11)
    for _ in range(10):
        p = _random_instance(rng, dims=tuple(rng.integers(1, 4, size=2)), m=int(rng.integers(2, 6)))
        sol = solve(p)
        assert sol.status == "Optimal"
        assert sol.primal_value == pytest.approx(_oracle_value(p), abs=1e-6)


def test_solution_invariants_and_weak_duality(rng):
    for _ in range(10):
        p = _random_instance(rng)
        sol = solve(p)
        assert sol.dual_value <= sol.primal_value + 1e-9
        assert abs(sol.gap) <= 1e-7 * max(1.0, abs(sol.primal_value))
        assert sol.residuals["primal_residual"] <= 1e-8
        assert min(np.linalg.eigvalsh(Z)[0] for Z in sol.Z) >= -1e-8


def test_scaling_covariance(rng):
    for lam in (0.1, 3.0, 17.0):
        p = _random_instance(rng)
        base = solve(p).primal_value
        scaled = SdpProblem(p.block_dims, [lam * C for C in p.cost],
                            [({b: p.A[b][k] for b in range(len(p.block_dims))}, p.b[k])
                             for k in range(p.n_constraints)])
        assert solve(scaled).primal_value == pytest.approx(lam * base, abs=1e-8 * max(1, lam * abs(base)))


def test_deterministic(rng):
    p = _random_instance(rng)
    a, b = solve(p), solve(p)
    assert a.primal_value == b.primal_value and np.array_equal(a.y, b.y)


def test_dependent_rows_pruned():
    e = np.eye(2)
    p = SdpProblem([2], [np.diag([1.0, 2.0])], [({0: e}, 1.0), ({0: 2 * e}, 2.0)])
    assert p.n_constraints == 1 and not p.inconsistent
    assert solve(p).primal_value == pytest.approx(1.0, abs=1e-8)
    q = SdpProblem([2], [np.eye(2)], [({0: e}, 1.0), ({0: 2 * e}, 3.0)])
    assert q.inconsistent


def test_infeasible_detected():
    e = np.ones((1, 1))
    sol = solve(SdpProblem([1], [e], [({0: e}, -1.0)]))
    assert sol.status == "Infeasible"


def test_entry_constraints_fix_entries():
    target = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])
    cons = entry_constraints(3, 0, target, [0, 2])
    assert len(cons) == 4
    p = SdpProblem([3], [np.eye(3)], cons)
    Z = solve(p).Z[0]
    assert np.allclose(Z[np.ix_([0, 2], [0, 2])], target, atol=1e-7)


def test_validation_errors():
    with pytest.raises(DimMismatch):
        SdpProblem([2], [np.eye(3)], [])
    with pytest.raises(NonHermitian):
        SdpProblem([2], [np.array([[0, 1], [0, 0]])], [])
    with pytest.raises(NonHermitian):
        SdpProblem([2], [np.eye(2)], [({0: np.array([[0, 1j], [1j, 0]])}, 0.0)])


def test_block_rob_matches_povm_rob(rng):
    from povmcoh.quantum import hs_mixed, trine
    from povmcoh.naimark import embed

    ext = canonical_extension(trine())
    for _ in range(3):
        rho = hs_mixed(2, rng)
        a = measures.c_rob_povm(rho, trine()).value
        b = measures.c_rob_block(embed(rho, ext), ext)
        assert a == pytest.approx(b, abs=1e-6)
