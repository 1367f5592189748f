import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from povmcoh import matops
from povmcoh.errors import InfeasibleBlockCompletion, NonHermitian, NotIsometry, NotPsd, ValidationError
from povmcoh.naimark import canonical_extension
from povmcoh.quantum import SIGMA_Z, named_state, trine

from conftest import random_hermitian, random_psd


def test_herm_eig_identity_and_pauli():
    assert np.allclose(matops.herm_eig(np.eye(2)).evals, [1, 1])
    assert np.allclose(matops.herm_eig(SIGMA_Z).evals, [-1, 1])


def test_herm_eig_reconstruction(rng):
    M = random_hermitian(6, rng)
    w, V = matops.herm_eig(M)
    assert np.linalg.norm((V * w) @ V.conj().T - M) <= 1e-10 * max(1, np.linalg.norm(M))
    assert np.linalg.norm(V.conj().T @ V - np.eye(6)) <= 1e-10
    assert np.all(np.diff(w) >= 0)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitian):
        matops.herm_eig(np.array([[0, 1], [0, 0]]))


def test_psd_sqrt_examples():
    assert np.allclose(matops.sqrtm_psd(np.eye(2) / 4), np.eye(2) / 2)
    assert np.allclose(matops.sqrtm_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    E2 = trine().effects[1]
    R = matops.sqrtm_psd(E2)
    assert np.linalg.norm(R @ R - E2) <= 1e-10


def test_psd_func_rejects_negative():
    with pytest.raises(NotPsd):
        matops.psd_func(np.diag([1.0, -1e-6]))


def test_psd_func_power_and_log():
    M = np.diag([4.0, 0.25, 0.0])
    assert np.allclose(matops.psd_func(M, "power", -0.5), np.diag([0.5, 2.0, 0.0]))
    assert np.allclose(matops.psd_func(M, "log2_clipped"), np.diag([2.0, -2.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_sqrt_squares_back(d, seed, rank):
    rng = np.random.default_rng(seed)
    M = random_psd(d, rng, rank=min(rank, d) or None)
    R = matops.sqrtm_psd(M)
    assert np.linalg.norm(R - R.conj().T) <= 1e-12 * max(1, np.linalg.norm(M))
    assert np.linalg.norm(R @ R - M) <= 1e-9 * max(1, np.linalg.norm(M))


def test_trace_norm_examples(rng):
    assert matops.trace_norm(np.zeros((3, 3))) == 0.0
    assert matops.trace_norm(np.array([[0, 1], [0, 0]])) == pytest.approx(1.0)
    rho = named_state("psi_x").mat
    A = trine().meas_ops
    X = A[0] @ rho @ A[1].conj().T
    s = np.linalg.svd(X, compute_uv=False)
    assert matops.trace_norm(X) == pytest.approx(s.sum(), abs=1e-14)
    assert np.linalg.norm(X) <= matops.trace_norm(X) <= np.sqrt(2) * np.linalg.norm(X) + 1e-14
    P = random_psd(4, rng)
    assert matops.trace_norm(P) == pytest.approx(np.trace(P).real)


def test_trace_norm_unitary_invariance(rng):
    for _ in range(20):
        M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        U, V = matops.random_unitary(4, rng), matops.random_unitary(4, rng)
        assert abs(matops.trace_norm(U @ M @ V.conj().T) - matops.trace_norm(M)) <= 1e-9


def test_fidelity_examples(rng):
    z0 = np.diag([1.0, 0.0])
    z1 = np.diag([0.0, 1.0])
    assert matops.fidelity(z0, z0) == pytest.approx(1.0, abs=1e-9)
    assert matops.fidelity(z0, z1) == pytest.approx(0.0, abs=1e-9)
    assert matops.fidelity(z0, np.eye(2) / 2) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    r, s = random_psd(3, rng), random_psd(3, rng)
    r, s = r / np.trace(r), s / np.trace(s)
    assert matops.fidelity(r, s) == pytest.approx(matops.fidelity(s, r), abs=1e-9)
    assert matops.fidelity(r, r) == pytest.approx(1.0, abs=1e-9)


def test_fidelity_matches_textbook_formula(rng):
    r, s = random_psd(3, rng), random_psd(3, rng)
    r, s = r / np.trace(r), s / np.trace(s)
    sr = matops.sqrtm_psd(r)
    ref = np.trace(matops.sqrtm_psd(sr @ s @ sr)).real
    assert matops.fidelity(r, s) == pytest.approx(ref, abs=1e-10)


def test_fidelity_contractive_under_random_channels(rng):
    for _ in range(20):
        r, s = random_psd(2, rng), random_psd(2, rng)
        r, s = r / np.trace(r), s / np.trace(s)
        V = matops.random_unitary(6, rng)[:, :2]  # isometry split into 3 Kraus operators
        Ks = [V[2 * k:2 * k + 2] for k in range(3)]

        def ch(x):
            return sum(K @ x @ K.conj().T for K in Ks)

        assert matops.fidelity(ch(r), ch(s)) >= matops.fidelity(r, s) - 1e-8


def test_partial_trace(rng):
    out = matops.partial_trace(matops.kron(np.eye(2), np.diag([1.0, 0.0])), (2, 2), keep="A")
    assert np.allclose(out, np.eye(2))
    A, B = random_psd(2, rng), random_psd(3, rng)
    assert np.allclose(matops.partial_trace(np.kron(A, B), (2, 3), "A"), A * np.trace(B))
    assert np.allclose(matops.partial_trace(np.kron(A, B), (2, 3), "B"), B * np.trace(A))
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    psi /= np.linalg.norm(psi)
    P = np.outer(psi, psi.conj())
    wa = np.linalg.eigvalsh(matops.partial_trace(P, (2, 2), "A"))
    wb = np.linalg.eigvalsh(matops.partial_trace(P, (2, 2), "B"))
    assert np.allclose(wa, wb, atol=1e-12)
    assert np.trace(matops.partial_trace(P, (2, 2), "A")) == pytest.approx(1.0, abs=1e-12)


def test_complete_to_unitary_prefix():
    U = matops.complete_to_unitary(np.eye(2)[:, :1])
    assert np.allclose(U, np.eye(2))
    ext = canonical_extension(trine())
    U = matops.complete_to_unitary(ext.W)
    assert np.linalg.norm(U.conj().T @ U - np.eye(6)) <= 1e-9
    assert np.allclose(U[:, :2], ext.W)


def test_complete_to_unitary_blocks(rng):
    blocks = [np.kron(np.eye(2), np.diag(np.eye(3)[i])) for i in range(3)]
    v0 = np.zeros(6, dtype=complex)
    v0[[0, 3]] = [1, 1j]
    v0 /= np.linalg.norm(v0)
    v1 = np.zeros(6, dtype=complex)
    v1[[1, 4]] = [0.6, 0.8]
    V = np.column_stack([v0, v1])
    U = matops.complete_to_unitary(V, blocks)
    assert np.linalg.norm(U.conj().T @ U - np.eye(6)) <= 1e-9
    for P in blocks:
        assert np.linalg.norm(U @ P - P @ U) <= 1e-9
    with pytest.raises(InfeasibleBlockCompletion):
        matops.complete_to_unitary(np.ones((6, 1)) / np.sqrt(6), blocks)
    with pytest.raises(NotIsometry):
        matops.complete_to_unitary(np.ones((2, 1)))


def test_matrix_json_round_trip(rng):
    M = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    back = matops.matrix_from_json(matops.matrix_to_json(M))
    assert np.array_equal(back, M)
    with pytest.raises(ValidationError):
        matops.matrix_from_json({"rows": 2, "cols": 2, "data": [[0, 0]]})
    with pytest.raises(ValidationError):
        matops.matrix_from_json({"rows": 1, "cols": 1, "data": [[float("nan"), 0]]})
