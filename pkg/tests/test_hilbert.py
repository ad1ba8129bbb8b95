import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quditspeed.hilbert import (SpaceSpec, basis_op, embed_single, ket, kron, lift_qubit_operator,
                                matrix_exp_hermitian, operator_norm, project_to_qubit, random_hermitian,
                                random_unitary)
from quditspeed.model import CouplingKind, CouplingSpec, DeviceModel, build_coupling

seeds = st.integers(0, 2**32 - 1)


def test_space_spec_layout():
    s = SpaceSpec(3)
    assert s.dim == 9
    assert list(s.qubit_indices) == [0, 1, 3, 4]
    assert s.index(2, 1) == 7
    assert tuple(s.levels()[7]) == (2, 1)
    with pytest.raises(ValueError):
        SpaceSpec(1)


def test_kron_identity_and_basis():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    m = kron(basis_op(0, 1, 2), np.eye(2))
    expected = np.zeros((4, 4))
    expected[0, 2] = expected[1, 3] = 1
    assert np.array_equal(m, expected)


def test_kron_matches_elementwise_definition():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    out = np.zeros((9, 9), dtype=complex)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    out[3 * i + k, 3 * j + l] = a[i, j] * b[k, l]
    assert np.allclose(kron(a, b), out, atol=0, rtol=1e-15)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_kron_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3)) for _ in range(3))
    assert np.allclose(kron(kron(a, b), c), kron(a, kron(b, c)), atol=1e-12)


def _power_iteration_norm(a, iters=2000):
    m = a.conj().T @ a
    v = np.ones(m.shape[0], dtype=complex)
    for _ in range(iters):
        v = m @ v
        v /= np.linalg.norm(v)
    return np.sqrt(np.real(np.vdot(v, m @ v)))


def test_operator_norm_examples():
    assert operator_norm(np.zeros((5, 5))) == 0
    h = build_coupling(CouplingSpec(CouplingKind.FOUR_TONE), DeviceModel())
    assert abs(operator_norm(h) - 3) < 1e-12
    raw = build_coupling(CouplingSpec(CouplingKind.CAPACITIVE_RAW), DeviceModel())
    assert operator_norm(raw) == pytest.approx(_power_iteration_norm(raw), rel=1e-10)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_operator_norm_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    u, v = random_unitary(6, rng), random_unitary(6, rng)
    assert operator_norm(u @ a @ v) == pytest.approx(operator_norm(a), rel=1e-9)


def test_embed_single():
    s = SpaceSpec(3)
    x = basis_op(0, 1, 3) + basis_op(1, 0, 3)
    e = embed_single(x, 1, s)
    for n2 in range(3):
        assert e[s.index(0, n2), s.index(1, n2)] == 1
        assert e[s.index(1, n2), s.index(0, n2)] == 1
    assert np.count_nonzero(e) == 6
    assert np.array_equal(embed_single(np.eye(4), 2, SpaceSpec(4)), np.eye(16))
    psi = kron(ket(0, 3), ket(2, 3))
    out = embed_single(basis_op(1, 2, 3), 2, s) @ psi
    assert np.array_equal(out, kron(ket(0, 3), ket(1, 3)))
    with pytest.raises(ValueError):
        embed_single(np.eye(2), 1, s)
    with pytest.raises(ValueError):
        embed_single(np.eye(3), 3, s)


def test_matrix_exp_examples():
    assert np.allclose(matrix_exp_hermitian(np.zeros((4, 4)), 2.0), np.eye(4))
    h = np.zeros((4, 4))
    h[1, 2] = h[2, 1] = 1
    u = matrix_exp_hermitian(h, np.pi / 2)
    expected = np.eye(4, dtype=complex)
    expected[1, 1] = expected[2, 2] = 0
    expected[1, 2] = expected[2, 1] = -1j
    assert np.allclose(u, expected, atol=1e-14)
    with pytest.raises(ValueError):
        matrix_exp_hermitian(np.array([[0, 1], [0, 0]]), 1.0)


@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_matrix_exp_unitary_and_group_law(seed, t1, t2):
    rng = np.random.default_rng(seed)
    h = random_hermitian(9, rng)
    u1 = matrix_exp_hermitian(h, t1)
    assert np.max(np.abs(u1.conj().T @ u1 - np.eye(9))) < 1e-12
    both = matrix_exp_hermitian(h, t1 + t2)
    assert np.allclose(u1 @ matrix_exp_hermitian(h, t2), both, atol=1e-10)


def test_project_examples():
    s = SpaceSpec(3)
    assert np.array_equal(project_to_qubit(np.eye(9), s), np.eye(4))
    rng = np.random.default_rng(1)
    a = random_unitary(4, rng)
    b = random_unitary(5, rng)
    full = np.zeros((9, 9), dtype=complex)
    q = s.qubit_indices
    rest = np.setdiff1d(np.arange(9), q)
    full[np.ix_(q, q)] = a
    full[np.ix_(rest, rest)] = b
    assert np.array_equal(project_to_qubit(full, s), a)
    h = build_coupling(CouplingSpec(CouplingKind.FOUR_TONE), DeviceModel())
    p = project_to_qubit(matrix_exp_hermitian(h, np.pi / 6), s)
    assert abs(abs(p[0, 3]) - 1 / 3) < 1e-12
    with pytest.raises(ValueError):
        project_to_qubit(np.eye(4), s)


@given(seeds, st.integers(2, 5))
@settings(max_examples=20, deadline=None)
def test_project_inverts_lift(seed, d):
    m4 = random_unitary(4, np.random.default_rng(seed))
    s = SpaceSpec(d)
    assert np.array_equal(project_to_qubit(lift_qubit_operator(m4, s), s), m4)
