import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quditspeed.grape import GrapeContext
from quditspeed.hilbert import SpaceSpec, matrix_exp_hermitian, random_unitary
from quditspeed.metrics import (PAULIS_2Q, average_fidelity, fidelity_closed_form, leakage_profile,
                                leakage_series, loss, target_iswap)
from quditspeed.model import T_MIN, CouplingSpec, DeviceModel, PulseSet
from quditspeed.propagator import propagate

seeds = st.integers(0, 2**32 - 1)


def literal_fidelity(m, v):
    """Term-by-term Pauli sum, written out with explicit loops."""
    total = 0j
    for p in PAULIS_2Q:
        total += np.trace(v @ p.conj().T @ v.conj().T @ m @ p @ m.conj().T)
    return 0.2 + total.real / 80


def test_paulis_are_orthogonal():
    gram = np.einsum("iab,jab->ij", PAULIS_2Q.conj(), PAULIS_2Q)
    assert np.allclose(gram, 4 * np.eye(16))


def test_fidelity_of_target_is_one():
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = random_unitary(4, rng)
        assert average_fidelity(u, u) == pytest.approx(1, abs=1e-13)


def test_identity_against_iswap():
    f = average_fidelity(np.eye(4), target_iswap())
    assert f == pytest.approx(literal_fidelity(np.eye(4), target_iswap()), abs=1e-14)
    assert f == pytest.approx(0.4, abs=1e-14)


@given(seeds, st.floats(0, 2 * np.pi))
@settings(max_examples=25, deadline=None)
def test_global_phase_invariance(seed, phi):
    rng = np.random.default_rng(seed)
    m, v = random_unitary(4, rng), random_unitary(4, rng)
    f = average_fidelity(m, v)
    assert abs(average_fidelity(np.exp(1j * phi) * m, v) - f) <= 1e-12
    assert abs(average_fidelity(m, np.exp(1j * phi) * v) - f) <= 1e-12
    assert abs(average_fidelity(np.exp(1j * phi) * v, v) - 1) <= 1e-12


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_closed_form_and_literal_sum_agree(seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    v = random_unitary(4, rng)
    f = average_fidelity(m, v)
    assert f == pytest.approx(literal_fidelity(m, v), abs=1e-12)
    assert f == pytest.approx(fidelity_closed_form(m, v), abs=1e-12)


@given(seeds, st.floats(1e-3, 0.5))
@settings(max_examples=25, deadline=None)
def test_infidelity_detects_perturbations(seed, eps):
    rng = np.random.default_rng(seed)
    v = random_unitary(4, rng)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (h + h.conj().T) / 2
    h -= np.trace(h) / 4 * np.eye(4)
    m = v @ matrix_exp_hermitian(h / np.linalg.norm(h, 2), eps)
    dist = min(np.linalg.norm(m - np.exp(1j * phi) * v, 2) for phi in np.linspace(0, 2 * np.pi, 721))
    if dist >= 1e-3:
        assert 1 - average_fidelity(m, v) >= 1e-8


def test_haar_monte_carlo_state_fidelity():
    rng = np.random.default_rng(1)
    v = target_iswap()
    n = 100_000
    for _ in range(5):
        m = random_unitary(4, rng)
        psi = rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        w = psi @ (v.conj().T @ m).T
        samples = np.abs(np.einsum("ni,ni->n", psi.conj(), w)) ** 2
        se = samples.std(ddof=1) / np.sqrt(n)
        assert abs(samples.mean() - average_fidelity(m, v)) <= 3 * se


def test_target_iswap():
    v = target_iswap()
    assert np.allclose(v.conj().T @ v, np.eye(4))
    h = np.zeros((4, 4))
    h[1, 2] = h[2, 1] = 1
    assert np.allclose(matrix_exp_hermitian(h, np.pi / 2), v, atol=1e-15)
    assert np.allclose(v @ v, np.diag([1, -1, -1, 1]))


def test_loss_examples():
    assert loss(1.0, 0.0, 0.0) == 0
    assert loss(0.9, 0.5, 0.2, c_max=0, c_avg=0) == pytest.approx(0.1)
    assert loss(0.999, 0.01, 0.002) == pytest.approx(0.013, abs=1e-15)
    with pytest.raises(ValueError):
        loss(1, 0, 0, c_max=-1)


def test_leakage_profile_without_drive():
    dev = DeviceModel()
    ctx = GrapeContext.build(dev, CouplingSpec("qubit_baseline"))
    prop = propagate(ctx.hamiltonian(PulseSet.zeros(T_MIN, 1.0, M=4)), T_MIN, substeps_per_segment=8, M=4)
    prof = leakage_profile(prop, dev.space)
    assert np.allclose(prof.p01, 1, atol=1e-14)
    assert np.all(prof.p_k[2] == 0)


def _ort_propagation(seed=2):
    rng = np.random.default_rng(seed)
    dev = DeviceModel(d_sim=4, ort_enabled=True)
    ctx = GrapeContext.build(dev, CouplingSpec("four_tone"))
    a = rng.uniform(0, 40, (2, 2, 6)) * np.exp(2j * np.pi * rng.uniform(size=(2, 2, 6)))
    p = PulseSet(a, 0.5 * T_MIN, 40)
    return dev, propagate(ctx.hamiltonian(p), p.T, substeps_per_segment=16, M=6)


def test_leakage_probabilities_are_conserved():
    dev, prop = _ort_propagation()
    lv = dev.space.levels()
    prof = leakage_profile(prop, dev.space)
    assert prof.p01[0] == 1.0
    has2_not3 = np.any(lv == 2, axis=1) & ~np.any(lv >= 3, axis=1)
    p2_only = prop.trajectory[:, :, has2_not3].sum(axis=2).mean(axis=1)
    p3 = prof.p_k[3]
    assert np.max(np.abs(prof.p01 + p2_only + p3 - 1)) <= 1e-9
    for series in [prof.p01, *prof.p_k.values()]:
        assert np.all((series >= -1e-15) & (series <= 1 + 1e-12))
    assert np.max(p3) > 0
    assert np.allclose(leakage_series(prop.trajectory, dev.space, 3), p3)


def test_leakage_csv_round_trip(tmp_path):
    dev, prop = _ort_propagation(3)
    prof = leakage_profile(prop, dev.space)
    path = tmp_path / "leak.csv"
    prof.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,p01,p2,p3"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1], prof.p01)
    assert np.array_equal(data[:, 3], prof.p_k[3])


def test_outside_qubit_space_is_not_renormalized():
    s = SpaceSpec(3)
    u = np.eye(9, dtype=complex)
    u[[0, 2]] = u[[2, 0]]
    m = u[np.ix_(s.qubit_indices, s.qubit_indices)]
    assert average_fidelity(m, np.eye(4)) < 1
