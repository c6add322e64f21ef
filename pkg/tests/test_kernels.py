import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermi_dpp.fock_simulator import dense_expectation_oracle, dense_two_point
from fermi_dpp.kernels import (
    InvalidKernelError,
    ProjectionFactor,
    SMatrix,
    ThermalSpec,
    css_kernel,
    dilate_kernel,
    dpp_inclusion_probability,
    expected_parity,
    logit_hamiltonian,
    pfaffian_kernel_from_S,
    pfpp_inclusion_probability,
    pfpp_pmf,
    projection_kernel_from_factor,
    sigmoid,
    sigmoid_kernel,
    validate_dpp_kernel,
)

from conftest import det_pmf, random_complex, random_factor, random_hermitian, random_skew, subsets

seeds = st.integers(0, 2**32 - 1)


def s_from_dense(m, delta, beta):
    k, p = dense_two_point({"kind": "bdg", "m": m, "delta": delta, "beta": beta})
    n = k.shape[0]
    return SMatrix(np.block([[np.eye(n) - k.conj(), -p.conj()], [p, k]]))


def random_pf_kernel(seed, n, beta=0.8):
    r = np.random.default_rng(seed)
    s = s_from_dense(random_hermitian(r, n), random_skew(r, n), beta)
    return s, pfaffian_kernel_from_S(s)


def random_contraction_kernel(rng, n):
    u, _ = np.linalg.qr(random_complex(rng, n, n))
    return (u * rng.uniform(0.05, 0.95, n)) @ u.conj().T


# ----------------------------------------------------------------------------
# validation and projection kernels


def test_validate_examples():
    k = validate_dpp_kernel(np.eye(3))
    assert k.is_projection and k.rank == 3
    with pytest.raises(InvalidKernelError):
        validate_dpp_kernel(2 * np.eye(3))
    half = validate_dpp_kernel(0.5 * np.eye(3))
    assert not half.is_projection
    with pytest.raises(InvalidKernelError):
        validate_dpp_kernel(np.array([[0.5, 0.1], [0.3, 0.5]]))
    with pytest.raises(InvalidKernelError):
        validate_dpp_kernel(np.ones((2, 3)))


def test_projection_from_unit_vector():
    a = np.zeros((4, 1))
    a[0, 0] = 1
    k, f = projection_kernel_from_factor(a)
    assert f.rank == 1
    assert np.allclose(k.matrix, np.diag([1, 0, 0, 0]))


def test_projection_from_triangle_incidence():
    edges = [(0, 1), (1, 2), (0, 2)]
    inc = np.zeros((3, 3))
    for e, (u, v) in enumerate(edges):
        inc[e, u], inc[e, v] = 1, -1
    k, f = projection_kernel_from_factor(inc)
    assert f.rank == 2
    assert np.trace(k.matrix).real == pytest.approx(2)


def test_projection_matches_pseudoinverse_formula(rng):
    a = random_complex(rng, 5, 3)
    k, f = projection_kernel_from_factor(a)
    want = a @ np.linalg.pinv(a.conj().T @ a) @ a.conj().T
    assert np.abs(k.matrix - want).max() <= 1e-9
    assert np.abs(k.matrix @ k.matrix - k.matrix).max() <= 1e-9
    assert np.abs(f.kernel() - k.matrix).max() <= 1e-9


def test_projection_rejects_zero():
    with pytest.raises(InvalidKernelError):
        projection_kernel_from_factor(np.zeros((3, 2)))


def test_factor_validation():
    with pytest.raises(InvalidKernelError):
        ProjectionFactor(np.array([[1.0, 1.0]]))
    with pytest.raises(InvalidKernelError):
        ProjectionFactor(np.eye(3)[:, :2])


def test_css_examples(rng):
    k, _ = css_kernel(np.array([[1.0, 0], [0, 2.0]]), 1)
    assert np.allclose(k.matrix, np.diag([0, 1]))
    x = random_complex(rng, 3, 6)
    k, _ = css_kernel(x, 3)
    k_range, _ = projection_kernel_from_factor(x.conj().T)
    assert np.abs(k.matrix - k_range.matrix).max() <= 1e-9
    k2, _ = css_kernel(x, 2)
    assert np.trace(k2.matrix).real == pytest.approx(2, abs=1e-9)
    _, _, vh = np.linalg.svd(x)
    top = vh[:2].conj().T @ vh[:2]
    assert np.abs(k2.matrix - top).max() <= 1e-9
    with pytest.raises(InvalidKernelError):
        css_kernel(x, 4)


def test_inclusion_probabilities(rng):
    k = validate_dpp_kernel(random_contraction_kernel(rng, 4))
    m = k.matrix
    assert dpp_inclusion_probability(k, []) == 1.0
    assert dpp_inclusion_probability(k, [3]) == pytest.approx(m[2, 2].real)
    pair = m[0, 0].real * m[1, 1].real - abs(m[0, 1]) ** 2
    assert dpp_inclusion_probability(k, [1, 2]) == pytest.approx(pair)


@given(seeds, st.integers(2, 6))
def test_projection_cardinality_bound(seed, n):
    r = np.random.default_rng(seed)
    rank = int(r.integers(1, n))
    f = random_factor(r, rank, n)
    k = validate_dpp_kernel(f.conj().T @ f)
    for s in itertools.combinations(range(1, n + 1), rank + 1):
        assert abs(dpp_inclusion_probability(k, s)) <= 1e-8


@given(seeds, st.integers(1, 4))
def test_conjugate_kernel_same_law(seed, n):
    k = random_contraction_kernel(np.random.default_rng(seed), n)
    assert np.abs(det_pmf(k) - det_pmf(k.conj())).max() <= 1e-10


# ----------------------------------------------------------------------------
# sigmoid and logit


def test_sigmoid_examples():
    assert np.allclose(sigmoid_kernel(np.zeros((3, 3)), ThermalSpec(1.0)).matrix, np.eye(3) / 2)
    k = sigmoid_kernel(np.diag([-1.0, 1.0]), ThermalSpec(50.0))
    assert np.abs(k.matrix - np.diag([1, 0])).max() <= 1e-10
    assert np.allclose(sigmoid(np.array([-800.0, 0.0, 800.0])), [0, 0.5, 1])


def test_thermal_spec_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        ThermalSpec(0.0)


@given(seeds, st.integers(1, 6), st.floats(0.2, 5.0), st.floats(-1.0, 1.0))
def test_logit_round_trip(seed, n, beta, mu):
    spec = ThermalSpec(beta, mu)
    k = validate_dpp_kernel(random_contraction_kernel(np.random.default_rng(seed), n))
    lam, u = logit_hamiltonian(k, spec)
    h = (u * lam) @ u.conj().T
    assert np.abs(sigmoid_kernel(h, spec).matrix - k.matrix).max() <= 1e-9


def test_logit_half_and_boundary():
    lam, _ = logit_hamiltonian(validate_dpp_kernel(0.5 * np.eye(2)), ThermalSpec(2.0, 0.3))
    assert np.allclose(lam, 0.3)
    with pytest.raises(ValueError):
        logit_hamiltonian(validate_dpp_kernel(np.eye(2)), ThermalSpec(1.0))


def test_sigmoid_kernel_matches_dense_oracle(rng):
    n, beta, mu = 3, 0.9, 0.2
    h = random_hermitian(rng, n)
    k = sigmoid_kernel(h, ThermalSpec(beta, mu))
    spec = {"kind": "thermal", "h": h, "beta": beta, "mu": mu}
    corr, _ = dense_two_point(spec)
    # <a_i^* a_j> = K_ji
    assert np.abs(corr.T - k.matrix).max() <= 1e-10
    for s in subsets(n):
        if s:
            assert dense_expectation_oracle(spec, s) == pytest.approx(dpp_inclusion_probability(k, s), abs=1e-10)


# ----------------------------------------------------------------------------
# dilation


def test_dilation_examples(rng):
    f = random_factor(rng, 2, 4)
    proj = validate_dpp_kernel(f.conj().T @ f)
    big = dilate_kernel(proj).matrix
    assert np.abs(big[:4, 4:]).max() <= 1e-8
    half = dilate_kernel(validate_dpp_kernel(0.5 * np.eye(3))).matrix
    assert np.allclose(half[:3, 3:], 0.5 * np.eye(3))
    k = validate_dpp_kernel(random_contraction_kernel(rng, 4))
    d = dilate_kernel(k)
    assert d.is_projection and d.rank == 4
    assert np.abs(d.matrix @ d.matrix - d.matrix).max() <= 1e-8
    assert np.abs(d.matrix[:4, :4] - k.matrix).max() <= 1e-10


# ----------------------------------------------------------------------------
# Pfaffian kernels


def test_s_matrix_rejects_ph_violation():
    n = 2
    bad = np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), np.eye(n)]])
    with pytest.raises(InvalidKernelError):
        SMatrix(bad)


def test_vanishing_pairing_reduces_to_dpp(rng):
    n = 4
    k = random_contraction_kernel(rng, n)
    s = SMatrix(np.block([[np.eye(n) - k.conj(), np.zeros((n, n))], [np.zeros((n, n)), k]]))
    kk = pfaffian_kernel_from_S(s)
    dk = validate_dpp_kernel(k)
    for sub in subsets(n):
        assert pfpp_inclusion_probability(kk, sub) == pytest.approx(dpp_inclusion_probability(dk, sub), abs=1e-10)
    ref = det_pmf(k)
    for sub in subsets(n):
        assert pfpp_pmf(kk, sub) == pytest.approx(ref[sum(1 << (i - 1) for i in sub)], abs=1e-10)


@given(seeds, st.integers(2, 4))
def test_pfaffian_kernel_matches_dense_correlations(seed, n):
    r = np.random.default_rng(seed)
    m, d, beta = random_hermitian(r, n), random_skew(r, n), 0.7
    kk = pfaffian_kernel_from_S(s_from_dense(m, d, beta))
    spec = {"kind": "bdg", "m": m, "delta": d, "beta": beta}
    for i in range(n):
        for j in range(n):
            b = kk.block(i + 1, j + 1)
            assert np.abs(b.T + kk.block(j + 1, i + 1)).max() <= 1e-10
    for sub in subsets(n):
        if sub:
            want = dense_expectation_oracle(spec, sub)
            assert pfpp_inclusion_probability(kk, sub) == pytest.approx(want, abs=1e-8)


def test_two_point_formula():
    s, kk = random_pf_kernel(11, 3)
    s21, s22 = s.s21, s.s22
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        want = (s22[i, i] * s22[j, j] - abs(s22[i, j]) ** 2 + abs(s21[i, j]) ** 2).real
        assert pfpp_inclusion_probability(kk, [i + 1, j + 1]) == pytest.approx(want, abs=1e-10)
    for i in range(3):
        assert pfpp_inclusion_probability(kk, [i + 1]) == pytest.approx(s22[i, i].real)
    assert pfpp_inclusion_probability(kk, []) == 1.0


@given(seeds, st.integers(1, 5))
def test_pmf_sums_and_inclusion_exclusion(seed, n):
    _, kk = random_pf_kernel(seed, min(n, 4))
    n = kk.n
    pmf = {sub: pfpp_pmf(kk, sub) for sub in subsets(n)}
    assert sum(pmf.values()) == pytest.approx(1, abs=1e-8)
    assert min(pmf.values()) >= -1e-8
    for sub in subsets(n):
        incl = sum(p for j, p in pmf.items() if set(sub) <= set(j))
        assert incl == pytest.approx(pfpp_inclusion_probability(kk, sub), abs=1e-8)
    parity = sum((-1) ** len(j) * p for j, p in pmf.items())
    assert expected_parity(kk) == pytest.approx(parity, abs=1e-8)
    card = sum(len(j) * p for j, p in pmf.items())
    s22 = kk.matrix[0::2, 1::2]
    assert np.trace(s22).real == pytest.approx(card, abs=1e-8)


def test_inclusion_monotone():
    _, kk = random_pf_kernel(3, 4)
    for sub in subsets(4):
        for k in range(len(sub)):
            smaller = sub[:k] + sub[k + 1:]
            assert pfpp_inclusion_probability(kk, sub) <= pfpp_inclusion_probability(kk, smaller) + 1e-10


def test_parity_of_independent_bernoullis():
    p = np.array([0.1, 0.6, 0.3])
    n = len(p)
    s = SMatrix(np.block([[np.diag(1 - p), np.zeros((n, n))], [np.zeros((n, n)), np.diag(p)]]))
    assert expected_parity(pfaffian_kernel_from_S(s)) == pytest.approx(np.prod(1 - 2 * p))


def test_conjugate_s_same_law():
    s, kk = random_pf_kernel(5, 3)
    kk_bar = pfaffian_kernel_from_S(SMatrix(s.matrix.conj()))
    for sub in subsets(3):
        assert pfpp_pmf(kk, sub) == pytest.approx(pfpp_pmf(kk_bar, sub), abs=1e-10)


def test_projective_s_parity_is_sign(rng):
    # pure state: ground state of a random BdG Hamiltonian
    n = 3
    m, d = random_hermitian(rng, n), random_skew(rng, n)
    s = s_from_dense(m, d, 200.0)
    val = expected_parity(pfaffian_kernel_from_S(s))
    assert min(abs(val - 1), abs(val + 1)) <= 1e-8
