import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermi_dpp.bogoliubov import BdGHamiltonian, diagonalize_bdg, parity_prediction, s_matrix_thermal
from fermi_dpp.kernels import PfaffianKernel, ProjectionFactor, pfaffian_kernel_from_S, validate_dpp_kernel
from fermi_dpp.samplers import (
    DPP_MAX_N,
    PFPP_MAX_N,
    PfppCircuitSampler,
    RngSpec,
    SizeCeilingError,
    brute_force_distribution,
    hkpv_indices,
    hkpv_sample,
    sample_dilation_indices,
    sample_dpp_via_dilation,
    sample_general_dpp,
    sample_general_dpp_indices,
    sample_pfpp,
)

from conftest import det_pmf, random_complex, random_factor, random_hermitian, random_skew

seeds = st.integers(0, 2**32 - 1)
DRAWS = 40000


def tv(p, q):
    return 0.5 * np.abs(p - q).sum()


def freq(indices, n):
    return np.bincount(indices, minlength=2**n) / len(indices)


def contraction(rng, n):
    u, _ = np.linalg.qr(random_complex(rng, n, n))
    return (u * rng.uniform(0.05, 0.95, n)) @ u.conj().T


def thermal_transform(seed, n):
    r = np.random.default_rng(seed)
    return diagonalize_bdg(BdGHamiltonian(random_hermitian(r, n), random_skew(r, n)))


# ----------------------------------------------------------------------------
# RNG streams


def test_rng_spec_streams():
    a = RngSpec(3).generator(0).random(4)
    assert np.array_equal(a, RngSpec(3).generator(0).random(4))
    assert not np.array_equal(a, RngSpec(3).generator(1).random(4))
    assert not np.array_equal(a, RngSpec(3, stream=1).generator(0).random(4))
    assert not np.array_equal(a, RngSpec(4).generator(0).random(4))


# ----------------------------------------------------------------------------
# brute force


@given(seeds, st.integers(1, 5))
def test_brute_force_projection_matches_oracle(seed, n):
    r = np.random.default_rng(seed)
    rank = int(r.integers(1, n + 1))
    q = random_factor(r, rank, n)
    k = validate_dpp_kernel(q.conj().T @ q)
    assert np.abs(brute_force_distribution(k) - det_pmf(k.matrix)).max() <= 1e-10


@given(seeds, st.integers(1, 5))
def test_brute_force_general_matches_oracle(seed, n):
    k = validate_dpp_kernel(contraction(np.random.default_rng(seed), n))
    assert np.abs(brute_force_distribution(k) - det_pmf(k.matrix)).max() <= 1e-10


def test_brute_force_pfpp_normalized():
    kk = pfaffian_kernel_from_S(s_matrix_thermal(thermal_transform(1, 4), 0.9))
    p = brute_force_distribution(kk)
    assert p.shape == (16,) and p.sum() == pytest.approx(1)


def test_brute_force_ceilings():
    with pytest.raises(SizeCeilingError):
        brute_force_distribution(validate_dpp_kernel(0.5 * np.eye(DPP_MAX_N + 1)))
    n = PFPP_MAX_N + 1
    with pytest.raises(SizeCeilingError):
        brute_force_distribution(PfaffianKernel(n, np.zeros((2 * n, 2 * n))))
    with pytest.raises(TypeError):
        brute_force_distribution(np.eye(2))


# ----------------------------------------------------------------------------
# determinantal samplers


def test_hkpv_support_and_law(rng):
    n, r = 5, 2
    q = random_factor(rng, r, n)
    idx = hkpv_indices(q, DRAWS, RngSpec(11))
    sizes = np.array([bin(int(i)).count("1") for i in idx])
    assert np.all(sizes == r)
    assert tv(freq(idx, n), det_pmf(q.conj().T @ q)) <= 0.02


def test_hkpv_single_draw_and_workers(rng):
    q = random_factor(rng, 3, 6)
    s = hkpv_sample(q, RngSpec(5))
    assert len(s) == 3 and all(1 <= k <= 6 for k in s)
    a = hkpv_indices(ProjectionFactor(q), 20000, RngSpec(7), workers=1)
    b = hkpv_indices(ProjectionFactor(q), 20000, RngSpec(7), workers=3)
    assert np.array_equal(a, b)


def test_hkpv_unit_rows_are_deterministic():
    q = np.eye(4)[[0, 2]]
    idx = hkpv_indices(q, 100, RngSpec(1))
    assert np.all(idx == 0b0101)


def test_general_dpp_law(rng):
    n = 4
    k = validate_dpp_kernel(contraction(rng, n))
    idx = sample_general_dpp_indices(k, DRAWS, RngSpec(2))
    assert tv(freq(idx, n), det_pmf(k.matrix)) <= 0.02
    s = sample_general_dpp(k, RngSpec(2))
    assert all(1 <= x <= n for x in s)


def test_dilation_law(rng):
    n = 4
    k = validate_dpp_kernel(contraction(rng, n))
    idx = sample_dilation_indices(k, DRAWS, RngSpec(3))
    assert idx.max() < 2**n
    assert tv(freq(idx, n), det_pmf(k.matrix)) <= 0.02
    assert len(sample_dpp_via_dilation(k, RngSpec(3))) <= n


def test_mixture_and_dilation_agree_on_mean_size(rng):
    k = validate_dpp_kernel(contraction(rng, 5))
    a = sample_general_dpp_indices(k, DRAWS, RngSpec(8))
    b = sample_dilation_indices(k, DRAWS, RngSpec(9))
    mean = np.trace(k.matrix).real
    for idx in (a, b):
        sizes = np.array([bin(int(i)).count("1") for i in idx])
        assert sizes.mean() == pytest.approx(mean, abs=0.03)


# ----------------------------------------------------------------------------
# Pfaffian sampler


def test_pfpp_sampler_law_and_parity():
    n, beta = 4, 0.8
    t = thermal_transform(21, n)
    sampler = PfppCircuitSampler(t, beta)
    idx = sampler.sample_indices(DRAWS, RngSpec(4))
    want = brute_force_distribution(pfaffian_kernel_from_S(s_matrix_thermal(t, beta)))
    assert tv(freq(idx, n), want) <= 0.02
    parity = np.mean([(-1) ** bin(int(i)).count("1") for i in idx])
    assert parity == pytest.approx(parity_prediction(t, beta=beta), abs=0.02)
    again = PfppCircuitSampler(t, beta).sample_indices(DRAWS, RngSpec(4))
    assert np.array_equal(idx, again)


def test_pfpp_low_temperature_is_ground_state():
    t = thermal_transform(2, 3)
    idx = PfppCircuitSampler(t, 200.0).sample_indices(2000, RngSpec(1))
    # every draw comes from the vacuum-of-excitations circuit
    parity = {(-1) ** bin(int(i)).count("1") for i in idx}
    assert parity == {t.det_w}


def test_pfpp_sampler_validates_beta():
    with pytest.raises(ValueError):
        PfppCircuitSampler(thermal_transform(1, 2), 0.0)
    s = sample_pfpp(thermal_transform(1, 3), 1.0, RngSpec(0))
    assert all(1 <= k <= 3 for k in s)
