"""Classical reference samplers and brute-force distributions."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bogoliubov import BogoliubovTransform, factorize_particle_hole
from .circuit import compile_pfpp_circuit
from .fock_simulator import exact_distribution, index_to_subset, popcounts, run_circuit
from .kernels import (
    DppKernel,
    InvalidKernelError,
    PfaffianKernel,
    ProjectionFactor,
    dilate_kernel,
    pfpp_pmf,
    sigmoid,
)

DPP_MAX_N = 14
PFPP_MAX_N = 10
SAMPLE_CHUNK = 8192


class SizeCeilingError(ValueError):
    pass


@dataclass(frozen=True)
class RngSpec:
    """Counter-based stream: identical (seed, stream) give identical draws."""

    seed: int
    stream: int = 0

    def generator(self, chunk: int = 0) -> np.random.Generator:
        key = [self.seed & (2**64 - 1), ((self.stream & (2**32 - 1)) << 32) | (chunk & (2**32 - 1))]
        return np.random.Generator(np.random.Philox(key=key))


def _indices_to_subsets(indices: np.ndarray, n: int) -> list[tuple[int, ...]]:
    return [index_to_subset(int(i), n) for i in indices]


def _chunked(draw: Callable[[np.random.Generator, int], np.ndarray], count: int, rng: RngSpec, workers: int) -> np.ndarray:
    """Run draw(gen, size) per fixed-size chunk; chunk k always uses stream chunk k."""
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    sizes = [min(SAMPLE_CHUNK, count - s) for s in range(0, count, SAMPLE_CHUNK)]
    jobs = [(k, size) for k, size in enumerate(sizes)]

    def run(job):
        k, size = job
        return draw(rng.generator(k), size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts).astype(np.int64)


# ----------------------------------------------------------------------------
# HKPV


def _hkpv_batch(q: np.ndarray, gen: np.random.Generator, size: int) -> np.ndarray:
    """Chain-rule sampling for `size` copies at once; returns subset bitmasks."""
    r, n = q.shape
    out = np.zeros(size, dtype=np.int64)
    if r == 0:
        return out
    work = np.broadcast_to(q, (size, r, n)).copy()
    rows = np.arange(size)
    for step in range(r):
        w = np.sum(np.abs(work) ** 2, axis=1)
        w = np.clip(w, 0, None)
        w[(out[:, None] >> np.arange(n)) & 1 == 1] = 0.0
        cdf = np.cumsum(w, axis=1)
        u = gen.random(size) * cdf[:, -1]
        pick = np.minimum((cdf < u[:, None]).sum(axis=1), n - 1)
        out |= np.int64(1) << pick
        if step == r - 1:
            break
        col = work[rows, :, pick]
        col /= np.linalg.norm(col, axis=1, keepdims=True)
        for _ in range(2):
            overlap = np.einsum("br,brn->bn", col.conj(), work)
            work -= col[:, :, None] * overlap[:, None, :]
    return out


def _factor_array(q) -> np.ndarray:
    return np.asarray(q.q if isinstance(q, ProjectionFactor) else ProjectionFactor(np.asarray(q, dtype=complex)).q)


def hkpv_indices(q, count: int, rng: RngSpec, workers: int = 1) -> np.ndarray:
    arr = _factor_array(q)
    return _chunked(lambda gen, size: _hkpv_batch(arr, gen, size), count, rng, workers)


def hkpv_sample(q, rng: RngSpec) -> tuple[int, ...]:
    """One draw from the projection DPP with kernel Q^* Q."""
    arr = _factor_array(q)
    return _indices_to_subsets(hkpv_indices(arr, 1, rng), arr.shape[1])[0]


# ----------------------------------------------------------------------------
# general kernels


def _mixture_batch(eigvals: np.ndarray, eigvecs: np.ndarray, gen: np.random.Generator, size: int) -> np.ndarray:
    n = len(eigvals)
    keep = gen.random((size, n)) < np.clip(eigvals, 0, 1)
    out = np.zeros(size, dtype=np.int64)
    codes = keep.astype(np.int64) @ (np.int64(1) << np.arange(n))
    for code in np.unique(codes):
        members = np.nonzero(codes == code)[0]
        chosen = [k for k in range(n) if (code >> k) & 1]
        q = eigvecs[:, chosen].conj().T
        out[members] = _hkpv_batch(q, gen, len(members))
    return out


def sample_general_dpp_indices(k: DppKernel, count: int, rng: RngSpec, workers: int = 1) -> np.ndarray:
    ev, u = k.eigen.eigenvalues, k.eigen.eigenvectors
    return _chunked(lambda gen, size: _mixture_batch(ev, u, gen, size), count, rng, workers)


def sample_general_dpp(k: DppKernel, rng: RngSpec) -> tuple[int, ...]:
    """Bernoulli choice of eigenvectors, then a projection DPP on them."""
    return _indices_to_subsets(sample_general_dpp_indices(k, 1, rng), k.n)[0]


def _dilated_factor(k: DppKernel) -> np.ndarray:
    big = dilate_kernel(k)
    sel = big.eigen.eigenvalues > 0.5
    return big.eigen.eigenvectors[:, sel].conj().T


def sample_dilation_indices(k: DppKernel, count: int, rng: RngSpec, workers: int = 1) -> np.ndarray:
    q = _dilated_factor(k)
    mask = (1 << k.n) - 1
    return hkpv_indices(ProjectionFactor(q), count, rng, workers) & mask


def sample_dpp_via_dilation(k: DppKernel, rng: RngSpec) -> tuple[int, ...]:
    """Projection DPP on 2N points restricted to the first N."""
    return _indices_to_subsets(sample_dilation_indices(k, 1, rng), k.n)[0]


# ----------------------------------------------------------------------------
# Pfaffian point processes


class PfppCircuitSampler:
    """Two-step thermal sampler; the exact output law of each circuit is cached."""

    def __init__(self, t: BogoliubovTransform, beta: float):
        if not beta > 0:
            raise ValueError("beta must be positive")
        self.t = t
        self.beta = beta
        self.fact = factorize_particle_hole(t)
        self.p_modes = sigmoid(-beta * t.epsilons)
        self._cdfs: dict[int, np.ndarray] = {}

    def cdf_for(self, code: int) -> np.ndarray:
        if code not in self._cdfs:
            c = [k + 1 for k in range(self.t.n) if (code >> k) & 1]
            p = exact_distribution(run_circuit(compile_pfpp_circuit(self.fact, c)))
            self._cdfs[code] = np.cumsum(p / p.sum())
        return self._cdfs[code]

    def _batch(self, gen: np.random.Generator, size: int) -> np.ndarray:
        n = self.t.n
        codes = (gen.random((size, n)) < self.p_modes).astype(np.int64) @ (np.int64(1) << np.arange(n))
        # measurement draws come from a jumped copy, disjoint from the Bernoulli stream
        u = np.random.Generator(gen.bit_generator.jumped()).random(size)
        out = np.zeros(size, dtype=np.int64)
        for code in np.unique(codes):
            members = np.nonzero(codes == code)[0]
            cdf = self.cdf_for(int(code))
            out[members] = np.minimum(np.searchsorted(cdf, u[members], side="right"), len(cdf) - 1)
        return out

    def sample_indices(self, count: int, rng: RngSpec) -> np.ndarray:
        # single-threaded: the cache is shared mutable state
        return _chunked(self._batch, count, rng, 1)


def sample_pfpp(t: BogoliubovTransform, beta: float, rng: RngSpec) -> tuple[int, ...]:
    s = PfppCircuitSampler(t, beta)
    return _indices_to_subsets(s.sample_indices(1, rng), t.n)[0]


# ----------------------------------------------------------------------------
# brute force


def _superset_mobius(f: np.ndarray, n: int) -> np.ndarray:
    """g(S) = sum over J containing S of (-1)^{|J \\ S|} f(J)."""
    g = f.copy()
    idx = np.arange(len(f))
    for b in range(n):
        lower = idx[(idx >> b) & 1 == 0]
        g[lower] -= g[lower | (1 << b)]
    return g


def _all_principal_dets(k: np.ndarray, n: int, only_size: int | None = None) -> np.ndarray:
    vals = np.zeros(2**n)
    vals[0] = 1.0
    pc = popcounts(n)
    for size in range(1, n + 1):
        if only_size is not None and size != only_size:
            continue
        codes = np.nonzero(pc == size)[0]
        cols = np.array([[b for b in range(n) if (c >> b) & 1] for c in codes])
        blocks = k[cols[:, :, None], cols[:, None, :]]
        vals[codes] = np.real(np.linalg.det(blocks))
    if only_size is not None and only_size != 0:
        vals[0] = 0.0
    return vals


def brute_force_distribution(spec) -> np.ndarray:
    """Full PMF over the 2^N subsets, indexed by bitmask (mode k is bit k-1)."""
    if isinstance(spec, PfaffianKernel):
        n = spec.n
        if n > PFPP_MAX_N:
            raise SizeCeilingError(f"N={n} exceeds the Pfaffian ceiling {PFPP_MAX_N}")
        p = np.array([pfpp_pmf(spec, index_to_subset(i, n)) for i in range(2**n)])
    elif isinstance(spec, DppKernel):
        n = spec.n
        if n > DPP_MAX_N:
            raise SizeCeilingError(f"N={n} exceeds the determinantal ceiling {DPP_MAX_N}")
        if spec.is_projection:
            p = _all_principal_dets(spec.matrix, n, only_size=spec.rank)
        else:
            p = _superset_mobius(_all_principal_dets(spec.matrix, n), n)
    else:
        raise TypeError(f"unsupported kernel type {type(spec).__name__}")
    if p.min() < -1e-9:
        raise InvalidKernelError(f"brute-force PMF has a negative entry {p.min():.3g}")
    if abs(p.sum() - 1) > 1e-7:
        raise InvalidKernelError(f"brute-force PMF sums to {p.sum():.10f}")
    return np.clip(p, 0, None)
