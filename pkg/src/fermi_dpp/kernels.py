"""Determinantal and Pfaffian point-process kernels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numerics import (
    HermitianEig,
    NotHermitianError,
    as_complex_matrix,
    check_hermitian,
    hermitian_eig,
    matrix_function_hermitian,
    max_abs,
    pfaffian,
)

SPECTRUM_TOL = 1e-8
SNAP_TOL = 1e-12
RANK_CUTOFF = 1e-10


class InvalidKernelError(ValueError):
    pass


def sigmoid(x):
    """Numerically stable logistic function 1 / (1 + e^{-x})."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _index_list(subset: Iterable[int], n: int) -> list[int]:
    idx = sorted(int(i) for i in subset)
    if len(set(idx)) != len(idx):
        raise ValueError("index set has repeated entries")
    if idx and (idx[0] < 1 or idx[-1] > n):
        raise ValueError(f"indices must lie in 1..{n}")
    return [i - 1 for i in idx]


@dataclass(frozen=True)
class DppKernel:
    matrix: np.ndarray
    eigen: HermitianEig
    is_projection: bool

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(np.sum(self.eigen.eigenvalues > 0.5))


@dataclass(frozen=True)
class ProjectionFactor:
    """r x N matrix with orthonormal rows; the kernel is Q^* Q."""

    q: np.ndarray

    def __post_init__(self):
        q = self.q
        if q.ndim != 2 or q.shape[0] > q.shape[1]:
            raise InvalidKernelError(f"factor must be r x N with r <= N, got {q.shape}")
        if max_abs(q @ q.conj().T - np.eye(q.shape[0])) > 1e-9:
            raise InvalidKernelError("factor rows are not orthonormal")

    @property
    def rank(self) -> int:
        return self.q.shape[0]

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def kernel(self) -> np.ndarray:
        return self.q.conj().T @ self.q


@dataclass(frozen=True)
class ThermalSpec:
    beta: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


class SMatrix:
    """2N x 2N contraction matrix [[S11, S12], [S21, S22]] of a Pfaffian process."""

    def __init__(self, matrix, check: bool = True):
        m = as_complex_matrix(matrix, "S")
        if m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise InvalidKernelError(f"S must be 2N x 2N, got {m.shape}")
        self.matrix = m
        if check:
            self.validate()

    @property
    def n(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def s11(self):
        return self.matrix[: self.n, : self.n]

    @property
    def s12(self):
        return self.matrix[: self.n, self.n:]

    @property
    def s21(self):
        return self.matrix[self.n:, : self.n]

    @property
    def s22(self):
        return self.matrix[self.n:, self.n:]

    def particle_hole_residual(self) -> float:
        n = self.n
        c = np.block([[np.zeros((n, n)), np.eye(n)], [np.eye(n), np.zeros((n, n))]])
        return max_abs(c @ self.matrix.conj() @ c - (np.eye(2 * n) - self.matrix))

    def validate(self, tol: float = SPECTRUM_TOL) -> None:
        s = self.matrix
        try:
            check_hermitian(s, name="S")
        except NotHermitianError as exc:
            raise InvalidKernelError(str(exc)) from exc
        ev = hermitian_eig(s).eigenvalues
        if ev[0] < -tol or ev[-1] > 1 + tol:
            raise InvalidKernelError("spectrum of S leaves [0, 1]")
        if self.particle_hole_residual() > tol:
            raise InvalidKernelError("S violates the particle-hole constraint")
        if max_abs(self.s21 + self.s21.T) > tol:
            raise InvalidKernelError("S21 is not skew-symmetric")


@dataclass(frozen=True)
class PfaffianKernel:
    """Interleaved 2N x 2N skew matrix; rows/cols 2i-1, 2i hold block i."""

    n: int
    matrix: np.ndarray

    def block(self, i: int, j: int) -> np.ndarray:
        return self.matrix[2 * i - 2: 2 * i, 2 * j - 2: 2 * j]

    def submatrix(self, subset: Iterable[int]) -> np.ndarray:
        idx = _index_list(subset, self.n)
        rows = [x for i in idx for x in (2 * i, 2 * i + 1)]
        return self.matrix[np.ix_(rows, rows)]


# ----------------------------------------------------------------------------
# DPP kernels


def validate_dpp_kernel(k) -> DppKernel:
    m = as_complex_matrix(k, "K")
    if m.shape[0] != m.shape[1]:
        raise InvalidKernelError(f"kernel must be square, got {m.shape}")
    try:
        check_hermitian(m, name="K")
    except NotHermitianError as exc:
        raise InvalidKernelError(str(exc)) from exc
    m = 0.5 * (m + m.conj().T)
    eig = hermitian_eig(m)
    ev = eig.eigenvalues
    if ev.size and (ev[0] < -SPECTRUM_TOL or ev[-1] > 1 + SPECTRUM_TOL):
        raise InvalidKernelError(f"kernel spectrum [{ev[0]:.3g}, {ev[-1]:.3g}] leaves [0, 1]")
    proj = bool(np.all(np.minimum(np.abs(ev), np.abs(ev - 1)) <= SPECTRUM_TOL))
    return DppKernel(m, eig, proj)


def _gram_rank_mask(gram_eigenvalues: np.ndarray) -> np.ndarray:
    """Numerically nonzero eigenvalues of a Gram matrix A^* A.

    Squaring pushes round-off to about n * eps * max; a singular-value cutoff
    of RANK_CUTOFF would read that noise as signal.
    """
    top = gram_eigenvalues.max()
    tol = max(RANK_CUTOFF**2, 64 * len(gram_eigenvalues) * np.finfo(float).eps) * top
    return gram_eigenvalues > tol


def _orthonormal_range(a: np.ndarray) -> np.ndarray:
    """Columns spanning range(A), from the spectrum of A^* A with the rank cutoff."""
    eig = hermitian_eig(a.conj().T @ a)
    sv = np.sqrt(np.clip(eig.eigenvalues, 0, None))
    if sv.size == 0 or sv[-1] == 0:
        raise InvalidKernelError("matrix is zero")
    keep = _gram_rank_mask(eig.eigenvalues)
    u = a @ eig.eigenvectors[:, keep] / sv[keep]
    # reverse so that the dominant direction comes first
    u = u[:, ::-1]
    return _reorthonormalize(u)


def _reorthonormalize(u: np.ndarray) -> np.ndarray:
    q = np.array(u, dtype=complex)
    for k in range(q.shape[1]):
        for _ in range(2):
            for j in range(k):
                q[:, k] -= (q[:, j].conj() @ q[:, k]) * q[:, j]
        q[:, k] /= np.linalg.norm(q[:, k])
    return q


def projection_kernel_from_factor(a) -> tuple[DppKernel, ProjectionFactor]:
    """Orthogonal projector onto range(A), i.e. A (A^* A)^+ A^*."""
    a = as_complex_matrix(a, "A")
    if max_abs(a) == 0:
        raise InvalidKernelError("matrix is zero")
    u = _orthonormal_range(a)
    factor = ProjectionFactor(u.conj().T)
    return validate_dpp_kernel(factor.kernel()), factor


def css_kernel(x, k: int) -> tuple[DppKernel, ProjectionFactor]:
    """Projector onto the top-k right singular vectors of X."""
    x = as_complex_matrix(x, "X")
    eig = hermitian_eig(x.conj().T @ x)
    sv = np.sqrt(np.clip(eig.eigenvalues, 0, None))[::-1]
    vecs = eig.eigenvectors[:, ::-1]
    rank = int(np.sum(_gram_rank_mask(eig.eigenvalues))) if sv.size and sv[0] > 0 else 0
    if not 1 <= k <= rank:
        raise InvalidKernelError(f"k={k} exceeds the numerical rank {rank}")
    v = _reorthonormalize(vecs[:, :k])
    factor = ProjectionFactor(v.conj().T)
    return validate_dpp_kernel(factor.kernel()), factor


def dpp_inclusion_probability(k: DppKernel, subset: Iterable[int]) -> float:
    idx = _index_list(subset, k.n)
    if not idx:
        return 1.0
    return float(np.real(np.linalg.det(k.matrix[np.ix_(idx, idx)])))


def sigmoid_kernel(h, spec: ThermalSpec) -> DppKernel:
    """K = sigma(-beta (H - mu))."""
    h = as_complex_matrix(h, "H")
    eig = hermitian_eig(h)
    k = matrix_function_hermitian(h, lambda lam: sigmoid(-spec.beta * (lam - spec.mu)), eig)
    return validate_dpp_kernel(k)


def logit_hamiltonian(k: DppKernel, spec: ThermalSpec) -> tuple[np.ndarray, np.ndarray]:
    """Energies lam with beta (lam - mu) = log((1 - d)/d), plus the eigenvectors."""
    d = k.eigen.eigenvalues
    if np.any(d < 1e-12) or np.any(d > 1 - 1e-12):
        raise ValueError("kernel eigenvalues must lie strictly inside (0, 1)")
    lam = spec.mu + np.log((1 - d) / d) / spec.beta
    return lam, k.eigen.eigenvectors


def dilate_kernel(k: DppKernel) -> DppKernel:
    """Projection kernel on 2N points whose restriction to [N] is K."""
    n = k.n
    eig = k.eigen
    ev = np.clip(eig.eigenvalues, 0, 1)
    # round-off next to 0 or 1 would otherwise leak ~1e-8 through the square root
    ev = np.where(ev < SNAP_TOL, 0.0, np.where(ev > 1 - SNAP_TOL, 1.0, ev))
    u = eig.eigenvectors
    off = (u * np.sqrt(ev * (1 - ev))) @ u.conj().T
    kk = (u * ev) @ u.conj().T
    big = np.block([[kk, off], [off, np.eye(n) - kk]])
    return validate_dpp_kernel(big)


# ----------------------------------------------------------------------------
# Pfaffian kernels


def pfaffian_kernel_from_S(s: SMatrix) -> PfaffianKernel:
    s.validate()
    n = s.n
    s21, s22 = s.s21, s.s22
    m = np.zeros((2 * n, 2 * n), dtype=complex)
    m[0::2, 0::2] = s21
    m[0::2, 1::2] = s22
    m[1::2, 0::2] = -s22.T
    m[1::2, 1::2] = s21.conj().T
    return PfaffianKernel(n, m)


def _real_or_raise(value: complex, what: str) -> float:
    if abs(np.imag(value)) > 1e-8:
        raise InvalidKernelError(f"{what} has imaginary part {np.imag(value):.3g}")
    return float(np.real(value))


def pfpp_inclusion_probability(kk: PfaffianKernel, subset: Iterable[int]) -> float:
    idx = _index_list(subset, kk.n)
    if not idx:
        return 1.0
    return _real_or_raise(pfaffian(kk.submatrix(subset)), "inclusion probability")


def j_mask(n: int, subset: Iterable[int] | None = None) -> np.ndarray:
    """Block-diagonal [[0, 1], [-1, 0]] on the given indices (all when None)."""
    idx = range(n) if subset is None else _index_list(subset, n)
    j = np.zeros((2 * n, 2 * n))
    for i in idx:
        j[2 * i, 2 * i + 1] = 1.0
        j[2 * i + 1, 2 * i] = -1.0
    return j


def pfpp_pmf(kk: PfaffianKernel, subset: Iterable[int]) -> float:
    """P(Y = S) = (-1)^{|S^c|} Pf(K - J_{S^c})."""
    chosen = set(int(i) for i in subset)
    comp = [i for i in range(1, kk.n + 1) if i not in chosen]
    val = (-1) ** len(comp) * pfaffian(kk.matrix - j_mask(kk.n, comp))
    p = _real_or_raise(val, "pmf")
    if p < -1e-8:
        raise InvalidKernelError(f"negative probability {p:.3g}")
    return p


def expected_parity(kk: PfaffianKernel) -> float:
    """E[(-1)^{|Y|}] = Pf(J - 2K)."""
    return _real_or_raise(pfaffian(j_mask(kk.n) - 2 * kk.matrix), "parity")
