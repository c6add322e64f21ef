"""Dense complex linear algebra used across the package.

Matrices are plain ``numpy`` complex arrays. This module provides the few
building blocks that the rest of the code relies on and that we want to
control precisely. Givens rotation parameters come first. The spectral
part holds a cyclic Jacobi Hermitian eigensolver, Parlett-Reid Pfaffians
and the canonical form of real skew-symmetric matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ABS_FLOOR = 1e-14


class DegenerateInputError(ValueError):
    """Raised when a rotation is requested for a pair of zeros."""


class NotHermitianError(ValueError):
    pass


class NotSkewError(ValueError):
    pass


def as_complex_matrix(m, name: str = "matrix") -> np.ndarray:
    """Convert to a 2-D complex128 array and check that all entries are finite."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


# ----------------------------------------------------------------------------
# Givens rotations


def _wrap_phase(phi: float) -> float:
    """Map an angle to (-pi, pi]."""
    phi = float(np.angle(np.exp(1j * phi)))
    if phi <= -np.pi:
        phi += 2 * np.pi
    return phi


@dataclass(frozen=True)
class GivensRotation:
    """Rotation acting on the 1-based coordinates ``l1 < l2``.

    The 2x2 block is ``[[cos t, e^{-i phi} sin t], [-e^{i phi} sin t, cos t]]``.
    """

    l1: int
    l2: int
    theta: float
    phi: float

    def __post_init__(self):
        if not (1 <= self.l1 < self.l2):
            raise ValueError(f"need 1 <= l1 < l2, got ({self.l1}, {self.l2})")
        if not (-1e-12 <= self.theta <= np.pi / 2 + 1e-12):
            raise ValueError(f"theta={self.theta} outside [0, pi/2]")
        if not (-np.pi < self.phi <= np.pi):
            raise ValueError(f"phi={self.phi} outside (-pi, pi]")

    @classmethod
    def make(cls, l1: int, l2: int, theta: float, phi: float) -> "GivensRotation":
        theta = float(min(max(theta, 0.0), np.pi / 2))
        return cls(int(l1), int(l2), theta, _wrap_phase(phi))

    def block(self) -> np.ndarray:
        return givens_block(self.theta, self.phi)

    def matrix(self, n: int) -> np.ndarray:
        """Full n x n unitary embedding of the rotation."""
        g = np.eye(n, dtype=complex)
        i, j = self.l1 - 1, self.l2 - 1
        b = self.block()
        g[np.ix_([i, j], [i, j])] = b
        return g

    def to_dict(self) -> dict:
        return {"l1": self.l1, "l2": self.l2, "theta": self.theta, "phi": self.phi}

    @classmethod
    def from_dict(cls, d: dict) -> "GivensRotation":
        return cls(int(d["l1"]), int(d["l2"]), float(d["theta"]), float(d["phi"]))


def givens_block(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[c, np.exp(-1j * phi) * s], [-np.exp(1j * phi) * s, c]], dtype=complex
    )


def givens_params_to_zero(x: complex, y: complex) -> tuple[float, float]:
    """Angles (theta, phi) such that the Givens block maps (x, y) to (r, 0).

    ``|r| = sqrt(|x|^2 + |y|^2)``. When x or y vanishes the phase is set to 0.
    """
    ax, ay = abs(x), abs(y)
    if ax == 0 and ay == 0:
        raise DegenerateInputError("cannot build a rotation from (0, 0)")
    theta = float(np.arctan2(ay, ax))
    if ax == 0 or ay == 0:
        phi = 0.0
    else:
        phi = float(np.angle(np.conj(x) * y))
    return theta, _wrap_phase(phi)


def row_params_to_zero(x: complex, y: complex, target: str = "second") -> tuple[float, float]:
    """Angles zeroing one entry of the row vector ``(x, y) @ G^*``.

    ``target`` selects which entry is annihilated: ``"second"`` (the l2
    position, mass moves to l1) or ``"first"`` (mass moves to l2).
    """
    ax, ay = abs(x), abs(y)
    if ax == 0 and ay == 0:
        raise DegenerateInputError("cannot build a rotation from (0, 0)")
    if target == "second":
        return givens_params_to_zero(np.conj(x), np.conj(y))
    if target != "first":
        raise ValueError(f"unknown target {target!r}")
    # (x, y) G^* = (c x + e^{i phi} s y, ...); choose c = |y|/rho, e^{i phi} = -x conj(y)/|xy|
    theta = float(np.arctan2(ax, ay))
    if ax == 0 or ay == 0:
        phi = 0.0
    else:
        phi = float(np.angle(-x * np.conj(y)))
    return theta, _wrap_phase(phi)


def apply_givens(
    m: np.ndarray,
    rot: GivensRotation,
    side: str = "left",
    conjugate: bool = False,
    inplace: bool = False,
) -> np.ndarray:
    """Multiply by a Givens rotation.

    ``side="left"`` returns ``G @ M`` (rows l1, l2 change), ``side="right"``
    returns ``M @ G`` (columns change). With ``conjugate`` the adjoint ``G^*``
    is used instead.
    """
    out = m if inplace else np.array(m, dtype=complex)
    i, j = rot.l1 - 1, rot.l2 - 1
    b = rot.block()
    if conjugate:
        b = b.conj().T
    if side == "left":
        if j >= out.shape[0]:
            raise IndexError(f"rotation ({rot.l1}, {rot.l2}) out of range for {out.shape[0]} rows")
        ri, rj = out[i].copy(), out[j].copy()
        out[i] = b[0, 0] * ri + b[0, 1] * rj
        out[j] = b[1, 0] * ri + b[1, 1] * rj
    elif side == "right":
        if j >= out.shape[1]:
            raise IndexError(f"rotation ({rot.l1}, {rot.l2}) out of range for {out.shape[1]} columns")
        ci, cj = out[:, i].copy(), out[:, j].copy()
        out[:, i] = ci * b[0, 0] + cj * b[1, 0]
        out[:, j] = ci * b[0, 1] + cj * b[1, 1]
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return out


# ----------------------------------------------------------------------------
# Hermitian eigendecomposition


@dataclass(frozen=True)
class HermitianEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def check_hermitian(h: np.ndarray, rtol: float = 1e-8, name: str = "matrix") -> None:
    if h.shape[0] != h.shape[1]:
        raise NotHermitianError(f"{name} is not square: {h.shape}")
    scale = max(max_abs(h), ABS_FLOOR)
    if max_abs(h - h.conj().T) > rtol * scale:
        raise NotHermitianError(f"{name} is not Hermitian")


def hermitian_eig(h, max_sweeps: int = 100, tol: float = 1e-12) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.

    Eigenvalues are returned in ascending order with matching eigenvector
    columns. Convergence is declared when the off-diagonal Frobenius norm
    falls below ``tol * ||H||_F``.
    """
    a = as_complex_matrix(h, "H")
    check_hermitian(a, name="H")
    n = a.shape[0]
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    total = np.linalg.norm(a)
    threshold = max(tol * total, ABS_FLOOR * 1e-2)

    def off_norm(x):
        return np.linalg.norm(x - np.diag(np.diag(x)))

    for _ in range(max_sweeps):
        if off_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                elif tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # phase fix diag(1, conj(phase)) followed by a real rotation
                rot = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ rot
    evals = np.real(np.diag(a))
    order = np.argsort(evals, kind="stable")
    return HermitianEig(evals[order], v[:, order])


def matrix_function_hermitian(
    h, f: Callable[[np.ndarray], np.ndarray], eig: HermitianEig | None = None
) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum."""
    e = eig if eig is not None else hermitian_eig(h)
    u = e.eigenvectors
    vals = np.asarray(f(e.eigenvalues))
    return (u * vals) @ u.conj().T


# ----------------------------------------------------------------------------
# Pfaffians


def pfaffian(a) -> complex:
    """Pfaffian by Parlett-Reid skew tridiagonalization with partial pivoting.

    The antisymmetric part of ``a`` is used. Odd dimensions give 0.
    """
    m = as_complex_matrix(a, "A")
    n = m.shape[0]
    if m.shape[1] != n:
        raise ValueError(f"Pfaffian needs a square matrix, got {m.shape}")
    if n == 0:
        return 1.0 + 0j
    if n % 2:
        return 0j
    m = 0.5 * (m - m.T)
    value = 1.0 + 0j
    for k in range(0, n - 1, 2):
        piv = k + 1 + int(np.argmax(np.abs(m[k + 1:, k])))
        if piv != k + 1:
            m[[k + 1, piv], :] = m[[piv, k + 1], :]
            m[:, [k + 1, piv]] = m[:, [piv, k + 1]]
            value = -value
        if m[k + 1, k] == 0:
            return 0j
        value *= m[k, k + 1]
        if k + 2 < n:
            tau = m[k, k + 2:] / m[k, k + 1]
            col = m[k + 2:, k + 1]
            m[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return complex(value)


# ----------------------------------------------------------------------------
# Real skew-symmetric canonical form


@dataclass(frozen=True)
class SkewCanonicalForm:
    rotation: np.ndarray
    epsilons: np.ndarray

    def block_form(self) -> np.ndarray:
        n = len(self.epsilons)
        d = np.diag(self.epsilons)
        z = np.zeros((n, n))
        return np.block([[z, d], [-d, z]])


def skew_real_canonical(a) -> SkewCanonicalForm:
    """Real orthogonal R and eps >= 0 (ascending) with R A R^T = [[0, D], [-D, 0]].

    Built from the Hermitian eigendecomposition of ``iA``: the real and
    imaginary parts of the positive-eigenvalue eigenvectors supply the row
    pairs of R, and the kernel of A is completed with an orthonormal basis.
    The remaining rotation freedom inside each pair is fixed so that an
    input already in canonical form returns R = I.
    """
    m = as_complex_matrix(a, "A")
    dim = m.shape[0]
    if m.shape[1] != dim or dim % 2:
        raise NotSkewError(f"need an even square matrix, got {m.shape}")
    scale = max(max_abs(m), ABS_FLOOR)
    if max_abs(m.imag) > 1e-12 * max(scale, 1.0):
        raise NotSkewError("matrix is not real")
    ar = m.real
    if max_abs(ar + ar.T) > 1e-10 * max(scale, 1.0):
        raise NotSkewError("matrix is not skew-symmetric")
    ar = 0.5 * (ar - ar.T)
    n = dim // 2
    eig = hermitian_eig(1j * ar)
    zero_tol = 1e-10 * scale
    pos = [k for k in range(dim) if eig.eigenvalues[k] > zero_tol]
    # keep the n largest at most; they pair with their conjugate negatives
    pos = pos[-n:] if len(pos) > n else pos
    n_pos = len(pos)
    n_zero = n - n_pos
    top, bottom, eps = [], [], []
    if n_zero:
        rows_nz = []
        for k in pos:
            u = eig.eigenvectors[:, k]
            rows_nz.append(np.sqrt(2) * u.imag)
            rows_nz.append(np.sqrt(2) * u.real)
        proj = np.eye(dim)
        if rows_nz:
            b = np.array(rows_nz)
            proj = proj - b.T @ b
        basis = _span_basis(proj, 2 * n_zero)
        for k in range(n_zero):
            top.append(basis[:, k])
            bottom.append(basis[:, n_zero + k])
            eps.append(0.0)
    for k in pos:
        u = eig.eigenvectors[:, k]
        t, b = _align_pair(np.sqrt(2) * u.imag, np.sqrt(2) * u.real)
        top.append(t)
        bottom.append(b)
        eps.append(float(eig.eigenvalues[k]))
    r = np.array(top + bottom)
    eps = np.array(eps)
    return SkewCanonicalForm(r.astype(complex), eps)


def _align_pair(t: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fix the SO(2) freedom of a (top, bottom) row pair.

    The pair is rotated so that, at the first coordinate where the pair has
    (nearly) maximal weight, the top row is positive and the bottom row is 0.
    Such a rotation commutes with the 2x2 block [[0, e], [-e, 0]].
    """
    w = t**2 + b**2
    j = int(np.argmax(w >= w.max() - 1e-12))
    rho = np.sqrt(w[j])
    c, s = t[j] / rho, b[j] / rho
    return c * t + s * b, -s * t + c * b


def _span_basis(proj: np.ndarray, count: int) -> np.ndarray:
    """Orthonormal basis of range(proj) from its columns taken in index order."""
    cols = []
    for j in range(proj.shape[1]):
        v = proj[:, j].astype(float).copy()
        for _ in range(2):
            for q in cols:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            cols.append(v / nv)
        if len(cols) == count:
            break
    if len(cols) < count:
        raise NotSkewError("could not complete the kernel basis")
    return np.array(cols).T


# ----------------------------------------------------------------------------
# JSON helpers


def matrix_to_json(m) -> dict:
    arr = as_complex_matrix(m)
    data = [[float(z.real), float(z.imag)] for z in arr.ravel()]
    return {"rows": int(arr.shape[0]), "cols": int(arr.shape[1]), "data": data}


def matrix_from_json(d: dict) -> np.ndarray:
    rows, cols = int(d["rows"]), int(d["cols"])
    data = d["data"]
    if len(data) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {len(data)}")
    flat = np.array([complex(re, im) for re, im in data], dtype=complex)
    return as_complex_matrix(flat.reshape(rows, cols))


def complex_list_to_json(values: Sequence[complex]) -> list:
    return [[float(np.real(z)), float(np.imag(z))] for z in values]


def complex_list_from_json(data) -> np.ndarray:
    return np.array([complex(re, im) for re, im in data], dtype=complex)
