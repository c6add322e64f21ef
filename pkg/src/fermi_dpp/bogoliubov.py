"""Bogoliubov-de Gennes Hamiltonians: diagonalization and particle-hole factorization.

Conventions: the Nambu vector is ``(c^*; c)``, the BdG matrix is
``[[-conj(M), -conj(D)], [D, M]]`` and the Bogoliubov matrix W satisfies
``H_BdG = W^* diag(-eps, eps) W`` with ``eps >= 0`` ascending.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .kernels import SMatrix, sigmoid
from .numerics import (
    GivensRotation,
    apply_givens,
    as_complex_matrix,
    max_abs,
    pfaffian,
    row_params_to_zero,
    skew_real_canonical,
)

PH_THRESHOLD = 1e-10
SKIP_TOL = 1e-12


class MalformedHamiltonianError(ValueError):
    pass


class FactorizationError(RuntimeError):
    pass


def swap_blocks(n: int) -> np.ndarray:
    """The involution C = [[0, I], [I, 0]]."""
    z, i = np.zeros((n, n)), np.eye(n)
    return np.block([[z, i], [i, z]])


def majorana_change(n: int) -> np.ndarray:
    """Omega = (1/sqrt 2) [[I, I], [iI, -iI]]."""
    i = np.eye(n)
    return np.block([[i, i], [1j * i, -1j * i]]) / np.sqrt(2)


@dataclass(frozen=True)
class BdGHamiltonian:
    m: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.m, "M")
        d = as_complex_matrix(self.delta, "Delta")
        if m.shape != d.shape or m.shape[0] != m.shape[1]:
            raise MalformedHamiltonianError("M and Delta must be square of equal size")
        if max_abs(m - m.conj().T) > 1e-8:
            raise MalformedHamiltonianError("M is not Hermitian")
        if max_abs(d + d.T) > 1e-8:
            raise MalformedHamiltonianError("Delta is not skew-symmetric")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "delta", d)

    @property
    def n(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True)
class BogoliubovTransform:
    w: np.ndarray
    epsilons: np.ndarray
    r_orth: np.ndarray
    a_skew: np.ndarray
    det_w: int

    @property
    def n(self) -> int:
        return len(self.epsilons)

    @property
    def w1(self) -> np.ndarray:
        return self.w[self.n:, self.n:]

    @property
    def w2(self) -> np.ndarray:
        return self.w[self.n:, : self.n]

    @classmethod
    def from_rotation(cls, r: np.ndarray, epsilons=None) -> "BogoliubovTransform":
        """Transform W = Omega^* R Omega for a given real orthogonal R."""
        r = np.real_if_close(np.asarray(r)).astype(float)
        n = r.shape[0] // 2
        eps = np.zeros(n) if epsilons is None else np.asarray(epsilons, dtype=float)
        om = majorana_change(n)
        w = om.conj().T @ r @ om
        d = np.diag(eps)
        z = np.zeros((n, n))
        canon = np.block([[z, d], [-d, z]])
        a = r.T @ canon @ r
        det = int(np.sign(np.linalg.det(r)))
        return cls(w, eps, r, a, det)


def build_bdg_matrix(h: BdGHamiltonian) -> np.ndarray:
    return np.block([[-h.m.conj(), -h.delta.conj()], [h.delta, h.m]])


def diagonalize_bdg(h: BdGHamiltonian) -> BogoliubovTransform:
    n = h.n
    om = majorana_change(n)
    inner = np.block([[h.delta, h.m], [-h.m.conj(), -h.delta.conj()]])
    a = -1j * om.conj() @ inner @ om.conj().T
    scale = max(max_abs(a), 1.0)
    if max_abs(a.imag) > 1e-8 * scale or max_abs(a + a.T) > 1e-8 * scale:
        raise MalformedHamiltonianError("Majorana matrix is not real skew-symmetric")
    a = a.real
    a = 0.5 * (a - a.T)
    canon = skew_real_canonical(a)
    r = canon.rotation.real
    w = om.conj().T @ r @ om
    sign, _ = np.linalg.slogdet(r)
    return BogoliubovTransform(w, canon.epsilons, r, a, int(np.sign(sign)))


def s_matrix_thermal(t: BogoliubovTransform, beta: float) -> SMatrix:
    if not beta > 0:
        raise ValueError("beta must be positive")
    wb = t.w.conj()
    occ = np.concatenate([sigmoid(beta * t.epsilons), sigmoid(-beta * t.epsilons)])
    s = wb.conj().T @ np.diag(occ) @ wb
    return SMatrix(0.5 * (s + s.conj().T))


def s_matrix_projective(t: BogoliubovTransform, c: Iterable[int]) -> SMatrix:
    n = t.n
    chosen = np.zeros(n)
    for k in c:
        if not 1 <= k <= n:
            raise ValueError(f"mode {k} outside 1..{n}")
        chosen[k - 1] = 1.0
    wb = t.w.conj()
    s = wb.conj().T @ np.diag(np.concatenate([1 - chosen, chosen])) @ wb
    return SMatrix(0.5 * (s + s.conj().T))


# ----------------------------------------------------------------------------
# particle-hole factorization


@dataclass(frozen=True)
class DoubleGivens:
    rotation: GivensRotation


@dataclass(frozen=True)
class ParticleHole:
    pass


Step = Union[DoubleGivens, ParticleHole]


@dataclass
class PhFactorization:
    n: int
    v: np.ndarray
    left_rotations: list
    steps: list = field(default_factory=list)
    d_phases: np.ndarray = None

    @property
    def ph_count(self) -> int:
        return sum(isinstance(s, ParticleHole) for s in self.steps)

    @property
    def double_count(self) -> int:
        return sum(isinstance(s, DoubleGivens) for s in self.steps)

    def o_adjoint(self) -> np.ndarray:
        """O^*: the product of step matrices in the order they were applied."""
        n = self.n
        out = np.eye(2 * n, dtype=complex)
        for step in self.steps:
            out = _apply_step(out, step, n)
        return out

    def o_matrix(self) -> np.ndarray:
        return self.o_adjoint().conj().T


def _apply_step(x: np.ndarray, step: Step, n: int) -> np.ndarray:
    """Right-multiply by Gamma^* (double Givens) or by B (particle-hole)."""
    if isinstance(step, ParticleHole):
        x = x.copy()
        x[:, [n - 1, 2 * n - 1]] = x[:, [2 * n - 1, n - 1]]
        return x
    rot = step.rotation
    left = apply_givens(x[:, :n], rot, side="right", conjugate=True)
    mirrored = GivensRotation.make(rot.l1, rot.l2, rot.theta, -rot.phi)
    right = apply_givens(x[:, n:], mirrored, side="right", conjugate=True)
    return np.hstack([left, right])


def factorize_particle_hole(t: BogoliubovTransform) -> PhFactorization:
    """Write the lower block row (W2 | W1) as V^* (0 | D) O.

    Left Givens rotations first clear the upper-left triangle of W2; then
    each row of the left block is cleared from left to right with double
    Givens rotations, and a particle-hole swap of mode N removes whatever
    is left in the last column.
    """
    n = t.n
    x = np.array(t.w[n:, :], dtype=complex)
    v = np.eye(n, dtype=complex)
    left_rots = []
    for j in range(n - 1):
        for i in range(n - 1 - j):
            a, b = x[i, j], x[i + 1, j]
            if abs(a) <= SKIP_TOL:
                continue
            theta, phi = row_params_to_zero(np.conj(a), np.conj(b), "first")
            rot = GivensRotation.make(i + 1, i + 2, theta, phi)
            x = apply_givens(x, rot, side="left")
            v = apply_givens(v, rot, side="left")
            x[i, j] = 0.0
            left_rots.append(rot)
    fact = PhFactorization(n, v, left_rots)
    for i in range(n):
        for j in range(n - 1):
            if abs(x[i, j]) <= SKIP_TOL:
                continue
            theta, phi = row_params_to_zero(x[i, j], x[i, j + 1], "first")
            step = DoubleGivens(GivensRotation.make(j + 1, j + 2, theta, phi))
            x = _apply_step(x, step, n)
            x[i, j] = 0.0
            fact.steps.append(step)
        if abs(x[i, n - 1]) > PH_THRESHOLD:
            step = ParticleHole()
            x = _apply_step(x, step, n)
            fact.steps.append(step)
    leftover = max_abs(x[:, :n])
    right = x[:, n:]
    if leftover > 1e-8 or max_abs(right @ right.conj().T - np.eye(n)) > 1e-8:
        raise FactorizationError(f"particle-hole sweep left residual {leftover:.3g}")
    if max_abs(right - np.diag(np.diag(right))) > 1e-8:
        # rows whose left block started out empty can end with a mixed
        # unitary right block; fold it into V so that D is the identity
        fact.v = right.conj().T @ fact.v
        d = np.ones(n, dtype=complex)
    else:
        d = np.diag(right).copy()
    fact.d_phases = d / np.abs(d)
    if full_identity_residual(t, fact) > 1e-8:
        raise FactorizationError("factorization does not reconstruct W")
    return fact


def replay_residual(t: BogoliubovTransform, f: PhFactorization) -> float:
    """max |V (W2 | W1) O^* - (0 | D)|."""
    n = t.n
    got = f.v @ t.w[n:, :] @ f.o_adjoint()
    want = np.hstack([np.zeros((n, n)), np.diag(f.d_phases)])
    return max_abs(got - want)


def full_identity_residual(t: BogoliubovTransform, f: PhFactorization) -> float:
    """max |diag(D conj(V), conj(D) V) W O^* - I|."""
    n = t.n
    d = np.diag(f.d_phases)
    z = np.zeros((n, n))
    left = np.block([[d @ f.v.conj(), z], [z, d.conj() @ f.v]])
    return max_abs(left @ t.w @ f.o_adjoint() - np.eye(2 * n))


def slater_factor(f: PhFactorization, c: Iterable[int]) -> np.ndarray:
    """Rows of V^T conj(D) indexed by c: the number-conserving part of the state."""
    idx = sorted(int(k) - 1 for k in c)
    return (f.v.T @ np.diag(f.d_phases.conj()))[idx, :]


# ----------------------------------------------------------------------------
# parity


def parity_prediction(t: BogoliubovTransform, beta: float | None = None, c: Iterable[int] | None = None) -> float:
    """Expected (-1)^{|Y|}: thermal when ``beta`` is given, projective for ``c``."""
    if (beta is None) == (c is None):
        raise ValueError("give exactly one of beta (thermal) or c (projective)")
    if c is not None:
        return float((-1) ** len(set(c)) * t.det_w)
    if np.any(t.epsilons <= 1e-12):
        raise ValueError("thermal parity needs strictly positive excitation energies")
    return float(t.det_w * np.prod(np.tanh(beta * t.epsilons / 2)))


def majorana_form(h: BdGHamiltonian) -> np.ndarray:
    """Real skew A_M with H = (i/2) gamma^T A_M gamma in interleaved Majoranas."""
    n = h.n
    om = majorana_change(n)
    inner = np.block([[h.delta, h.m], [-h.m.conj(), -h.delta.conj()]])
    a = -1j * om.conj() @ inner @ om.conj().T
    scale = max(max_abs(a), 1.0)
    if max_abs(a.imag) > 1e-8 * scale:
        raise MalformedHamiltonianError("Majorana matrix has an imaginary part")
    perm = np.ravel(np.column_stack([np.arange(n), np.arange(n, 2 * n)]))
    am = a.real[np.ix_(perm, perm)]
    return 0.5 * (am - am.T)


def majorana_pfaffian(h: BdGHamiltonian) -> float:
    return float(np.real(pfaffian(majorana_form(h))))
