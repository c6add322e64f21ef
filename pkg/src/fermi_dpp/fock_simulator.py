"""Statevector simulation of fermionic circuits in the occupation basis.

Mode ``k`` (1-based) is stored in bit ``k - 1`` of the amplitude index, so
mode 1 is the least significant bit. Jordan-Wigner strings run over lower
modes: ``a_k^* |n> = (-1)^{n_1 + ... + n_{k-1}} |n + e_k>`` when ``n_k = 0``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .numerics import GivensRotation

MAX_SIM_MODES = 24
MAX_DENSE_MODES = 6
SHOT_CHUNK = 4096


@dataclass
class FockState:
    n_modes: int
    amplitudes: np.ndarray

    @classmethod
    def vacuum(cls, n_modes: int) -> "FockState":
        if not 1 <= n_modes <= MAX_SIM_MODES:
            raise ValueError(f"simulator supports 1..{MAX_SIM_MODES} modes, got {n_modes}")
        amps = np.zeros(2**n_modes, dtype=complex)
        amps[0] = 1.0
        return cls(n_modes, amps)

    @classmethod
    def basis(cls, n_modes: int, occupied: Iterable[int]) -> "FockState":
        s = cls.vacuum(n_modes)
        s.amplitudes[0] = 0.0
        s.amplitudes[subset_to_index(occupied)] = 1.0
        return s

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "FockState":
        return FockState(self.n_modes, self.amplitudes.copy())


# ----------------------------------------------------------------------------
# index helpers


def subset_to_index(subset: Iterable[int]) -> int:
    idx = 0
    for k in subset:
        idx |= 1 << (int(k) - 1)
    return idx


def index_to_subset(idx: int, n_modes: int) -> tuple[int, ...]:
    return tuple(k + 1 for k in range(n_modes) if (idx >> k) & 1)


def index_to_bitstring(idx: int, n_modes: int) -> str:
    """Occupations written n_1 n_2 ... n_N from left to right."""
    return "".join("1" if (idx >> k) & 1 else "0" for k in range(n_modes))


def popcounts(n_modes: int) -> np.ndarray:
    """Hamming weight of every index in [0, 2^N)."""
    counts = np.zeros(2**n_modes, dtype=np.int64)
    for k in range(n_modes):
        counts[1 << k: 1 << (k + 1)] = counts[: 1 << k] + 1
    return counts


def _masked_parity(indices: np.ndarray, mask: int) -> np.ndarray:
    x = indices & mask
    parity = np.zeros_like(x)
    while np.any(x):
        parity ^= x & 1
        x >>= 1
    return parity


# ----------------------------------------------------------------------------
# gates


def apply_fermionic_givens(s: FockState, rot: GivensRotation, inplace: bool = False) -> FockState:
    """Apply the two-mode Givens unitary with exact Jordan-Wigner signs.

    The operator maps ``a_{l1}^* -> c a_{l1}^* + e^{-i phi} s a_{l2}^*`` and
    ``a_{l2}^* -> -e^{i phi} s a_{l1}^* + c a_{l2}^*`` under conjugation.
    """
    out = s if inplace else s.copy()
    n = s.n_modes
    if rot.l2 > n:
        raise IndexError(f"mode {rot.l2} out of range for {n} modes")
    b1, b2 = 1 << (rot.l1 - 1), 1 << (rot.l2 - 1)
    idx = np.arange(2**n, dtype=np.int64)
    first = idx[((idx & b1) != 0) & ((idx & b2) == 0)]
    second = first ^ (b1 | b2)
    between = (b2 - 1) & ~((b1 << 1) - 1)
    sign = 1.0 - 2.0 * _masked_parity(first, between)
    c, sn = np.cos(rot.theta), np.sin(rot.theta)
    ph = np.exp(1j * rot.phi)
    amp = out.amplitudes
    pa, pb = amp[first].copy(), amp[second].copy()
    amp[first] = c * pa - sign * ph * sn * pb
    amp[second] = sign * np.conj(ph) * sn * pa + c * pb
    return out


def apply_mode_flip(s: FockState, k: int, inplace: bool = False) -> FockState:
    """Pauli X on qubit k: flips the occupation of mode k without a string."""
    if not 1 <= k <= s.n_modes:
        raise IndexError(f"mode {k} out of range for {s.n_modes} modes")
    out = s if inplace else s.copy()
    idx = np.arange(2**s.n_modes, dtype=np.int64)
    out.amplitudes = out.amplitudes[idx ^ (1 << (k - 1))]
    return out


def run_circuit(circ) -> FockState:
    """Start from the vacuum and apply every gate up to the final measurement."""
    from .circuit import FGivens, MeasureAll, ParticleHoleX, XGate

    state = FockState.vacuum(circ.n_qubits)
    for gate in circ.gates:
        if isinstance(gate, XGate):
            apply_mode_flip(state, gate.qubit, inplace=True)
        elif isinstance(gate, ParticleHoleX):
            apply_mode_flip(state, circ.n_qubits, inplace=True)
        elif isinstance(gate, FGivens):
            apply_fermionic_givens(state, gate.rotation, inplace=True)
        elif isinstance(gate, MeasureAll):
            break
        else:
            raise TypeError(f"unknown gate {gate!r}")
    return state


def exact_distribution(s: FockState) -> np.ndarray:
    p = np.abs(s.amplitudes) ** 2
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"state is not normalized (norm^2 = {total})")
    return p


# ----------------------------------------------------------------------------
# sampling


@dataclass
class Histogram:
    n_modes: int
    counts: dict = field(default_factory=dict)

    @property
    def shots(self) -> int:
        return int(sum(self.counts.values()))

    @classmethod
    def from_indices(cls, n_modes: int, indices: np.ndarray) -> "Histogram":
        vals, cnt = np.unique(np.asarray(indices, dtype=np.int64), return_counts=True)
        return cls(n_modes, {int(v): int(c) for v, c in zip(vals, cnt)})

    @classmethod
    def from_subsets(cls, n_modes: int, subsets: Iterable[Sequence[int]]) -> "Histogram":
        return cls.from_indices(n_modes, np.array([subset_to_index(s) for s in subsets], dtype=np.int64))

    def frequencies(self) -> np.ndarray:
        f = np.zeros(2**self.n_modes)
        for k, c in self.counts.items():
            f[k] = c
        return f / max(self.shots, 1)

    def to_csv(self) -> str:
        lines = ["bitstring,subset,count,frequency"]
        shots = self.shots
        for idx in sorted(self.counts):
            sub = index_to_subset(idx, self.n_modes)
            label = "{" + " ".join(str(k) for k in sub) + "}"
            lines.append(
                f"{index_to_bitstring(idx, self.n_modes)},{label},{self.counts[idx]},"
                f"{self.counts[idx] / shots:.10f}"
            )
        return "\n".join(lines) + "\n"


def shot_generator(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based stream for one chunk of shots."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), chunk + 1]))


def _draw_chunk(args):
    cdf, n_modes, seed, chunk, size, noise = args
    gen = shot_generator(seed, chunk)
    u = gen.random(size)
    out = np.searchsorted(cdf, u, side="right")
    out = np.minimum(out, len(cdf) - 1).astype(np.int64)
    if noise:
        flips = gen.random((size, n_modes)) < noise
        weights = (1 << np.arange(n_modes, dtype=np.int64))
        out ^= flips.astype(np.int64) @ weights
    return out


def sample_indices(
    probabilities: np.ndarray,
    n_modes: int,
    shots: int,
    seed: int,
    noise: float | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Draw outcome indices in fixed-size chunks, each with its own stream.

    The result depends only on (probabilities, shots, seed, noise); the
    number of worker threads only changes how chunks are scheduled.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    if noise is not None and not 0 <= noise < 1:
        raise ValueError(f"noise probability {noise} outside [0, 1)")
    p = np.clip(np.asarray(probabilities, dtype=float), 0, None)
    cdf = np.cumsum(p / p.sum())
    jobs = []
    start = 0
    chunk = 0
    while start < shots:
        size = min(SHOT_CHUNK, shots - start)
        jobs.append((cdf, n_modes, int(seed), chunk, size, noise or 0.0))
        start += size
        chunk += 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_draw_chunk, jobs))
    else:
        parts = [_draw_chunk(j) for j in jobs]
    return np.concatenate(parts)


def sample_occupations(
    s: FockState,
    shots: int,
    seed: int,
    noise: float | None = None,
    workers: int = 1,
) -> Histogram:
    p = exact_distribution(s)
    idx = sample_indices(p, s.n_modes, shots, seed, noise, workers)
    return Histogram.from_indices(s.n_modes, idx)


# ----------------------------------------------------------------------------
# dense Jordan-Wigner oracle


_I2 = np.eye(2, dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # (sigma_x + i sigma_y)/2


def _kron_modes(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product with mode 1 as the least significant factor."""
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(f, out)
    return out


def jw_annihilators(n_modes: int) -> list[np.ndarray]:
    """Dense matrices of a_1 .. a_N on 2^N dimensions."""
    if n_modes > MAX_DENSE_MODES:
        raise ValueError(f"dense oracle limited to {MAX_DENSE_MODES} modes")
    ops = []
    for j in range(n_modes):
        factors = [_Z] * j + [_LOWER] + [_I2] * (n_modes - j - 1)
        ops.append(_kron_modes(factors))
    return ops


def dense_number_operator(n_modes: int, k: int) -> np.ndarray:
    """(I - sigma_z)/2 on qubit k, built without any creation operators."""
    factors = [_I2] * n_modes
    factors[k - 1] = 0.5 * (_I2 - _Z)
    return _kron_modes(factors)


def dense_parity(n_modes: int) -> np.ndarray:
    return _kron_modes([_Z] * n_modes)


def dense_quadratic_hamiltonian(h: np.ndarray) -> np.ndarray:
    """sum_ij H_ij a_i^* a_j."""
    a = jw_annihilators(h.shape[0])
    n = h.shape[0]
    out = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if h[i, j] != 0:
                out += h[i, j] * a[i].conj().T @ a[j]
    return out


def dense_bdg_hamiltonian(m: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """(1/2) sum M_ij (c_i^* c_j - c_j c_i^*) + (1/2) sum (D_ij c_i^* c_j^* - conj(D_ij) c_i c_j)."""
    n = m.shape[0]
    a = jw_annihilators(n)
    ad = [x.conj().T for x in a]
    out = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out += 0.5 * m[i, j] * (ad[i] @ a[j] - a[j] @ ad[i])
            out += 0.5 * (delta[i, j] * ad[i] @ ad[j] - np.conj(delta[i, j]) * a[i] @ a[j])
    return out


def dense_fermionic_givens(n_modes: int, rot: GivensRotation) -> np.ndarray:
    """T exp(theta (a2^* a1 - a1^* a2)) T^* with T = exp(i phi (n1 - n2)/2)."""
    a = jw_annihilators(n_modes)
    a1, a2 = a[rot.l1 - 1], a[rot.l2 - 1]
    gen = a2.conj().T @ a1 - a1.conj().T @ a2
    v = _expm_hermitian(1j * gen, -1j * rot.theta)
    nn = a1.conj().T @ a1 - a2.conj().T @ a2
    t = _expm_hermitian(nn, 0.5j * rot.phi)
    return t @ v @ t.conj().T


def _expm_hermitian(h: np.ndarray, scale: complex) -> np.ndarray:
    """exp(scale * H) for Hermitian H, via numpy's LAPACK eigensolver."""
    vals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (vecs * np.exp(scale * vals)) @ vecs.conj().T


def _density_matrix(spec: dict) -> tuple[np.ndarray, int]:
    kind = spec["kind"]
    if kind == "pure":
        psi = np.asarray(spec["state"], dtype=complex)
        n = int(round(np.log2(psi.size)))
        psi = psi / np.linalg.norm(psi)
        return np.outer(psi, psi.conj()), n
    if kind == "thermal":
        h = np.asarray(spec["h"], dtype=complex)
        n = h.shape[0]
        mu = float(spec.get("mu", 0.0))
        op = dense_quadratic_hamiltonian(h - mu * np.eye(n))
    elif kind == "bdg":
        m = np.asarray(spec["m"], dtype=complex)
        n = m.shape[0]
        op = dense_bdg_hamiltonian(m, np.asarray(spec["delta"], dtype=complex))
    else:
        raise ValueError(f"unknown state kind {kind!r}")
    if n > MAX_DENSE_MODES:
        raise ValueError(f"dense oracle limited to {MAX_DENSE_MODES} modes")
    vals = np.linalg.eigvalsh(0.5 * (op + op.conj().T))
    rho = _expm_hermitian(op - vals[0] * np.eye(op.shape[0]), -float(spec["beta"]))
    return rho / np.trace(rho), n


def dense_expectation_oracle(spec: dict, indices: Sequence[int]) -> float:
    """tr(rho N_{i1} ... N_{ik}) computed with dense Jordan-Wigner matrices.

    ``spec`` is one of ``{"kind": "pure", "state": amplitudes}``,
    ``{"kind": "thermal", "h": H, "beta": b, "mu": m}`` or
    ``{"kind": "bdg", "m": M, "delta": D, "beta": b}``.
    """
    rho, n = _density_matrix(spec)
    if n > MAX_DENSE_MODES:
        raise ValueError(f"dense oracle limited to {MAX_DENSE_MODES} modes")
    a = jw_annihilators(n)
    op = np.eye(2**n, dtype=complex)
    for i in indices:
        op = op @ (a[i - 1].conj().T @ a[i - 1])
    return float(np.real(np.trace(rho @ op)))


def dense_two_point(spec: dict) -> tuple[np.ndarray, np.ndarray]:
    """(<c_i^* c_j>, <c_i^* c_j^*>) for the state described by ``spec``."""
    rho, n = _density_matrix(spec)
    a = jw_annihilators(n)
    k = np.zeros((n, n), dtype=complex)
    p = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            k[i, j] = np.trace(rho @ a[i].conj().T @ a[j])
            p[i, j] = np.trace(rho @ a[i].conj().T @ a[j].conj().T)
    return k, p
