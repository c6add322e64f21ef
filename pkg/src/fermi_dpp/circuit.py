"""Gate-level circuits: compilation from schedules and export to elementary gates.

Mode k lives on qubit k (1-based) with Jordan-Wigner strings on lower
indices. An FGivens gate is the number-conserving two-mode unitary whose
action on creation operators is given by its Givens block.

Ordering law: if a matrix is written as a product G_1 G_2 ... G_m of
single-particle rotations, the Fock operator is G_m applied first and G_1
last. Schedules list rotations in the order they right-multiply Q, so the
compilers emit them reversed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .bogoliubov import DoubleGivens, ParticleHole, PhFactorization, slater_factor
from .numerics import GivensRotation
from .qr_engine import CouplingGraph, RotationSchedule, schedule_sameh_kuck


@dataclass(frozen=True)
class XGate:
    qubit: int


@dataclass(frozen=True)
class FGivens:
    rotation: GivensRotation

    @classmethod
    def on(cls, q1: int, q2: int, theta: float, phi: float) -> "FGivens":
        return cls(GivensRotation.make(q1, q2, theta, phi))

    @property
    def qubits(self) -> tuple[int, int]:
        return self.rotation.l1, self.rotation.l2


@dataclass(frozen=True)
class ParticleHoleX:
    """Pauli X on the last mode, exchanging a_N and a_N^*."""


@dataclass(frozen=True)
class MeasureAll:
    pass


Gate = Union[XGate, FGivens, ParticleHoleX, MeasureAll]


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        for k, g in enumerate(self.gates):
            if isinstance(g, MeasureAll) and k != len(self.gates) - 1:
                raise ValueError("MeasureAll may only appear as the last gate")
            if isinstance(g, XGate) and not 1 <= g.qubit <= self.n_qubits:
                raise ValueError(f"X on qubit {g.qubit} outside 1..{self.n_qubits}")
            if isinstance(g, FGivens) and g.rotation.l2 > self.n_qubits:
                raise ValueError(f"FGivens on {g.qubits} outside 1..{self.n_qubits}")

    @property
    def fgivens(self) -> list[FGivens]:
        return [g for g in self.gates if isinstance(g, FGivens)]

    def x_count(self) -> int:
        return sum(isinstance(g, (XGate, ParticleHoleX)) for g in self.gates)

    def to_json(self) -> dict:
        out = []
        for g in self.gates:
            if isinstance(g, XGate):
                out.append({"kind": "x", "qubit": g.qubit})
            elif isinstance(g, FGivens):
                out.append({"kind": "fgivens", **g.rotation.to_dict()})
            elif isinstance(g, ParticleHoleX):
                out.append({"kind": "ph_x"})
            else:
                out.append({"kind": "measure"})
        return {"n_qubits": self.n_qubits, "gates": out}

    @classmethod
    def from_json(cls, d: dict) -> "Circuit":
        gates = []
        for g in d["gates"]:
            kind = g["kind"]
            if kind == "x":
                gates.append(XGate(int(g["qubit"])))
            elif kind == "fgivens":
                gates.append(FGivens(GivensRotation.from_dict(g)))
            elif kind == "ph_x":
                gates.append(ParticleHoleX())
            elif kind == "measure":
                gates.append(MeasureAll())
            else:
                raise ValueError(f"unknown gate kind {kind!r}")
        return cls(int(d["n_qubits"]), gates)


# ----------------------------------------------------------------------------
# compilation


def _slater_gates(s: RotationSchedule) -> list:
    gates: list = [XGate(p) for p in s.pivots]
    gates += [FGivens(rot) for rot in reversed(s.rotations)]
    return gates


def compile_projection_circuit(s: RotationSchedule) -> Circuit:
    """X on the pivot qubits, then the schedule's rotations last-to-first."""
    return Circuit(s.n_modes, _slater_gates(s) + [MeasureAll()])


def compile_pfpp_circuit(f: PhFactorization, c: Iterable[int], scheduler=schedule_sameh_kuck) -> Circuit:
    """Slater part for the modes in c followed by the particle-hole sweep.

    The particle-hole steps are emitted in reverse of the order in which the
    factorization found them.
    """
    c = sorted(set(int(k) for k in c))
    n = f.n
    gates: list = []
    if c:
        q = slater_factor(f, c)
        gates += _slater_gates(scheduler(q))
    for step in reversed(f.steps):
        if isinstance(step, ParticleHole):
            gates.append(ParticleHoleX())
        elif isinstance(step, DoubleGivens):
            gates.append(FGivens(step.rotation))
    gates.append(MeasureAll())
    return Circuit(n, gates)


# ----------------------------------------------------------------------------
# elementary decomposition


def rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


# CNOT with control on the first tensor factor
_CX01 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CX10 = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)


def zyz_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """(alpha, beta, gamma, delta) with u = e^{i alpha} Rz(beta) Ry(gamma) Rz(delta)."""
    det = np.linalg.det(u)
    alpha = float(np.angle(det) / 2)
    v = u * np.exp(-1j * alpha)
    gamma = float(2 * np.arctan2(abs(v[1, 0]), abs(v[0, 0])))
    if abs(v[0, 0]) > 1e-12 and abs(v[1, 0]) > 1e-12:
        s = float(np.angle(v[1, 1]))  # (beta + delta) / 2
        d = float(np.angle(v[1, 0]))  # (beta - delta) / 2
    elif abs(v[1, 0]) <= 1e-12:
        s, d = float(np.angle(v[1, 1])), 0.0
    else:
        s, d = 0.0, float(np.angle(v[1, 0]))
    beta, delta = s + d, s - d
    # the square root of det fixes u only up to a sign
    trial = np.exp(1j * alpha) * rz(beta) @ ry(gamma) @ rz(delta)
    if np.abs(trial - u).max() > 1e-9:
        alpha += np.pi
    return alpha, beta, gamma, delta


@dataclass
class ElementaryGateList:
    """Ops are ("rz"|"ry", slot, angle) or ("cx", control_slot, target_slot).

    Slot 0 is the lower mode l1 (first tensor factor), slot 1 is l2.
    """

    ops: list
    global_phase: float
    target: np.ndarray

    @property
    def cnot_count(self) -> int:
        return sum(op[0] == "cx" for op in self.ops)

    def unitary(self) -> np.ndarray:
        u = np.eye(4, dtype=complex)
        for op in self.ops:
            if op[0] == "cx":
                g = _CX01 if op[1] == 0 else _CX10
            else:
                one = rz(op[2]) if op[0] == "rz" else ry(op[2])
                g = np.kron(one, np.eye(2)) if op[1] == 0 else np.kron(np.eye(2), one)
            u = g @ u
        return np.exp(1j * self.global_phase) * u


def givens_two_qubit(theta: float, phi: float) -> np.ndarray:
    """4x4 matrix of the gate in the basis |n_l1 n_l2>."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, np.exp(-1j * phi) * s, 0],
            [0, -np.exp(1j * phi) * s, c, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )


def _layer_ops(u1: np.ndarray, u2: np.ndarray) -> tuple[list, float]:
    ops, phase = [], 0.0
    for slot, u in ((0, u1), (1, u2)):
        a, b, g, d = zyz_angles(u)
        phase += a
        # time order: Rz(delta), Ry(gamma), Rz(beta)
        for name, ang in (("rz", d), ("ry", g), ("rz", b)):
            if abs(np.angle(np.exp(0.5j * ang))) > 1e-15:
                ops.append((name, slot, ang))
    return ops, phase


def decompose_givens_gate(theta: float, phi: float) -> ElementaryGateList:
    """Two-CNOT realization of the FGivens gate over single-qubit rz/ry rotations.

    The middle block is exp(theta (|01><10| - |10><01|)), generated by
    (X Y - Y X)/2. An S gate on l2 turns this into XX + YY, Rx(pi/2) on both
    qubits into XX + ZZ, and a CNOT from l1 to l2 into X_1 + Z_2, which
    splits into single-qubit rotations. Rz(phi) on l1 supplies the phase.
    """
    target = givens_two_qubit(theta, phi)
    s_gate = np.diag([1, 1j])
    # basis change B with B^dagger (X1 + Z2) B proportional to the generator
    b1 = rx(np.pi / 2) @ rz(-phi)
    b2 = rx(np.pi / 2) @ s_gate.conj().T
    pre_ops, p1 = _layer_ops(b1, b2)
    mid_ops, p2 = _layer_ops(rx(theta), rz(theta))
    post_ops, p3 = _layer_ops(b1.conj().T, b2.conj().T)
    ops = pre_ops + [("cx", 0, 1)] + mid_ops + [("cx", 0, 1)] + post_ops
    gl = ElementaryGateList(ops, p1 + p2 + p3, target)
    # the sandwich is exact up to a scalar; absorb it into the global phase
    u = gl.unitary()
    k = np.vdot(u.ravel(), target.ravel())
    gl.global_phase += float(np.angle(k))
    return gl


# ----------------------------------------------------------------------------
# adjacency expansion, metrics, QASM

_SWAP = (np.pi / 2, np.pi / 2)
_SWAP_BACK = (np.pi / 2, -np.pi / 2)


def expand_to_adjacent(circ: Circuit) -> Circuit:
    """Replace each non-adjacent FGivens by fermionic swaps around an adjacent one.

    Mode l2 is walked down to l1 + 1 by FGivens(pi/2, pi/2) gates, the
    rotation acts on (l1, l1 + 1), and the swaps are undone with their
    inverses FGivens(pi/2, -pi/2). Each swap leaves a factor i on the
    coupling to l1, so the inner phase becomes phi + k pi/2 for k swaps.
    """
    gates = []
    for g in circ.gates:
        if not isinstance(g, FGivens) or g.rotation.l2 == g.rotation.l1 + 1:
            gates.append(g)
            continue
        r = g.rotation
        down = [FGivens.on(k, k + 1, *_SWAP) for k in range(r.l2 - 1, r.l1, -1)]
        up = [FGivens.on(x.rotation.l1, x.rotation.l2, *_SWAP_BACK) for x in reversed(down)]
        inner = FGivens.on(r.l1, r.l1 + 1, r.theta, r.phi + len(down) * np.pi / 2)
        gates += down + [inner] + up
    return Circuit(circ.n_qubits, gates)


def elementary_ops(circ: Circuit) -> list[tuple]:
    """Flat list of ("x", q) | ("rz"/"ry", q, angle) | ("cx", qc, qt) | ("measure", q), 0-based."""
    out = []
    for g in expand_to_adjacent(circ).gates:
        if isinstance(g, XGate):
            out.append(("x", g.qubit - 1))
        elif isinstance(g, ParticleHoleX):
            out.append(("x", circ.n_qubits - 1))
        elif isinstance(g, FGivens):
            slots = (g.rotation.l1 - 1, g.rotation.l2 - 1)
            for op in decompose_givens_gate(g.rotation.theta, g.rotation.phi).ops:
                if op[0] == "cx":
                    out.append(("cx", slots[op[1]], slots[op[2]]))
                else:
                    out.append((op[0], slots[op[1]], op[2]))
        else:
            out += [("measure", q) for q in range(circ.n_qubits)]
    return out


@dataclass
class CnotMetrics:
    cnot_count: int
    depth: int
    off_graph_pairs: list
    expanded_cnot_count: int
    decomposed_gate_count: int


def cnot_metrics(circ: Circuit, g: CouplingGraph | None = None) -> CnotMetrics:
    """Two CNOTs per FGivens; depth and gate counts use the adjacent expansion."""
    ops = [op for op in elementary_ops(circ) if op[0] != "measure"]
    level = [0] * circ.n_qubits
    for op in ops:
        qs = (op[1], op[2]) if op[0] == "cx" else (op[1],)
        d = max(level[q] for q in qs) + 1
        for q in qs:
            level[q] = d
    off = []
    if g is not None:
        off = [x.qubits for x in circ.fgivens if not g.has_edge(*x.qubits)]
    return CnotMetrics(
        cnot_count=2 * len(circ.fgivens),
        depth=max(level, default=0),
        off_graph_pairs=off,
        expanded_cnot_count=sum(op[0] == "cx" for op in ops),
        decomposed_gate_count=len(ops),
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def export_qasm(circ: Circuit) -> str:
    n = circ.n_qubits
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{n}];", f"creg c[{n}];"]
    for op in elementary_ops(circ):
        if op[0] == "x":
            lines.append(f"x q[{op[1]}];")
        elif op[0] == "cx":
            lines.append(f"cx q[{op[1]}],q[{op[2]}];")
        elif op[0] == "measure":
            lines.append(f"measure q[{op[1]}] -> c[{op[1]}];")
        else:
            lines.append(f"{op[0]}({_fmt(op[2])}) q[{op[1]}];")
    return "\n".join(lines) + "\n"


class QasmSyntaxError(ValueError):
    pass


_NUM = r"[-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
_QASM_LINE = {
    "x": re.compile(r"^x q\[(\d+)\];$"),
    "cx": re.compile(r"^cx q\[(\d+)\],\s*q\[(\d+)\];$"),
    "rot": re.compile(rf"^(rz|ry)\(({_NUM})\) q\[(\d+)\];$"),
    "measure": re.compile(r"^measure q\[(\d+)\] -> c\[(\d+)\];$"),
}


def parse_qasm(text: str) -> tuple[int, list[tuple]]:
    """Grammar check for the emitted subset; returns (n_qubits, ops)."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) < 4 or lines[0] != "OPENQASM 2.0;" or lines[1] != 'include "qelib1.inc";':
        raise QasmSyntaxError("missing OpenQASM 2.0 header")
    mq = re.match(r"^qreg q\[(\d+)\];$", lines[2])
    mc = re.match(r"^creg c\[(\d+)\];$", lines[3])
    if not mq or not mc or mq.group(1) != mc.group(1):
        raise QasmSyntaxError("bad register declarations")
    n = int(mq.group(1))
    ops = []

    def qubit(s: str) -> int:
        q = int(s)
        if q >= n:
            raise QasmSyntaxError(f"qubit {q} outside register of size {n}")
        return q

    for ln in lines[4:]:
        if m := _QASM_LINE["x"].match(ln):
            ops.append(("x", qubit(m.group(1))))
        elif m := _QASM_LINE["cx"].match(ln):
            a, b = qubit(m.group(1)), qubit(m.group(2))
            if a == b:
                raise QasmSyntaxError("cx with identical qubits")
            ops.append(("cx", a, b))
        elif m := _QASM_LINE["rot"].match(ln):
            ops.append((m.group(1), qubit(m.group(3)), float(m.group(2))))
        elif m := _QASM_LINE["measure"].match(ln):
            ops.append(("measure", qubit(m.group(1))))
        else:
            raise QasmSyntaxError(f"unrecognized statement {ln!r}")
    return n, ops


def qubit_statevector(n: int, ops: Sequence[tuple]) -> np.ndarray:
    """Plain qubit simulation of parsed ops (no fermionic signs); qubit k is bit k."""
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    idx = np.arange(2**n)
    for op in ops:
        kind = op[0]
        if kind == "measure":
            continue
        if kind == "x":
            psi = psi[idx ^ (1 << op[1])]
        elif kind == "cx":
            ctrl = (idx >> op[1]) & 1
            psi = psi[np.where(ctrl == 1, idx ^ (1 << op[2]), idx)]
        else:
            u = rz(op[2]) if kind == "rz" else ry(op[2])
            bit = (idx >> op[1]) & 1
            partner = idx ^ (1 << op[1])
            psi = u[bit, bit] * psi + u[bit, 1 - bit] * psi[partner]
    return psi
