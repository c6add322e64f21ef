"""Givens-rotation schedules reducing an orthonormal-row factor to (Lambda | 0).

All schedulers share one elimination engine. Every row gets a pivot column
and a rooted elimination tree over the columns it still has to clear; a
leaf is folded into its parent by a column rotation. A rotation for row i
is allowed only once every earlier row is already zero on both columns,
and rotations within one round act on disjoint column pairs.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kernels import InvalidKernelError, ProjectionFactor, _reorthonormalize
from .numerics import (
    GivensRotation,
    apply_givens,
    as_complex_matrix,
    complex_list_from_json,
    complex_list_to_json,
    givens_params_to_zero,
    hermitian_eig,
    max_abs,
    row_params_to_zero,
)

SKIP_TOL = 1e-12


class DisconnectedGraphError(ValueError):
    pass


class AmbiguousSubspaceError(ValueError):
    pass


@dataclass
class RotationSchedule:
    n_modes: int
    rank: int
    rounds: list
    final_phases: np.ndarray
    pivots: tuple = ()
    left_rotations: list = field(default_factory=list)

    def __post_init__(self):
        if not self.pivots:
            self.pivots = tuple(range(1, self.rank + 1))
        for rnd in self.rounds:
            seen = set()
            for rot in rnd:
                if rot.l1 in seen or rot.l2 in seen:
                    raise ValueError("rotations inside a round must act on disjoint modes")
                seen.update((rot.l1, rot.l2))

    @property
    def rotations(self) -> list:
        return [rot for rnd in self.rounds for rot in rnd]

    @property
    def rotation_count(self) -> int:
        return sum(len(r) for r in self.rounds)

    @property
    def round_count(self) -> int:
        return len(self.rounds)

    def to_json(self) -> dict:
        out = {
            "n_modes": self.n_modes,
            "rank": self.rank,
            "rounds": [[rot.to_dict() for rot in rnd] for rnd in self.rounds],
            "phases": complex_list_to_json(self.final_phases),
        }
        if tuple(self.pivots) != tuple(range(1, self.rank + 1)):
            out["pivots"] = list(self.pivots)
        if self.left_rotations:
            out["left"] = [rot.to_dict() for rot in self.left_rotations]
        return out

    @classmethod
    def from_json(cls, d: dict) -> "RotationSchedule":
        return cls(
            int(d["n_modes"]),
            int(d["rank"]),
            [[GivensRotation.from_dict(x) for x in rnd] for rnd in d["rounds"]],
            complex_list_from_json(d.get("phases", [])),
            tuple(d.get("pivots", ())),
            [GivensRotation.from_dict(x) for x in d.get("left", [])],
        )


@dataclass(frozen=True)
class CouplingGraph:
    n_nodes: int
    edges: frozenset

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[Sequence[int]]) -> "CouplingGraph":
        es = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b or not (1 <= a <= n_nodes and 1 <= b <= n_nodes):
                raise ValueError(f"invalid edge ({a}, {b})")
            es.add((min(a, b), max(a, b)))
        return cls(n_nodes, frozenset(es))

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbours(self, v: int, within: set | None = None) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        if within is not None:
            out = [u for u in out if u in within]
        return sorted(out)

    def is_connected(self, nodes: set | None = None) -> bool:
        nodes = set(range(1, self.n_nodes + 1)) if nodes is None else set(nodes)
        if not nodes:
            return True
        start = min(nodes)
        seen = {start}
        todo = [start]
        while todo:
            v = todo.pop()
            for u in self.neighbours(v, nodes):
                if u not in seen:
                    seen.add(u)
                    todo.append(u)
        return seen == nodes

    def to_json(self) -> dict:
        return {"n_nodes": self.n_nodes, "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_json(cls, d: dict) -> "CouplingGraph":
        return cls.from_edges(int(d["n_nodes"]), d["edges"])


def line_graph(n: int) -> CouplingGraph:
    return CouplingGraph.from_edges(n, [(k, k + 1) for k in range(1, n)])


def t_graph() -> CouplingGraph:
    """Five-qubit T layout: chain 1-2-3 with the branch 2-4-5."""
    return CouplingGraph.from_edges(5, [(1, 2), (2, 3), (2, 4), (4, 5)])


def star_graph(leaves: int) -> CouplingGraph:
    """Hub is node 1."""
    return CouplingGraph.from_edges(leaves + 1, [(1, k) for k in range(2, leaves + 2)])


# ----------------------------------------------------------------------------
# elimination engine


@dataclass
class _RowPlan:
    pivot: int
    parent: dict  # column -> parent column, pivot excluded

    def __post_init__(self):
        self.remaining = set(self.parent) | {self.pivot}
        self.children = {v: 0 for v in self.remaining}
        for v, p in self.parent.items():
            self.children[p] += 1

    def leaves(self) -> list[int]:
        return [v for v in self.remaining if v != self.pivot and self.children[v] == 0]

    def eliminate(self, v: int) -> None:
        self.remaining.discard(v)
        self.children[self.parent[v]] -= 1

    @property
    def done(self) -> bool:
        return self.remaining == {self.pivot}


def _run_elimination(q: np.ndarray, plans: list[_RowPlan]) -> tuple[list, np.ndarray]:
    """Greedy round construction. Returns (rounds, reduced matrix)."""
    m = np.array(q, dtype=complex)
    rounds = []
    while not all(p.done for p in plans):
        used: set[int] = set()
        emitted = []
        for i, plan in enumerate(plans):
            progress = True
            while progress:
                progress = False
                cands = []
                for v in plan.leaves():
                    u = plan.parent[v]
                    cands.append((min(u, v), max(u, v), v, u))
                cands.sort()
                for l1, l2, v, u in cands:
                    if abs(m[i, v - 1]) <= SKIP_TOL:
                        m[i, v - 1] = 0.0
                        plan.eliminate(v)
                        progress = True
                        break
                    if l1 in used or l2 in used:
                        continue
                    if any(l1 in plans[k].remaining or l2 in plans[k].remaining for k in range(i)):
                        continue
                    target = "second" if v == l2 else "first"
                    theta, phi = row_params_to_zero(m[i, l1 - 1], m[i, l2 - 1], target)
                    rot = GivensRotation.make(l1, l2, theta, phi)
                    apply_givens(m, rot, side="right", conjugate=True, inplace=True)
                    m[i, v - 1] = 0.0
                    plan.eliminate(v)
                    used.update((l1, l2))
                    emitted.append(rot)
                    progress = True
                    break
        if not emitted:
            if all(p.done for p in plans):
                break
            # only skips happened in this pass; loop again without an empty round
            continue
        emitted.sort(key=lambda r: (r.l1, r.l2))
        rounds.append(emitted)
    return rounds, m


def _finish(q: np.ndarray, plans: list[_RowPlan], left: list | None = None) -> RotationSchedule:
    rounds, m = _run_elimination(q, plans)
    r, n = q.shape
    pivots = tuple(p.pivot for p in plans)
    phases = np.array([m[i, pivots[i] - 1] for i in range(r)], dtype=complex)
    return RotationSchedule(n, r, rounds, phases, pivots, list(left or []))


def _as_factor(q) -> np.ndarray:
    if isinstance(q, ProjectionFactor):
        return np.array(q.q, dtype=complex)
    arr = as_complex_matrix(q, "Q")
    ProjectionFactor(arr)
    return arr


def _path_plan(pivot: int, last: int) -> _RowPlan:
    return _RowPlan(pivot, {k: k - 1 for k in range(pivot + 1, last + 1)})


def preprocess_rotations(q) -> tuple[np.ndarray, list]:
    """Left rotations clearing the upper-right staircase of Q."""
    m = _as_factor(q)
    r, n = m.shape
    rots = []
    for j in range(r - 1):
        col = n - 1 - j
        for i in range(r - 1 - j):
            x, y = m[i, col], m[i + 1, col]
            if abs(x) <= SKIP_TOL:
                m[i, col] = 0.0
                continue
            theta, phi = row_params_to_zero(np.conj(x), np.conj(y), "first")
            rot = GivensRotation.make(i + 1, i + 2, theta, phi)
            apply_givens(m, rot, side="left", inplace=True)
            m[i, col] = 0.0
            rots.append(rot)
    return m, rots


def preprocess_triangle(q) -> tuple[ProjectionFactor, int]:
    """Q' = V Q with zeros at (i, N-r+i+1 .. N) for i < r."""
    m, rots = preprocess_rotations(q)
    return ProjectionFactor(m), len(rots)


def schedule_sameh_kuck(q, preprocess: bool = True) -> RotationSchedule:
    """Nearest-neighbour schedule: every rotation acts on columns (k, k+1)."""
    m = _as_factor(q)
    left = []
    if preprocess:
        m, left = preprocess_rotations(m)
    r, n = m.shape
    plans = []
    for i in range(1, r + 1):
        last = n - r + i if preprocess else n
        plans.append(_path_plan(i, last))
    return _finish(m, plans, left)


def _halving_plan(pivot: int, n: int) -> _RowPlan:
    parent = {}
    alive = list(range(pivot, n + 1))
    while len(alive) > 1:
        survivors = []
        k = len(alive) - 1
        while k >= 1:
            parent[alive[k]] = alive[k - 1]
            survivors.append(alive[k - 1])
            k -= 2
        if k == 0:
            survivors.append(alive[0])
        alive = sorted(survivors)
    return _RowPlan(pivot, parent)


def schedule_log_depth(q) -> RotationSchedule:
    """Unconstrained schedule halving the nonzero entries of a row each round."""
    m = _as_factor(q)
    r, n = m.shape
    return _finish(m, [_halving_plan(i, n) for i in range(1, r + 1)])


def _choose_pivot(g: CouplingGraph, nodes: set) -> int:
    """Lowest-degree node whose removal keeps the rest connected; ties by index."""
    best = None
    for v in sorted(nodes):
        rest = nodes - {v}
        if not g.is_connected(rest):
            continue
        deg = len(g.neighbours(v, nodes))
        if best is None or deg < best[0]:
            best = (deg, v)
    if best is None:
        raise DisconnectedGraphError("no pivot keeps the graph connected")
    return best[1]


def _bfs_tree(g: CouplingGraph, root: int, nodes: set) -> dict:
    parent = {}
    seen = {root}
    todo = deque([root])
    while todo:
        v = todo.popleft()
        for u in g.neighbours(v, nodes):
            if u not in seen:
                seen.add(u)
                parent[u] = v
                todo.append(u)
    return parent


def schedule_graph_constrained(q, g: CouplingGraph) -> RotationSchedule:
    """Schedule whose rotations all lie on edges of the coupling graph."""
    m = _as_factor(q)
    r, n = m.shape
    if g.n_nodes != n:
        raise ValueError(f"graph has {g.n_nodes} nodes, factor has {n} columns")
    if not g.is_connected():
        raise DisconnectedGraphError("coupling graph is disconnected")
    nodes = set(range(1, n + 1))
    plans = []
    for _ in range(r):
        pivot = _choose_pivot(g, nodes)
        plans.append(_RowPlan(pivot, _bfs_tree(g, pivot, nodes)))
        nodes = nodes - {pivot}
    return _finish(m, plans)


def replay_schedule(q, s: RotationSchedule, monitor: bool = False) -> np.ndarray:
    """Apply the schedule's left rotations, then right-multiply by each G^*.

    With ``monitor`` an AssertionError is raised if an entry zeroed by an
    earlier rotation grows back above 1e-10.
    """
    m = np.array(q.q if isinstance(q, ProjectionFactor) else q, dtype=complex)
    for rot in s.left_rotations:
        apply_givens(m, rot, side="left", inplace=True)
    zeroed: set[tuple[int, int]] = set()
    for rnd in s.rounds:
        for rot in rnd:
            apply_givens(m, rot, side="right", conjugate=True, inplace=True)
            if monitor:
                for (i, j) in zeroed:
                    if abs(m[i, j]) > 1e-10:
                        raise AssertionError(f"entry ({i + 1}, {j + 1}) lost its zero")
                for j in (rot.l1 - 1, rot.l2 - 1):
                    for i in range(m.shape[0]):
                        if abs(m[i, j]) <= 1e-12 and i != j:
                            zeroed.add((i, j))
    return m


def verify_schedule(q, s: RotationSchedule) -> tuple[float, np.ndarray]:
    """Residual off the pivot pattern after replay, and the pivot phases."""
    m = replay_schedule(q, s)
    r = m.shape[0]
    mask = np.ones(m.shape, dtype=bool)
    phases = np.zeros(r, dtype=complex)
    for i, p in enumerate(s.pivots):
        mask[i, p - 1] = False
        phases[i] = m[i, p - 1]
    residual = max_abs(m[mask]) if mask.any() else 0.0
    residual = max(residual, max_abs(np.abs(phases) - 1) if r else 0.0)
    return residual, phases


def pack_rounds(rotations: Sequence[GivensRotation]) -> list:
    """As-soon-as-possible layering that preserves the sequential product."""
    last: dict[int, int] = {}
    rounds: list[list] = []
    for rot in rotations:
        k = max(last.get(rot.l1, -1), last.get(rot.l2, -1)) + 1
        if k == len(rounds):
            rounds.append([])
        rounds[k].append(rot)
        last[rot.l1] = last[rot.l2] = k
    return [sorted(rnd, key=lambda r: (r.l1, r.l2)) for rnd in rounds]


# ----------------------------------------------------------------------------
# tall-skinny QR


@dataclass
class TsqrPlan:
    n_rows: int
    n_cols: int
    block_count: int
    leaves: list  # row index lists (0-based) per block
    levels: list  # levels[k] = list of (row list, rotations) per tree node
    r_rows: list  # rows holding the final R

    @property
    def rotations(self) -> list:
        return [rot for level in self.levels for _, rots in level for rot in rots]

    def q(self) -> np.ndarray:
        """Explicit N x d factor with orthonormal columns."""
        e = np.zeros((self.n_rows, self.n_cols), dtype=complex)
        for k, row in enumerate(self.r_rows[: self.n_cols]):
            e[row, k] = 1.0
        for rot in reversed(self.rotations):
            apply_givens(e, rot, side="left", conjugate=True, inplace=True)
        return e


def _givens_qr_rows(m: np.ndarray, rows: list[int], scale: float) -> tuple[list, list]:
    """Triangularize the given rows of m in place with adjacent-in-list rotations."""
    rots = []
    d = m.shape[1]
    for j in range(min(len(rows), d)):
        for k in range(len(rows) - 1, j, -1):
            a, b = rows[k - 1], rows[k]
            y = m[b, j]
            if abs(y) <= SKIP_TOL * scale:
                m[b, j] = 0.0
                continue
            theta, phi = givens_params_to_zero(m[a, j], y)
            rot = GivensRotation.make(a + 1, b + 1, theta, phi)
            apply_givens(m, rot, side="left", inplace=True)
            m[b, j] = 0.0
            rots.append(rot)
    return rots, rows[: min(len(rows), d)]


def tsqr(a, p: int) -> tuple[TsqrPlan, np.ndarray]:
    """Tall-skinny QR with p row blocks and a binary reduction tree."""
    if p <= 0:
        raise ValueError("block count must be positive")
    m = np.array(as_complex_matrix(a, "A"), dtype=complex)
    n, d = m.shape
    scale = max(max_abs(m), 1e-300)
    leaves = [list(map(int, b)) for b in np.array_split(np.arange(n), p) if len(b)]
    level = []
    for rows in leaves:
        rots, keep = _givens_qr_rows(m, rows, scale)
        level.append((rows, rots, keep))
    levels = [[(rows, rots) for rows, rots, _ in level]]
    current = [keep for _, _, keep in level]
    while len(current) > 1:
        nxt, record = [], []
        for k in range(0, len(current) - 1, 2):
            rows = sorted(current[k] + current[k + 1])
            rots, keep = _givens_qr_rows(m, rows, scale)
            record.append((rows, rots))
            nxt.append(keep)
        if len(current) % 2:
            nxt.append(current[-1])
        levels.append(record)
        current = nxt
    r_rows = current[0]
    r = np.zeros((d, d), dtype=complex)
    r[: len(r_rows)] = m[r_rows]
    plan = TsqrPlan(n, d, p, leaves, levels, r_rows)
    return plan, np.triu(r)


def hybrid_pipeline(a, r: int, p: int) -> tuple[ProjectionFactor, RotationSchedule]:
    """Top-r right-singular projector of A (d x N) together with a circuit schedule.

    TSQR of A^* gives A^* = Q R; the d x d matrix R is diagonalized through
    R R^*, and the principal components Q U_r form the factor. The schedule
    replays the TSQR rotations and then clears the r x d block.
    """
    a = as_complex_matrix(a, "A")
    d, n = a.shape
    plan, rf = tsqr(a.conj().T, p)
    if list(plan.r_rows) != list(range(min(d, n))):
        raise ValueError("hybrid pipeline needs at least d rows per block")
    eig = hermitian_eig(rf @ rf.conj().T)
    sv = np.sqrt(np.clip(eig.eigenvalues, 0, None))[::-1]
    vecs = eig.eigenvectors[:, ::-1]
    rank = int(np.sum(sv > 1e-10 * sv[0])) if sv[0] > 0 else 0
    if not 1 <= r <= rank:
        raise InvalidKernelError(f"r={r} exceeds the numerical rank {rank}")
    if r < len(sv) and sv[r - 1] - sv[r] <= 1e-10 * max(sv[0], 1.0):
        raise AmbiguousSubspaceError("sigma_r and sigma_{r+1} coincide")
    u_top = _reorthonormalize(vecs[:, :r])
    factor = ProjectionFactor(_reorthonormalize(plan.q() @ u_top).conj().T)
    inner = schedule_sameh_kuck(u_top.conj().T, preprocess=False)
    rotations = list(plan.rotations) + inner.rotations
    m = replay_schedule(factor, RotationSchedule(n, r, [[x] for x in rotations], np.ones(r)))
    phases = np.array([m[i, i] for i in range(r)], dtype=complex)
    return factor, RotationSchedule(n, r, pack_rounds(rotations), phases)
