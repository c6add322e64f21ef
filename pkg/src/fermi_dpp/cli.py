"""Command-line front end: fermi-dpp <command> ..."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bogoliubov import (
    BdGHamiltonian,
    BogoliubovTransform,
    diagonalize_bdg,
    factorize_particle_hole,
    s_matrix_projective,
    s_matrix_thermal,
)
from .circuit import (
    Circuit,
    cnot_metrics,
    compile_pfpp_circuit,
    compile_projection_circuit,
    export_qasm,
)
from .fock_simulator import (
    Histogram,
    exact_distribution,
    index_to_bitstring,
    index_to_subset,
    run_circuit,
    sample_indices,
    sample_occupations,
)
from .kernels import (
    DppKernel,
    InvalidKernelError,
    PfaffianKernel,
    ProjectionFactor,
    SMatrix,
    pfaffian_kernel_from_S,
    validate_dpp_kernel,
)
from .numerics import matrix_from_json
from .qr_engine import (
    CouplingGraph,
    RotationSchedule,
    schedule_graph_constrained,
    schedule_log_depth,
    schedule_sameh_kuck,
    verify_schedule,
)
from .samplers import (
    PfppCircuitSampler,
    RngSpec,
    brute_force_distribution,
    hkpv_indices,
    sample_dilation_indices,
    sample_general_dpp_indices,
)

# ----------------------------------------------------------------------------
# kernel specs


@dataclass
class LoadedKernel:
    kind: str
    n: int
    dpp: DppKernel | None = None
    factor: ProjectionFactor | None = None
    pfaffian: PfaffianKernel | None = None
    transform: BogoliubovTransform | None = None
    beta: float | None = None
    modes: list | None = None


def _factor_from_projection(k: DppKernel) -> ProjectionFactor:
    sel = k.eigen.eigenvalues > 0.5
    return ProjectionFactor(k.eigen.eigenvectors[:, sel].conj().T)


def load_kernel_spec(d: dict) -> LoadedKernel:
    kind = d.get("type")
    if kind == "projection_factor":
        factor = ProjectionFactor(matrix_from_json(d["q"]))
        return LoadedKernel(kind, factor.n, dpp=validate_dpp_kernel(factor.kernel()), factor=factor)
    if kind == "hermitian":
        k = validate_dpp_kernel(matrix_from_json(d["k"]))
        factor = _factor_from_projection(k) if k.is_projection else None
        return LoadedKernel(kind, k.n, dpp=k, factor=factor)
    if kind == "s_matrix":
        s = SMatrix(matrix_from_json(d["s"]))
        return LoadedKernel(kind, s.n, pfaffian=pfaffian_kernel_from_S(s))
    if kind == "bdg":
        h = BdGHamiltonian(matrix_from_json(d["m"]), matrix_from_json(d["delta"]))
        t = diagonalize_bdg(h)
        beta, modes = d.get("beta"), d.get("modes")
        if (beta is None) == (modes is None):
            raise InvalidKernelError("a bdg spec needs exactly one of 'beta' or 'modes'")
        s = s_matrix_thermal(t, float(beta)) if beta is not None else s_matrix_projective(t, modes)
        return LoadedKernel(
            kind, h.n, pfaffian=pfaffian_kernel_from_S(s), transform=t,
            beta=None if beta is None else float(beta), modes=None if modes is None else [int(k) for k in modes],
        )
    raise InvalidKernelError(f"unknown kernel type {kind!r}")


def exact_pmf(lk: LoadedKernel) -> np.ndarray:
    return brute_force_distribution(lk.dpp if lk.dpp is not None else lk.pfaffian)


# ----------------------------------------------------------------------------
# comparison


def tv_distance(p, q) -> float:
    """Total variation: half the L1 distance, i.e. the largest gap over events."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distributions live on different universes: {p.shape} vs {q.shape}")
    for name, x in (("p", p), ("q", q)):
        if abs(x.sum() - 1) > 1e-6:
            raise ValueError(f"{name} sums to {x.sum():.8f}")
    return float(0.5 * np.abs(p - q).sum())


@dataclass
class ComparisonReport:
    n_modes: int
    tv: float
    probabilities: np.ndarray
    frequencies: np.ndarray
    shots: int
    seed: int
    tv_null: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def table(self) -> list[tuple]:
        rows = []
        for idx in range(len(self.probabilities)):
            p, f = self.probabilities[idx], self.frequencies[idx]
            if p > 1e-12 or f > 0:
                rows.append((idx, float(p), float(f), float(abs(p - f))))
        return rows

    def summary(self) -> dict:
        return {"tv": self.tv, "shots": self.shots, "seed": self.seed, **self.extras}


def emit_plots_data(report: ComparisonReport, out_dir) -> list[Path]:
    """Write histogram.csv and, when reruns exist, tv_null.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bitstring", "subset", "probability", "frequency", "abs_diff"])
    n = report.n_modes
    for idx, p, f, d in report.table():
        label = "{" + " ".join(map(str, index_to_subset(idx, n))) + "}"
        w.writerow([index_to_bitstring(idx, n), label, f"{p:.10f}", f"{f:.10f}", f"{d:.10f}"])
    paths = [out / "histogram.csv"]
    paths[0].write_text(buf.getvalue())
    if report.tv_null:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rerun", "seed", "tv"])
        for k, (seed, tv) in enumerate(report.tv_null):
            w.writerow([k, seed, f"{tv:.10f}"])
        paths.append(out / "tv_null.csv")
        paths[1].write_text(buf.getvalue())
    return paths


# ----------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    shots: int = 20000
    seed: int = 42
    kernel_seed: int = 0
    mode: str = "sameh-kuck"
    graph: CouplingGraph | None = None
    noise: float | None = None
    exact: bool = False
    reruns: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        if self.shots <= 0:
            raise ValueError("shots must be positive")
        if self.reruns < 0:
            raise ValueError("reruns must be non-negative")
        if self.mode not in SCHEDULERS:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "graph" and self.graph is None:
            raise ValueError("graph mode needs a coupling graph")


def _schedule(q, mode: str, graph: CouplingGraph | None) -> RotationSchedule:
    if mode == "graph":
        return schedule_graph_constrained(q, graph)
    return SCHEDULERS[mode](q)


SCHEDULERS = {
    "sameh-kuck": schedule_sameh_kuck,
    "log-depth": schedule_log_depth,
    "graph": None,
}


def random_projection_factor(n: int, r: int, seed: int) -> ProjectionFactor:
    """First r columns of the orthogonal factor of a seeded Gaussian matrix."""
    gen = np.random.Generator(np.random.Philox(key=[seed, 0]))
    q, _ = np.linalg.qr(gen.standard_normal((n, n)))
    return ProjectionFactor(q[:, :r].T.astype(complex))


def _sampled_report(state_probs, reference, n, cfg: ExperimentConfig) -> ComparisonReport:
    def draw(seed):
        idx = sample_indices(state_probs, n, cfg.shots, seed, cfg.noise)
        return Histogram.from_indices(n, idx).frequencies()

    if cfg.exact:
        freqs = state_probs / state_probs.sum()
    else:
        freqs = draw(cfg.seed)
    report = ComparisonReport(n, tv_distance(reference, freqs), reference, freqs, cfg.shots, cfg.seed)
    for k in range(cfg.reruns):
        seed = cfg.seed + 1 + k
        report.tv_null.append((seed, tv_distance(reference, draw(seed))))
    return report


def run_experiment_projection(cfg: ExperimentConfig | None = None) -> ComparisonReport:
    """Random rank-3 projection kernel on 5 items, sampled through its circuit."""
    cfg = cfg or ExperimentConfig()
    n, r = 5, 3
    factor = random_projection_factor(n, r, cfg.kernel_seed)
    sched = _schedule(factor, cfg.mode, cfg.graph)
    residual, _ = verify_schedule(factor, sched)
    circ = compile_projection_circuit(sched)
    probs = exact_distribution(run_circuit(circ))
    reference = brute_force_distribution(validate_dpp_kernel(factor.kernel()))
    report = _sampled_report(probs, reference, n, cfg)
    m = cnot_metrics(circ, cfg.graph)
    report.extras.update(
        rotations=sched.rotation_count, rounds=sched.round_count, cnot_count=m.cnot_count,
        schedule_residual=residual, exact_tv=tv_distance(reference, probs / probs.sum()),
    )
    if cfg.out_dir:
        emit_plots_data(report, cfg.out_dir)
    return report


def experiment_bdg_hamiltonian(n: int = 5) -> BdGHamiltonian:
    """Banded Hermitian M (1, 0.5 on the first off-diagonal, 0.2 beyond) and a nearest-neighbour pairing."""
    m = np.full((n, n), 0.2)
    np.fill_diagonal(m, 1.0)
    for i in range(n - 1):
        m[i, i + 1] = m[i + 1, i] = 0.5
    delta = np.zeros((n, n))
    for i in range(n - 1):
        delta[i, i + 1], delta[i + 1, i] = 1.0, -1.0
    return BdGHamiltonian(m.astype(complex), delta.astype(complex))


def run_experiment_pfpp(cfg: ExperimentConfig | None = None, modes=(1, 2, 3)) -> ComparisonReport:
    """Projective Pfaffian process of the built-in BdG Hamiltonian."""
    cfg = cfg or ExperimentConfig()
    h = experiment_bdg_hamiltonian()
    t = diagonalize_bdg(h)
    if np.any(t.epsilons[list(k - 1 for k in modes)] <= 1e-12):
        raise ValueError("selected modes must have positive excitation energy")
    fact = factorize_particle_hole(t)
    circ = compile_pfpp_circuit(fact, modes, scheduler=lambda q: _schedule(q, cfg.mode, cfg.graph))
    probs = exact_distribution(run_circuit(circ))
    reference = brute_force_distribution(pfaffian_kernel_from_S(s_matrix_projective(t, modes)))
    report = _sampled_report(probs, reference, h.n, cfg)
    support = np.nonzero(report.frequencies > 0)[0]
    parities = {bin(int(i)).count("1") % 2 for i in support}
    expected = (-1) ** len(modes) * t.det_w
    report.extras.update(
        expected_parity=int(expected),
        sample_parities=sorted(int((-1) ** p) for p in parities),
        x_gates=circ.x_count(),
        exact_tv=tv_distance(reference, probs / probs.sum()),
        epsilons=[float(e) for e in t.epsilons],
    )
    if cfg.out_dir:
        emit_plots_data(report, cfg.out_dir)
    return report


# ----------------------------------------------------------------------------
# file helpers


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_pmf(path) -> np.ndarray:
    """JSON array of probabilities, or a histogram CSV."""
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        return np.array(json.loads(text), dtype=float)
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError(f"{path} holds no rows")
    n = len(rows[0]["bitstring"])
    counts = np.zeros(2**n)
    for row in rows:
        # bitstrings list mode 1 first
        idx = sum(1 << k for k, ch in enumerate(row["bitstring"]) if ch == "1")
        counts[idx] = float(row["count"]) if "count" in row else float(row["frequency"])
    return counts / counts.sum()


def _load_factor(path) -> ProjectionFactor:
    d = _read_json(path)
    if "type" in d:
        lk = load_kernel_spec(d)
        if lk.factor is None:
            raise InvalidKernelError("input is not a projection kernel")
        return lk.factor
    return ProjectionFactor(matrix_from_json(d))


def _graph(path) -> CouplingGraph | None:
    return CouplingGraph.from_json(_read_json(path)) if path else None


# ----------------------------------------------------------------------------
# commands


def cmd_validate_kernel(args) -> int:
    try:
        lk = load_kernel_spec(_read_json(args.kernel))
    except (InvalidKernelError, ValueError) as exc:
        sys.stdout.write(_dump({"valid": False, "error": str(exc)}))
        return 1
    info = {"valid": True, "type": lk.kind, "n": lk.n}
    if lk.dpp is not None:
        info.update(projection=lk.dpp.is_projection, rank=lk.dpp.rank)
    sys.stdout.write(_dump(info))
    return 0


def cmd_schedule(args) -> int:
    factor = _load_factor(args.input)
    sched = _schedule(factor, args.mode, _graph(args.graph))
    residual, _ = verify_schedule(factor, sched)
    _write_text(args.out, _dump(sched.to_json()))
    sys.stderr.write(f"rotations={sched.rotation_count} rounds={sched.round_count} residual={residual:.3g}\n")
    return 0


def cmd_compile(args) -> int:
    if args.schedule:
        circ = compile_projection_circuit(RotationSchedule.from_json(_read_json(args.schedule)))
    else:
        lk = load_kernel_spec(_read_json(args.kernel))
        if lk.transform is None or lk.modes is None:
            raise InvalidKernelError("compile --kernel needs a bdg spec with 'modes'")
        circ = compile_pfpp_circuit(factorize_particle_hole(lk.transform), lk.modes)
    _write_text(args.out, _dump(circ.to_json()))
    if args.qasm:
        _write_text(args.qasm, export_qasm(circ))
    m = cnot_metrics(circ, _graph(args.graph))
    sys.stderr.write(
        f"cnot_count={m.cnot_count} depth={m.depth} off_graph_pairs={m.off_graph_pairs}\n"
    )
    return 0


def cmd_simulate(args) -> int:
    circ = Circuit.from_json(_read_json(args.circuit))
    state = run_circuit(circ)
    if args.exact:
        _write_text(args.exact, json.dumps([float(x) for x in exact_distribution(state)]) + "\n")
    hist = sample_occupations(state, args.shots, args.seed, args.noise, args.workers)
    _write_text(args.out, hist.to_csv())
    return 0


def cmd_sample(args) -> int:
    lk = load_kernel_spec(_read_json(args.kernel))
    rng = RngSpec(args.seed)
    method = args.method
    if method == "hkpv":
        if lk.factor is None:
            raise InvalidKernelError("hkpv needs a projection kernel")
        idx = hkpv_indices(lk.factor, args.shots, rng, args.workers)
    elif method in ("mixture", "dilation"):
        if lk.dpp is None:
            raise InvalidKernelError(f"{method} needs a determinantal kernel")
        f = sample_general_dpp_indices if method == "mixture" else sample_dilation_indices
        idx = f(lk.dpp, args.shots, rng, args.workers)
    elif method == "pfpp":
        if lk.transform is None or lk.beta is None:
            raise InvalidKernelError("pfpp needs a bdg spec with 'beta'")
        idx = PfppCircuitSampler(lk.transform, lk.beta).sample_indices(args.shots, rng)
    elif method == "circuit":
        if lk.factor is not None:
            circ = compile_projection_circuit(_schedule(lk.factor, args.mode, _graph(args.graph)))
        elif lk.transform is not None and lk.modes is not None:
            circ = compile_pfpp_circuit(factorize_particle_hole(lk.transform), lk.modes)
        else:
            raise InvalidKernelError("circuit sampling needs a projection kernel or a bdg spec with 'modes'")
        hist = sample_occupations(run_circuit(circ), args.shots, args.seed, args.noise, args.workers)
        _write_text(args.out, hist.to_csv())
        return 0
    else:
        raise ValueError(f"unknown method {method!r}")
    _write_text(args.out, Histogram.from_indices(lk.n, idx).to_csv())
    return 0


def cmd_exact_pmf(args) -> int:
    lk = load_kernel_spec(_read_json(args.kernel))
    _write_text(args.out, json.dumps([float(x) for x in exact_pmf(lk)]) + "\n")
    return 0


def cmd_tv_compare(args) -> int:
    tv = tv_distance(_read_pmf(args.p), _read_pmf(args.q))
    sys.stdout.write(f"{tv:.10f}\n")
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig(
        shots=args.shots, seed=args.seed, kernel_seed=args.kernel_seed, mode=args.mode,
        graph=_graph(args.graph), noise=args.noise, exact=args.exact, reruns=args.reruns,
        out_dir=args.out_dir,
    )
    run = run_experiment_projection if args.which == "projection" else run_experiment_pfpp
    report = run(cfg)
    sys.stdout.write(_dump(report.summary()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fermi-dpp", description="Point-process kernels as fermionic circuits.")
    sub = p.add_subparsers(dest="command", required=True)

    def sampling_flags(sp):
        sp.add_argument("--shots", type=int, default=20000)
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--noise", type=float, default=None, help="readout flip probability")
        sp.add_argument("--workers", type=int, default=1)

    def schedule_flags(sp):
        sp.add_argument("--mode", choices=sorted(SCHEDULERS), default="sameh-kuck")
        sp.add_argument("--graph", help="coupling graph JSON")

    sp = sub.add_parser("validate-kernel", help="check a kernel spec")
    sp.add_argument("--kernel", required=True)
    sp.set_defaults(func=cmd_validate_kernel)

    sp = sub.add_parser("schedule", help="Givens schedule for a projection factor")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", default="-")
    schedule_flags(sp)
    sp.set_defaults(func=cmd_schedule)

    sp = sub.add_parser("compile", help="circuit from a schedule or a projective bdg spec")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--schedule")
    src.add_argument("--kernel")
    sp.add_argument("--out", default="-")
    sp.add_argument("--qasm")
    sp.add_argument("--graph")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("simulate", help="statevector simulation and measurement")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--out", default="-")
    sp.add_argument("--exact", help="write the exact distribution as a JSON array")
    sampling_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sample", help="draw samples from a kernel")
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--method", choices=["hkpv", "mixture", "dilation", "pfpp", "circuit"], required=True)
    sp.add_argument("--out", default="-")
    sampling_flags(sp)
    schedule_flags(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("exact-pmf", help="brute-force distribution as a JSON array")
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_exact_pmf)

    sp = sub.add_parser("tv-compare", help="total variation between two distributions")
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.set_defaults(func=cmd_tv_compare)

    sp = sub.add_parser("experiment", help="canned projection or Pfaffian experiment")
    sp.add_argument("which", choices=["projection", "pfpp"])
    sp.add_argument("--kernel-seed", type=int, default=0)
    sp.add_argument("--exact", action="store_true", help="compare exact amplitudes instead of shots")
    sp.add_argument("--reruns", type=int, default=0, help="extra seeds for the TV null histogram")
    sp.add_argument("--out-dir")
    sampling_flags(sp)
    schedule_flags(sp)
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidKernelError, ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
