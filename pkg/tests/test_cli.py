import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermi_dpp.cli import (
    ExperimentConfig,
    emit_plots_data,
    experiment_bdg_hamiltonian,
    load_kernel_spec,
    main,
    random_projection_factor,
    run_experiment_pfpp,
    run_experiment_projection,
    tv_distance,
)
from fermi_dpp.kernels import InvalidKernelError
from fermi_dpp.numerics import matrix_to_json
from fermi_dpp.qr_engine import t_graph

from conftest import random_factor, random_hermitian, random_skew

seeds = st.integers(0, 2**32 - 1)


@st.composite
def pmfs(draw, size=8):
    w = np.array(draw(st.lists(st.floats(0, 1), min_size=size, max_size=size))) + 1e-3
    return w / w.sum()


# ----------------------------------------------------------------------------
# total variation


def test_tv_examples():
    p = np.array([0.25, 0.25, 0.5])
    assert tv_distance(p, p) == 0
    assert tv_distance([1, 0], [0, 1]) == 1
    assert tv_distance([0.5, 0.5], [1, 0]) == 0.5


def test_tv_rejects_mismatch():
    with pytest.raises(ValueError):
        tv_distance([1, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        tv_distance([0.5, 0.4], [0.5, 0.5])


@given(pmfs(), pmfs(), pmfs())
def test_tv_symmetry_and_triangle(p, q, r):
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p))
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12
    assert 0 <= tv_distance(p, q) <= 1


@given(pmfs(4), pmfs(4))
def test_tv_is_max_over_events(p, q):
    best = max(abs(sum(p[i] - q[i] for i in range(4) if (ev >> i) & 1)) for ev in range(16))
    assert tv_distance(p, q) == pytest.approx(best)


# ----------------------------------------------------------------------------
# experiments


def test_projection_factor_is_seeded():
    a = random_projection_factor(5, 3, 0).q
    assert np.array_equal(a, random_projection_factor(5, 3, 0).q)
    assert not np.array_equal(a, random_projection_factor(5, 3, 1).q)


def test_projection_experiment_default():
    rep = run_experiment_projection()
    assert rep.tv < 0.01
    assert rep.shots == 20000
    assert rep.extras["cnot_count"] == 12
    assert rep.extras["exact_tv"] <= 1e-9
    assert 0 <= rep.tv <= 1


def test_projection_experiment_exact_flag():
    rep = run_experiment_projection(ExperimentConfig(exact=True))
    assert rep.tv <= 1e-9


def test_projection_experiment_noise():
    clean = run_experiment_projection()
    noisy = run_experiment_projection(ExperimentConfig(noise=0.02))
    assert noisy.tv > 5 * clean.tv
    weights = {bin(i).count("1") for i in np.nonzero(noisy.frequencies)[0]}
    assert 2 in weights


def test_projection_experiment_graph_mode():
    rep = run_experiment_projection(ExperimentConfig(mode="graph", graph=t_graph()))
    assert rep.tv < 0.02
    assert rep.extras["schedule_residual"] <= 1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(shots=0)
    with pytest.raises(ValueError):
        ExperimentConfig(mode="graph")
    with pytest.raises(ValueError):
        ExperimentConfig(mode="bogus")


def test_pfpp_experiment_default():
    rep = run_experiment_pfpp()
    assert rep.tv <= 0.02
    assert rep.extras["exact_tv"] <= 1e-9
    assert rep.extras["sample_parities"] == [rep.extras["expected_parity"]]
    eps = rep.extras["epsilons"]
    assert all(e > 0 for e in eps) and eps == sorted(eps)


def test_pfpp_experiment_heaviest_subset():
    rep = run_experiment_pfpp(ExperimentConfig(exact=True))
    top = int(np.argmax(rep.probabilities))
    # modes {1, 3, 5}: the complement of {2, 4} (see the decisions ledger)
    assert top == 0b10101
    assert rep.probabilities[top] > 0.4


def test_experiment_hamiltonian_shape():
    h = experiment_bdg_hamiltonian()
    assert h.n == 5
    assert h.m[0, 0] == 1 and h.m[0, 1] == 0.5 and h.m[0, 4] == 0.2
    assert h.delta[0, 1] == 1 and h.delta[1, 0] == -1 and h.delta[0, 2] == 0


def test_emit_plots_data(tmp_path):
    rep = run_experiment_projection(ExperimentConfig(exact=True))
    paths = emit_plots_data(rep, tmp_path / "a")
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "bitstring,subset,probability,frequency,abs_diff"
    charged = int(np.sum(rep.probabilities > 1e-12))
    assert len(lines) == charged + 1 == 11
    again = emit_plots_data(run_experiment_projection(ExperimentConfig(exact=True)), tmp_path / "b")
    assert paths[0].read_bytes() == again[0].read_bytes()


def test_tv_null_rows(tmp_path):
    rep = run_experiment_projection(ExperimentConfig(shots=500, reruns=1000, out_dir=str(tmp_path)))
    rows = (tmp_path / "tv_null.csv").read_text().splitlines()
    assert rows[0] == "rerun,seed,tv"
    assert len(rows) == 1001
    assert len({r.split(",")[1] for r in rows[1:]}) == 1000


# ----------------------------------------------------------------------------
# kernel specs


def test_load_kernel_spec_kinds(rng):
    q = random_factor(rng, 2, 4)
    assert load_kernel_spec({"type": "projection_factor", "q": matrix_to_json(q)}).factor.rank == 2
    herm = load_kernel_spec({"type": "hermitian", "k": matrix_to_json(q.conj().T @ q)})
    assert herm.dpp.is_projection and herm.factor is not None
    m, d = random_hermitian(rng, 3), random_skew(rng, 3)
    bdg = {"type": "bdg", "m": matrix_to_json(m), "delta": matrix_to_json(d)}
    assert load_kernel_spec({**bdg, "beta": 1.0}).beta == 1.0
    assert load_kernel_spec({**bdg, "modes": [1]}).modes == [1]
    with pytest.raises(InvalidKernelError):
        load_kernel_spec(bdg)
    with pytest.raises(InvalidKernelError):
        load_kernel_spec({"type": "nope"})


# ----------------------------------------------------------------------------
# commands


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def projection_spec(tmp_path, rng):
    q = random_factor(rng, 2, 4)
    return write_json(tmp_path / "kernel.json", {"type": "projection_factor", "q": matrix_to_json(q)})


def test_validate_kernel_command(tmp_path, projection_spec, capsys):
    assert main(["validate-kernel", "--kernel", projection_spec]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"n": 4, "projection": True, "rank": 2, "type": "projection_factor", "valid": True}
    bad = write_json(tmp_path / "bad.json", {"type": "hermitian", "k": matrix_to_json(2 * np.eye(2))})
    assert main(["validate-kernel", "--kernel", bad]) == 1
    assert json.loads(capsys.readouterr().out)["valid"] is False


def test_pipeline_commands(tmp_path, projection_spec, capsys):
    sched = str(tmp_path / "sched.json")
    circ = str(tmp_path / "circ.json")
    qasm = str(tmp_path / "circ.qasm")
    hist = str(tmp_path / "hist.csv")
    exact = str(tmp_path / "exact.json")
    pmf = str(tmp_path / "pmf.json")
    assert main(["schedule", "--input", projection_spec, "--out", sched]) == 0
    assert main(["compile", "--schedule", sched, "--out", circ, "--qasm", qasm]) == 0
    assert open(qasm).read().startswith("OPENQASM 2.0;")
    assert main(["simulate", "--circuit", circ, "--out", hist, "--exact", exact, "--shots", "50000"]) == 0
    assert main(["exact-pmf", "--kernel", projection_spec, "--out", pmf]) == 0
    capsys.readouterr()
    assert main(["tv-compare", "--p", exact, "--q", pmf]) == 0
    assert float(capsys.readouterr().out) <= 1e-9
    assert main(["tv-compare", "--p", hist, "--q", pmf]) == 0
    assert float(capsys.readouterr().out) < 0.02


def test_schedule_modes(tmp_path, rng, capsys):
    q = random_factor(rng, 3, 5)
    spec = write_json(tmp_path / "k.json", {"type": "projection_factor", "q": matrix_to_json(q)})
    graph = write_json(tmp_path / "g.json", {"n_nodes": 5, "edges": [[1, 2], [2, 3], [2, 4], [4, 5]]})
    for extra in (["--mode", "log-depth"], ["--mode", "graph", "--graph", graph]):
        out = str(tmp_path / f"s_{extra[1]}.json")
        assert main(["schedule", "--input", spec, "--out", out, *extra]) == 0
        assert "residual" in capsys.readouterr().err


@pytest.mark.parametrize("method", ["hkpv", "mixture", "dilation", "circuit"])
def test_sample_methods(tmp_path, projection_spec, method):
    out = tmp_path / f"{method}.csv"
    assert main(["sample", "--kernel", projection_spec, "--method", method, "--shots", "2000", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "bitstring,subset,count,frequency"
    assert sum(int(x.split(",")[2]) for x in lines[1:]) == 2000


def test_sample_pfpp_and_compile_bdg(tmp_path, rng):
    m, d = random_hermitian(rng, 3), random_skew(rng, 3)
    bdg = {"type": "bdg", "m": matrix_to_json(m), "delta": matrix_to_json(d)}
    thermal = write_json(tmp_path / "t.json", {**bdg, "beta": 0.5})
    proj = write_json(tmp_path / "p.json", {**bdg, "modes": [1, 2]})
    out = tmp_path / "pf.csv"
    assert main(["sample", "--kernel", thermal, "--method", "pfpp", "--shots", "1000", "--out", str(out)]) == 0
    assert main(["compile", "--kernel", proj, "--out", str(tmp_path / "c.json")]) == 0
    assert main(["sample", "--kernel", proj, "--method", "circuit", "--shots", "1000", "--out", str(tmp_path / "c.csv")]) == 0
    # a thermal spec cannot be compiled
    assert main(["compile", "--kernel", thermal, "--out", str(tmp_path / "x.json")]) == 2


def test_commands_are_deterministic(tmp_path, projection_spec):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        main(["sample", "--kernel", projection_spec, "--method", "hkpv", "--seed", "9", "--shots", "30000", "--out", str(out)])
        outs.append(out.read_bytes())
    threaded = tmp_path / "threads.csv"
    main(["sample", "--kernel", projection_spec, "--method", "hkpv", "--seed", "9", "--shots", "30000",
          "--workers", "4", "--out", str(threaded)])
    assert outs[0] == outs[1] == threaded.read_bytes()


def test_experiment_command(tmp_path, capsys):
    assert main(["experiment", "pfpp", "--out-dir", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["tv"] <= 0.02 and summary["seed"] == 42
    assert (tmp_path / "histogram.csv").exists()


def test_error_exit_code(tmp_path, capsys):
    assert main(["exact-pmf", "--kernel", str(tmp_path / "missing.json")]) == 2
    assert "error" in capsys.readouterr().err
