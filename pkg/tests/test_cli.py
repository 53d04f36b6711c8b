import subprocess
import sys

import pytest

from ktreebn.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VERIFY, main
from ktreebn.graph import read_dag_file


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "inverted-tree", "--k", "2", "--n", "8", "--seed", "1",
                 "-o", str(d / "net.txt")]) == EXIT_OK
    assert main(["synth", "sample", "--net", str(d / "net.txt"), "--rows", "800", "--seed", "2",
                 "-o", str(d / "data.csv")]) == EXIT_OK
    assert main(["score", "--data", str(d / "data.csv"), "-k", "2", "-o", str(d / "scores.txt")]) == EXIT_OK
    return d


@pytest.mark.parametrize("method", ["kg", "kastar", "s2", "s2plus"])
def test_learn_then_verify(workdir, method, capsys):
    out = workdir / f"{method}.dag"
    rc = main(["learn", "--data", str(workdir / "data.csv"), "-k", "2", "--method", method,
               "--max-iterations", "5", "--seed", "3", "-o", str(out)])
    assert rc == EXIT_OK
    assert f"method={method}" in capsys.readouterr().out
    rc = main(["verify", "--dag", str(out), "--data", str(workdir / "data.csv"), "-k", "2"])
    assert rc == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_learn_from_scores_and_exact(workdir, capsys):
    out = workdir / "s.dag"
    assert main(["learn", "--scores", str(workdir / "scores.txt"), "-k", "2", "--method", "kg",
                 "--max-iterations", "4", "-o", str(out)]) == EXIT_OK
    assert main(["verify", "--dag", str(out), "--scores", str(workdir / "scores.txt"), "-k", "2"]) == EXIT_OK
    assert main(["exact", "--scores", str(workdir / "scores.txt"), "-o", str(workdir / "e.dag")]) == EXIT_OK
    ex = read_dag_file(workdir / "e.dag").total
    assert ex >= read_dag_file(out).total - 1e-6


def test_learn_stdout(workdir, capsys):
    assert main(["learn", "--data", str(workdir / "data.csv"), "-k", "2", "--max-iterations", "2"]) == EXIT_OK
    cap = capsys.readouterr()
    assert cap.out.splitlines()[0].startswith("8 ")
    assert "method=kg" in cap.err


def test_verify_detects_tampering(workdir, capsys):
    src = workdir / "kg.dag"
    if not src.exists():
        main(["learn", "--data", str(workdir / "data.csv"), "-k", "2", "--max-iterations", "3", "-o", str(src)])
    lines = src.read_text().splitlines()
    head = lines[0].split()
    head[1] = f"{float(head[1]) + 5:.6f}"
    bad = workdir / "bad.dag"
    bad.write_text("\n".join([" ".join(head)] + lines[1:]) + "\n")
    assert main(["verify", "--dag", str(bad), "--data", str(workdir / "data.csv"), "-k", "2"]) == EXIT_VERIFY
    assert "score: FAIL" in capsys.readouterr().out


def test_verify_detects_cycle(tmp_path, workdir, capsys):
    p = tmp_path / "cyc.dag"
    p.write_text("3 0.0\n0 0.0 1 1\n1 0.0 1 2\n2 0.0 1 0\n")
    data = tmp_path / "d.csv"
    data.write_text("a,b,c\n0,1,0\n1,0,1\n")
    assert main(["verify", "--dag", str(p), "--data", str(data), "-k", "2"]) == EXIT_VERIFY
    assert "cycle" in capsys.readouterr().out


def test_usage_errors(workdir, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["learn", "--data", "x.csv"]) == EXIT_USAGE
    assert main(["learn", "--data", str(workdir / "data.csv"), "-k", "2"]) == EXIT_USAGE
    assert main(["learn", "--scores", str(workdir / "scores.txt"), "-k", "2", "--method", "s2",
                 "--max-iterations", "2"]) == EXIT_USAGE
    assert main(["bench", "--scores", str(workdir / "scores.txt"), "-k", "2",
                 "--iterations", "foo"]) == EXIT_USAGE


def test_runtime_errors(tmp_path, workdir, capsys):
    assert main(["score", "--data", str(tmp_path / "missing.csv"), "-k", "2"]) == EXIT_RUNTIME
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n0,1\n1\n")
    assert main(["score", "--data", str(bad), "-k", "1"]) == EXIT_RUNTIME
    assert main(["bench", "--scores", str(workdir / "scores.txt"), "-k", "2", "--methods", "kg",
                 "--time-budget-seconds", "0"]) == EXIT_RUNTIME


def test_bench_inverted_tree(tmp_path, capsys):
    rec = tmp_path / "rec.txt"
    rc = main(["bench", "--inverted-tree", "--n", "8", "--rows", "500", "--instances", "2", "-k", "2",
               "--iterations", "kg=20,kastar=3,s2=20,s2plus=1", "--records", str(rec)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "mean W:" in out
    recs = rec.read_text().splitlines()
    assert sum(r.startswith("method=") for r in recs) == 8


@pytest.mark.parametrize("method", ["kg", "kastar", "s2", "s2plus"])
def test_learn_deterministic(workdir, tmp_path, method):
    outs = []
    for i in range(2):
        p = tmp_path / f"{i}.dag"
        main(["learn", "--data", str(workdir / "data.csv"), "-k", "2", "--method", method,
              "--max-iterations", "4", "--seed", "11", "-o", str(p)])
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ktreebn", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "learn" in r.stdout
