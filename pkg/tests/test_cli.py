import json

import pytest

from fomdp.cli import EXIT_INVALID, EXIT_IO, EXIT_NOT_CONVERGED, EXIT_OK, main


@pytest.fixture(scope="module")
def instance(tmp_path_factory):
    out = tmp_path_factory.mktemp("bw")
    assert main(["gen-bw", "--blocks", "2", "--colors", "2", "--seed", "0", "-o", str(out)]) == EXIT_OK
    return out, out / "bw-2-2-s0.fcd", out / "bw-2-2-s0.fcp"


@pytest.fixture(scope="module")
def solved(instance):
    out, dom, prob = instance
    assert main(["solve", str(dom), str(prob), "-o", str(out)]) == EXIT_OK
    return out / "colored-bw-2-2-s0.values", out / "colored-bw-2-2-s0.policy"


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_gen_bw_writes_both_files(instance, capsys):
    _, dom, prob = instance
    assert dom.read_text().startswith("domain colored-bw-2-2")
    assert "init:" in prob.read_text()


def test_solve_writes_outputs(instance, solved, capsys):
    out, dom, prob = instance
    main(["solve", str(dom), str(prob), "-o", str(out)])
    stats = kv(capsys.readouterr().out)
    assert stats["converged"] == "True" and stats["algorithm"] == "folao"
    assert float(stats["initial_value"]) == pytest.approx(484, abs=1e-3)
    record = json.loads((out / "colored-bw-2-2-s0.stats.json").read_text())
    assert record["expanded_states"] == int(stats["expanded_states"])
    assert "graph_sizes" in record and "parents" not in record


def test_exhaustive_solve(instance, tmp_path, capsys):
    _, dom, prob = instance
    assert main(["solve", str(dom), str(prob), "--exhaustive", "-o", str(tmp_path)]) == EXIT_OK
    stats = kv(capsys.readouterr().out)
    assert stats["algorithm"] == "fovia-exhaustive" and stats["reachable_states"] == "5"


def test_solve_reports_non_convergence(instance, tmp_path, capsys):
    _, dom, prob = instance
    code = main(["solve", str(dom), str(prob), "--max-outer-iters", "1", "-o", str(tmp_path)])
    assert code == EXIT_NOT_CONVERGED
    assert "did not converge" in capsys.readouterr().err


def test_simulate(instance, solved, capsys):
    _, dom, prob = instance
    assert main(["simulate", str(dom), str(prob), str(solved[1]), "--runs", "200", "--seed", "1"]) == EXIT_OK
    s = kv(capsys.readouterr().out)
    assert s["runs"] == "200" and s["cap"] == "1000" and s["rng"] == "PCG64"
    assert abs(float(s["mean"]) - 484) < 3 * float(s["stderr"]) + 1e-9


def test_oracle_check_passes_and_fails(instance, solved, tmp_path, capsys):
    _, dom, prob = instance
    values, policy = solved
    assert main(["oracle-check", str(dom), str(prob), str(values), "--policy", str(policy)]) == EXIT_OK
    assert "passed=True" in capsys.readouterr().out
    bad = tmp_path / "bad.values"
    bad.write_text("".join(
        line.rsplit("\t", 1)[0] + "\t0.0\n" if not line.startswith("default") else line + "\n"
        for line in values.read_text().splitlines()))
    assert main(["oracle-check", str(dom), str(prob), str(bad)]) == EXIT_INVALID
    assert "passed=False" in capsys.readouterr().out


def test_inspect(solved, capsys):
    assert main(["inspect", str(solved[0])]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[0] value=" in out and "    P: " in out and "default value=" in out


def test_invalid_domain_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.fcd"
    bad.write_text("domain d\ngamma: 2\n")
    assert main(["solve", str(bad), str(bad)]) == EXIT_INVALID
    assert capsys.readouterr().err.startswith("error:")


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["inspect", str(tmp_path / "nope.values")]) == EXIT_IO


def test_bad_generator_arguments(tmp_path, capsys):
    assert main(["gen-bw", "--blocks", "2", "--colors", "5", "-o", str(tmp_path)]) == EXIT_INVALID


def test_subcommand_required(capsys):
    with pytest.raises(SystemExit):
        main([])
