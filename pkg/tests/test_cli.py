import json
import math
from importlib import resources

import pytest

from shadowlab import cli

DATA = resources.files("shadowlab") / "data"


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


def assert_no_bare_numbers(obj, path="$"):
    """Every float in the JSON sits inside a {value, error} record."""
    if isinstance(obj, dict):
        if set(obj) == {"value", "error"}:
            return
        for k, v in obj.items():
            assert_no_bare_numbers(v, f"{path}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            assert_no_bare_numbers(v, f"{path}[{i}]")
    else:
        assert not isinstance(obj, float), f"bare number at {path}"


def test_linear_identity(tmp_path):
    assert run("linear", "--n", 3, "--k", 2, "--samples", 50, "--out", tmp_path) == cli.EXIT_OK
    d = load(tmp_path / "linear_shadow.json")
    assert d["volume"]["value"] == pytest.approx(math.pi**2 / 2)
    assert d["equality"] is True
    assert (tmp_path / "linear_sweep.csv").read_text().count("\n") == 51
    assert_no_bare_numbers(d)


def test_linear_diag_config(tmp_path):
    assert run("linear", "--config", DATA / "linear_diag.json", "--samples", 20, "--out", tmp_path) == 0
    assert load(tmp_path / "linear_shadow.json")["volume"]["value"] == pytest.approx(math.pi)


def test_outputs_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert run("linear", "--samples", 30, "--seed", 5, "--out", tmp_path / sub) == 0
    for name in ("linear_shadow.json", "linear_sweep.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_toml_config(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('n = 2\nk = 1\nsamples = 10\n[hamiltonian]\nn = 2\nexpr = "p1**2*q2"\n')
    assert run("expansion", "--config", cfg, "--out", tmp_path / "o") == 0
    d = load(tmp_path / "o" / "expansion.json")
    assert d["C"]["value"] == pytest.approx(math.pi / 2)
    assert d["symmetry_flag"] is False
    assert (tmp_path / "o" / "fit.csv").exists() and (tmp_path / "o" / "fit.svg").exists()
    assert_no_bare_numbers(d)


def test_expansion_zero_hamiltonian(tmp_path):
    assert run("expansion", "--out", tmp_path) == 0
    d = load(tmp_path / "expansion.json")
    assert d["C"]["value"] == 0.0
    assert all(abs(f["value"] - math.pi) < 1e-9 for f in d["f"])


def test_expansion_symmetric_example(tmp_path):
    assert run("expansion", "--config", DATA / "symmetric_quadratic.json", "--out", tmp_path) == 0
    d = load(tmp_path / "expansion.json")
    assert d["symmetry_flag"] is True
    assert abs(d["C"]["value"]) <= d["C"]["error"]


@pytest.mark.parametrize("cmd", ["section", "wirtinger", "loops", "hopf", "flow", "counterexamples"])
def test_other_commands(cmd, tmp_path):
    assert run(cmd, "--config", DATA / "cubic_k1.json", "--samples", 100, "--out", tmp_path) == 0
    outputs = list(tmp_path.glob("*.json"))
    assert outputs
    for p in outputs:
        assert_no_bare_numbers(load(p))


def test_boundary_command(tmp_path):
    assert run("boundary", "--config", DATA / "nonexact_k1.json", "--out", tmp_path) == 0
    d = load(tmp_path / "boundary.json")
    assert d["relative_disagreement"]["value"] <= 0.02
    assert (tmp_path / "f_table.csv").exists() and (tmp_path / "boundary.csv").exists()


def test_config_errors(tmp_path, capsys):
    assert run("linear", "--n", 1, "--k", 2) == cli.EXIT_CONFIG
    assert run("linear", "--config", tmp_path / "missing.json") == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 2, "frobnicate": 1}))
    assert run("linear", "--config", bad) == cli.EXIT_CONFIG
    bad.write_text(json.dumps({"n": 2, "tolerances": {"volume": -1}}))
    assert run("linear", "--config", bad) == cli.EXIT_CONFIG
    bad.write_text(json.dumps({"n": 2, "hamiltonian": {"file": "nowhere.json"}}))
    assert run("flow", "--config", bad) == cli.EXIT_CONFIG
    bad.write_text(json.dumps({"n": 2, "phi": {"matrix": [[2, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]}}))
    assert run("linear", "--config", bad) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_non_complex_preimage_is_config_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 2, "k": 1, "hamiltonian": {"n": 2, "expr": "p1**2*q2"},
                               "phi": {"random": {"seed": 3, "scale": 0.4}}}))
    assert run("boundary", "--config", cfg, "--out", tmp_path / "o") == cli.EXIT_CONFIG


def test_numerical_failure_keeps_partial_results(tmp_path):
    # q1' = 100 q1^2 escapes before t = 0.01 from the unit sphere, so the boundary solver must give up
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 2, "k": 1, "hamiltonian": {"n": 2, "expr": "100*p1*q1**2"},
                               "t_grid": [0.02, 0.04, 0.06, 0.08]}))
    assert run("expansion", "--config", cfg, "--out", tmp_path / "o") == cli.EXIT_NUMERICAL
    d = load(tmp_path / "o" / "expansion.json")
    assert "failed_at_t" in d and "C" in d


def test_selftest_passes(capsys):
    assert run("selftest") == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 9


def test_selftest_sign_mutation(capsys):
    assert run("selftest", "--mutate", "sign") == cli.EXIT_INVARIANT
    fails = [line for line in capsys.readouterr().out.splitlines() if line.startswith("FAIL")]
    assert len(fails) == 1 and "iota" in fails[0]


def test_selftest_mu_mutation(capsys):
    assert run("selftest", "--mutate", "mu") == cli.EXIT_INVARIANT
    fails = [line for line in capsys.readouterr().out.splitlines() if line.startswith("FAIL")]
    assert len(fails) == 1 and "Hopf" in fails[0] and "ratio 3.1416" in fails[0]


def test_shipped_configs_validate():
    names = sorted(p.name for p in DATA.iterdir() if p.name.endswith(".json"))
    assert names == ["cubic_k1.json", "cubic_k2.json", "linear_diag.json", "nonexact_k1.json",
                     "symmetric_quadratic.json"]
    for name in names:
        args = cli.make_parser().parse_args(["linear", "--config", str(DATA / name)])
        cfg = cli.build_config(args)
        cfg.build_hamiltonian()
        cfg.build_phi()
