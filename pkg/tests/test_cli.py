import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from starkmbl.cli import main
from starkmbl.ensemble import SweepConfig, read_results

# tiny test systems routinely land outside the soft physical band
pytestmark = pytest.mark.filterwarnings("ignore:<r> = .* is outside:RuntimeWarning")

FIXTURES = Path(__file__).parent / "fixtures"


def table(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def files_under(root):
    return sorted(str(p.relative_to(root)) for p in Path(root).rglob("*") if p.is_file())


def write_config(path, **kw):
    d = dict(L=[8], F=[1.0], eps=[0.5], samples={"8": 2}, k_window=8, master_seed=3,
             output=str(path.parent / "res.csv"))
    d.update(kw)
    path.write_text(json.dumps(d))
    return path


def test_spectrum_two_sites(capsys):
    assert main(["spectrum", "--L", "2", "--N", "1", "--W", "0", "--F", "0"]) == 0
    header, rows = table(capsys.readouterr().out)
    assert header == ["n", "E", "energy_density", "S", "r"]
    E = [float(r["E"]) for r in rows]
    assert np.allclose(E, [-0.5, 0.5], atol=1e-15)
    assert all(abs(float(r["S"]) - np.log(2)) < 1e-12 for r in rows)


def test_spectrum_same_seed_same_bytes(tmp_path):
    args = ["spectrum", "--L", "8", "--F", "0.6", "--seed", "12", "--k", "20"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    _, rows = table(a.decode())
    assert len(rows) == 20
    assert sum(1 for r in rows if r["r"]) == 18
    assert main(args[:-2] + ["--seed", "13", "--k", "20", "--out", str(tmp_path / "c.csv")]) == 0
    assert (tmp_path / "c.csv").read_bytes() != a


def test_spectrum_dump_matrix(tmp_path):
    path = tmp_path / "h.txt"
    assert main(["spectrum", "--L", "4", "--dump-matrix", str(path), "--out", str(tmp_path / "s.csv")]) == 0
    m = np.loadtxt(path)
    assert m.shape[1] == 3 and np.all(m[:, 0] <= m[:, 1])


def test_spectrum_resource_error(capsys):
    assert main(["spectrum", "--L", "30"]) == 3
    assert "resource error" in capsys.readouterr().err


@pytest.mark.parametrize("args", [["--F", "-1"], ["--eps", "1.5"], ["--W", "-0.2"]])
def test_spectrum_bad_parameters(args, capsys):
    assert main(["spectrum", "--L", "6"] + args) == 2
    err = capsys.readouterr().err
    assert "usage: starkmbl spectrum" in err


def test_missing_required_argument():
    with pytest.raises(SystemExit) as ex:
        main(["spectrum"])
    assert ex.value.code != 0


@pytest.mark.parametrize("cmd", ["spectrum", "sweep", "collapse", "phase-diagram"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as ex:
        main([cmd, "--help"])
    assert ex.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "starkmbl.cli", "--help"],
                         capture_output=True, text=True, check=True)
    assert "spectrum" in out.stdout and "phase-diagram" in out.stdout


def test_sweep_minimal_config(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert main(["sweep", "--config", str(cfg)]) == 0
    recs = read_results(tmp_path / "res.csv")
    assert len(recs) == 1 and recs[0].n_eigenpairs == 16
    manifest = json.loads((tmp_path / "res.manifest.json").read_text())
    first = (tmp_path / "res.csv").read_text().splitlines()[0]
    assert first.endswith(manifest["config_hash"])
    assert manifest["master_seed"] == 3
    for fig in manifest["outputs"]["figures"]:
        assert Path(fig).read_bytes()[:4] == b"\x89PNG"


def test_sweep_resume_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", F=[0.5, 1.0, 1.5, 2.0])
    assert main(["sweep", "--config", str(cfg), "--no-figures"]) == 0
    full = (tmp_path / "res.csv").read_bytes()
    (tmp_path / "res.csv").unlink()
    for ck in sorted((tmp_path / "res.checkpoints").glob("*.json"))[:2]:
        ck.unlink()
    assert main(["sweep", "--config", str(cfg), "--resume", "--no-figures"]) == 0
    assert (tmp_path / "res.csv").read_bytes() == full


def test_sweep_threads_do_not_change_output(tmp_path):
    cfg = write_config(tmp_path / "c.json", F=[0.5, 2.0])
    assert main(["sweep", "--config", str(cfg), "--no-figures", "--output", str(tmp_path / "a.csv")]) == 0
    assert main(["sweep", "--config", str(cfg), "--no-figures", "--threads", "2",
                 "--output", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize(
    "content,needle",
    [
        ('{"L": [8], "F": [1.0], "eps": [0.5], "samples": {"8": 2}, "k_windw": 5}', "k_windw"),
        ('{"L": [8], "F": "fast", "eps": [0.5], "samples": {"8": 2}}', "'F'"),
        ('{"L": [8], "F": [1.0], "eps": [0.5]}', "'samples'"),
        ('{"L": [8], "F": [1.0],', "invalid JSON"),
    ],
)
def test_sweep_malformed_config(tmp_path, capsys, content, needle):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    assert main(["sweep", "--config", str(cfg)]) == 2
    assert needle in capsys.readouterr().err
    assert files_under(tmp_path) == ["bad.json"]


def test_print_default_config(capsys):
    assert main(["sweep", "--print-default-config"]) == 0
    cfg = SweepConfig.from_dict(json.loads(capsys.readouterr().out))
    assert cfg.L == [10, 12, 14] and cfg.samples == {10: 400, 12: 200, 14: 100}


def test_collapse_recovers_planted(tmp_path, capsys):
    out = tmp_path / "col"
    assert main(["collapse", str(FIXTURES / "synthetic_sweep.csv"), "--eps", "0.5",
                 "--out-dir", str(out)]) == 0
    rep = json.loads((out / "collapse_eps0.50.json").read_text())
    assert abs(rep["F_c"] - 1.0) < 0.02 and abs(rep["nu"] - 0.8) < 0.05
    assert rep["metadata"]["source_config_hash"] == "synthetic-fc1.0-nu0.8"
    header, rows = table((out / "collapse_eps0.50_rescaled.csv").read_text())
    assert header == ["x", "y", "L"] and len(rows) == 4 * 19
    assert (out / "collapse_eps0.50.png").exists()
    assert "F_c=1.00" in capsys.readouterr().out


def test_collapse_identical_curves_unidentifiable(tmp_path):
    out = tmp_path / "col"
    assert main(["collapse", str(FIXTURES / "identical_curves.csv"), "--eps", "0.5",
                 "--w-grid", "0.5,1.0", "--out-dir", str(out), "--no-figures"]) == 0
    rep = json.loads((out / "collapse_eps0.50.json").read_text())
    assert rep["D_min"] < 1e-20
    assert "unidentifiable" in rep["flags"]
    assert files_under(out) == ["collapse_eps0.50.json", "collapse_eps0.50_rescaled.csv"]


def test_collapse_insufficient_sizes(tmp_path, capsys):
    assert main(["collapse", str(FIXTURES / "synthetic_sweep.csv"), "--eps", "0.7",
                 "--out-dir", str(tmp_path / "x")]) == 2
    assert "at least two system sizes" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_collapse_bad_w_grid(tmp_path):
    code = main(["collapse", str(FIXTURES / "synthetic_sweep.csv"), "--eps", "0.5",
                 "--w-grid", "0.5,2", "--out-dir", str(tmp_path)])
    assert code == 2


def test_phase_diagram(tmp_path, capsys):
    out = tmp_path / "pd"
    assert main(["phase-diagram", str(FIXTURES / "synthetic_sweep.csv"), "--w-grid", "0.5",
                 "--out-dir", str(out)]) == 0
    doc = json.loads((out / "phase_diagram.json").read_text())
    assert [round(e["eps"], 2) for e in doc["edge"]] == [0.3, 0.5]
    assert abs(doc["edge"][0]["F_c"] - 0.8) < 0.02 and abs(doc["edge"][1]["F_c"] - 1.0) < 0.02
    assert doc["asymmetry"]["eps_at_max"] == 0.5
    assert files_under(out) == ["mobility_edge.csv", "phase_diagram.json", "phase_diagram.png"]


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("STARKMBL_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["collapse", str(FIXTURES / "identical_curves.csv"), "--eps", "0.5",
                 "--w-grid", "1.0", "--out-dir", str(tmp_path / "ignored"), "--no-figures"]) == 0
    assert (tmp_path / "env" / "collapse_eps0.50.json").exists()
    assert not (tmp_path / "ignored").exists()
    cfg = write_config(tmp_path / "c.json", output=str(tmp_path / "elsewhere" / "r.csv"))
    assert main(["sweep", "--config", str(cfg), "--no-figures"]) == 0
    assert (tmp_path / "env" / "r.csv").exists()
    assert not (tmp_path / "elsewhere").exists()
