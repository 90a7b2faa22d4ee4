import json

from vtnroute.cli import main
from vtnroute.topology import Topology


def _write_spec(tmp_path, **kw):
    path = tmp_path / "spec.json"
    data = {"experiment": "exp1_load", "sweep": [2], "snapshots": 1, "updates": 2}
    data.update(kw)
    path.write_text(json.dumps(data))
    return str(path)


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--spec", _write_spec(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_reports_errors(tmp_path, capsys):
    assert main(["validate", "--spec", _write_spec(tmp_path, vtn_scale=999)]) == 1
    assert "exceeds" in capsys.readouterr().err


def test_bad_json_and_unknown_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["validate", "--spec", str(bad)]) == 2
    assert main(["validate", "--spec", _write_spec(tmp_path, colour=1)]) == 2
    assert main(["run", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_run_writes_csv_and_manifest(tmp_path):
    spec = _write_spec(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--spec", spec, "--out", str(out), "--seed", "4"]) == 0
    man = json.loads((out / "exp1_load.manifest.json").read_text())
    assert man["seed"] == 4 and man["rows"] == 1
    first = (out / "exp1_load.csv").read_bytes()
    assert main(["run", "--spec", spec, "--out", str(out), "--seed", "4"]) == 0
    assert (out / "exp1_load.csv").read_bytes() == first


def test_topology_command(tmp_path, capsys):
    out = tmp_path / "ft4.json"
    assert main(["topology", "--builtin", "ft4", "--out", str(out)]) == 0
    topo = Topology.load(str(out))
    assert len(topo.hypervisors) == 16
    assert main(["topology", "--builtin", "builtin:clos"]) == 0
    assert '"kind"' in capsys.readouterr().out


def test_spec_command(capsys):
    assert main(["spec", "hit_ratio"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["experiment"] == "hit_ratio"
