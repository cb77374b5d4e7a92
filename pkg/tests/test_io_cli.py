import json

import pytest
from click.testing import CliRunner

from mtbounds import cli
from mtbounds import config as C
from mtbounds.moments import MomentError, MomentTable, moments_from_microdata


def write_csv(path, rows, header="y,d,z"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")


def test_microdata_hand_arithmetic(tmp_path):
    # four rows, one instrument value: P(D=1)=0.5, E[Y 1{D=1}]=0.25,
    # E[Y 1{D=0}]=0.5
    f = tmp_path / "m.csv"
    write_csv(f, ["1,1,0", "0,1,0", "1,0,0", "1,0,0"])
    t = moments_from_microdata(f)
    assert t.P[(1, 0, 0)] == pytest.approx(0.5)
    assert t.E[(1, 0, 0)] == pytest.approx(0.25)
    assert t.E[(0, 0, 0)] == pytest.approx(0.5)
    assert t.p_xz[(0, 0)] == 1.0


def test_microdata_degenerate_cases(tmp_path):
    f = tmp_path / "all1.csv"
    write_csv(f, ["1,1,0", "0.5,1,0"])
    t = moments_from_microdata(f)
    assert t.treatments == (1,)
    assert t.P[(1, 0, 0)] == 1.0
    f2 = tmp_path / "single.csv"
    write_csv(f2, ["0.7,1,0"])
    t2 = moments_from_microdata(f2)
    assert t2.P[(1, 0, 0)] == 1.0 and t2.E[(1, 0, 0)] == pytest.approx(0.7)


def test_microdata_errors(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("y,d\n1,1\n")
    with pytest.raises(MomentError):
        moments_from_microdata(f)
    f2 = tmp_path / "empty_cell.csv"
    write_csv(f2, ["1,1,0", "0,0,1", "1,1,1"], header="y,d,z,x")
    # combinations (z=0,x=1) etc never observed
    f2.write_text("y,d,z,x\n1,1,0,0\n0,0,1,1\n")
    with pytest.raises(MomentError, match="empty"):
        moments_from_microdata(f2)
    f3 = tmp_path / "novals.csv"
    f3.write_text("y,d,z\n")
    with pytest.raises(MomentError, match="no data"):
        moments_from_microdata(f3)


def test_microdata_factored_instruments(tmp_path):
    f = tmp_path / "fac.csv"
    write_csv(f, ["1,1,0,1", "0,0,0,1"], header="y,d,z1,z2")
    t = moments_from_microdata(f)
    assert t.instruments == ((0, 1),)


def test_table_json_round_trip(tmp_path):
    f = tmp_path / "m.csv"
    write_csv(f, ["1,1,0", "0,1,0", "1,0,0", "0.25,1,1", "0,0,1"])
    t = moments_from_microdata(f)
    t2 = MomentTable.from_json(t.to_json())
    assert t2.P == t.P and t2.E == t.E
    assert t2.p_xz == t.p_xz
    assert t.to_json() == t2.to_json()


def test_table_validation_messages():
    t = MomentTable((0, 1), (0,), (0,),
                    P={(1, 0, 0): 0.5, (0, 0, 0): 0.48},
                    E={(1, 0, 0): 0.1, (0, 0, 0): 0.2},
                    p_x={0: 1.0}, p_xz={(0, 0): 1.0})
    errs = t.validate()
    assert any("sum to 0.98" in e and "z=0" in e for e in errs)


def test_bad_schema_version():
    with pytest.raises(MomentError):
        MomentTable.from_json(json.dumps({"schema_version": 99}))
    with pytest.raises(C.ConfigError):
        C.RunConfig.from_json(json.dumps({"schema_version": 99}))


BASE_CONFIG = {
    "schema_version": 1,
    "model": {"kind": "binary"},
    "family": "independence",
    "target": {"kind": "ate", "d1": 1, "d2": 0},
    "restrictions": {"bounds": [0.0, 1.0]},
}


def test_config_unknown_keys_rejected():
    for mutate in [
        lambda d: d.update(extra=1),
        lambda d: d["model"].update(shape="x"),
        lambda d: d["target"].update(weird=1),
        lambda d: d["restrictions"].update(convex=True),
        lambda d: d.update(lambda_grid={"rho": [0.0], "step": 2}),
        lambda d: d.update(basis={"kind": "piecewise", "order": 3}),
        lambda d: d.update(tolerances={"eps": 1}),
    ]:
        doc = json.loads(json.dumps(BASE_CONFIG))
        mutate(doc)
        with pytest.raises(C.ConfigError):
            C.RunConfig.from_json(json.dumps(doc))


def test_config_validate_semantic_errors(tmp_path):
    f = tmp_path / "m.csv"
    write_csv(f, ["1,1,0", "0,0,0"])
    table = moments_from_microdata(f)
    doc = dict(BASE_CONFIG, model={"kind": "multinomial"},
               family="multinomial_latent")
    cfg = C.RunConfig.from_json(json.dumps(doc))
    errs = C.validate(cfg, table)
    assert any("outside model support" in e or "3 treatments" in e for e in errs)
    # gaussian family on a one-dimensional model
    cfg2 = C.RunConfig.from_json(json.dumps(dict(BASE_CONFIG, family="gaussian",
                                                 lambda_grid={"rho": [0.2]})))
    write_csv(tmp_path / "b.csv", ["1,1,0", "0,0,0"])
    tb = moments_from_microdata(tmp_path / "b.csv")
    errs2 = C.validate(cfg2, tb)
    assert any("dimension" in e for e in errs2)


def binary_fixture(tmp_path):
    f = tmp_path / "micro.csv"
    rows = []
    # z=0: 4 of 10 treated, treated y=1 half the time; z=1: 7 of 10 treated
    rows += ["1,1,0", "0,1,0", "1,1,0", "0,1,0"] + ["0,0,0"] * 4 + ["1,0,0"] * 2
    rows += ["1,1,1"] * 4 + ["0,1,1"] * 3 + ["1,0,1", "0,0,1", "0,0,1"]
    write_csv(f, rows)
    cfgf = tmp_path / "cfg.json"
    cfgf.write_text(json.dumps(BASE_CONFIG, indent=1))
    return f, cfgf


def test_cli_end_to_end(tmp_path):
    micro, cfgf = binary_fixture(tmp_path)
    runner = CliRunner()
    mpath = tmp_path / "moments.json"
    r = runner.invoke(cli.main, ["moments", str(micro), "-o", str(mpath)])
    assert r.exit_code == 0, r.output
    r = runner.invoke(cli.main, ["validate", "-c", str(cfgf), "-m", str(mpath)])
    assert r.exit_code == 0 and "ok" in r.output
    r = runner.invoke(cli.main, ["identify", "-c", str(cfgf), "-m", str(mpath)])
    assert r.exit_code == 0 and "g[j=1" in r.output
    out = tmp_path / "out"
    r = runner.invoke(cli.main, ["bounds", "-c", str(cfgf), "-m", str(mpath),
                                 "-o", str(out)])
    assert r.exit_code == 0, r.output
    assert "identified set" in r.output
    doc = json.loads((out / "results.json").read_text())
    assert doc["identified_set"] != "empty"
    assert (out / "points.csv").read_text().startswith("index,family,rho")
    lpf = tmp_path / "prog.lp"
    r = runner.invoke(cli.main, ["export-lp", "-c", str(cfgf), "-m", str(mpath),
                                 "-o", str(lpf)])
    assert r.exit_code == 0
    assert "Minimize" in lpf.read_text()


def test_cli_validation_exit_code(tmp_path):
    micro, cfgf = binary_fixture(tmp_path)
    runner = CliRunner()
    mpath = tmp_path / "moments.json"
    runner.invoke(cli.main, ["moments", str(micro), "-o", str(mpath)])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(BASE_CONFIG, family="nope")))
    r = runner.invoke(cli.main, ["validate", "-c", str(bad), "-m", str(mpath)])
    assert r.exit_code == cli.EXIT_VALIDATION
    r = runner.invoke(cli.main, ["bounds", "-c", str(bad), "-m", str(mpath),
                                 "-o", str(tmp_path / "o")])
    assert r.exit_code == cli.EXIT_VALIDATION
    # out-of-range grid index
    r = runner.invoke(cli.main, ["identify", "-c", str(cfgf), "-m", str(mpath),
                                 "--lambda", "5"])
    assert r.exit_code == cli.EXIT_VALIDATION


def test_cli_emit_determinism_across_workers(tmp_path):
    micro, cfgf = binary_fixture(tmp_path)
    runner = CliRunner()
    mpath = tmp_path / "moments.json"
    runner.invoke(cli.main, ["moments", str(micro), "-o", str(mpath)])
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    r1 = runner.invoke(cli.main, ["--workers", "1", "bounds", "-c", str(cfgf),
                                  "-m", str(mpath), "-o", str(out1)])
    r2 = runner.invoke(cli.main, ["--workers", "8", "bounds", "-c", str(cfgf),
                                  "-m", str(mpath), "-o", str(out2)])
    assert r1.exit_code == r2.exit_code == 0
    assert (out1 / "results.json").read_bytes() == (out2 / "results.json").read_bytes()
    assert (out1 / "points.csv").read_bytes() == (out2 / "points.csv").read_bytes()
