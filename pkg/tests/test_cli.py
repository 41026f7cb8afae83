import csv
import json

import numpy as np
import pytest

from reflpos.cli import EXIT_INCONCLUSIVE, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main, s_grid
from reflpos.kernels import Witness


def read_scan(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# reflpos pd-scan version=")
    assert "seed=" in lines[0] and "tol=" in lines[0] and "config_hash=" in lines[0]
    return list(csv.DictReader(lines[1:]))


def test_no_command_is_usage_error():
    assert main([]) == EXIT_USAGE


def test_unknown_option_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["pd-scan", "--family", "riesz", "--bogus"])
    assert e.value.code == EXIT_USAGE


def test_s_grid():
    assert s_grid(0, 3, 1) == [0.0, 1.0, 2.0, 3.0]
    assert s_grid(0, 0.3, 0.1) == [0.0, 0.1, 0.2, 0.3]


def test_pd_scan_bad_family_and_domain(capsys):
    assert main(["pd-scan", "--family", "nope"]) == EXIT_USAGE
    assert main(["pd-scan", "--family", "riesz", "--dim", "2", "--s-values", "2.5"]) == EXIT_USAGE
    assert main(["pd-scan", "--family", "riesz", "--s-step", "0"]) == EXIT_USAGE


def test_pd_scan_psd_rows(tmp_path):
    out = tmp_path / "scan.csv"
    code = main(["pd-scan", "--family", "riesz", "--dim", "2", "--s-values", "0,0.5,1.5",
                 "--pd-trials", "3", "--out", str(out)])
    assert code == EXIT_OK
    rows = read_scan(out)
    assert [r["verdict"] for r in rows] == ["psd"] * 3
    assert rows[0]["rank"] == "1"
    assert rows[1]["s"] == "5.0000000000000000e-01"


def test_pd_scan_witness_and_reload(tmp_path):
    out = tmp_path / "scan.csv"
    wdir = tmp_path / "w"
    code = main(["pd-scan", "--family", "halfspace_reflected", "--dim", "4", "--s-values", "1,2",
                 "--restarts", "2000", "--pd-trials", "3", "--out", str(out),
                 "--witness-dir", str(wdir)])
    assert code == EXIT_OK
    rows = read_scan(out)
    assert rows[0]["verdict"] == "witness" and rows[0]["predicate"] == "false"
    assert float(rows[0]["min_eig"]) < 0
    assert rows[1]["verdict"] == "psd"
    assert Witness.load(rows[0]["witness_path"]).verify()


def test_pd_scan_inconclusive_exit(tmp_path):
    # one restart of one step on a tiny config cannot find a witness
    code = main(["pd-scan", "--family", "halfspace_reflected", "--dim", "4", "--s-values", "1",
                 "--restarts", "1", "--steps", "1", "--points", "2",
                 "--out", str(tmp_path / "o.csv")])
    assert code in (EXIT_INCONCLUSIVE, EXIT_OK)
    rows = read_scan(tmp_path / "o.csv")
    assert (code == EXIT_INCONCLUSIVE) == (rows[0]["verdict"] == "inconclusive")


def test_pd_scan_json_and_reproducible(tmp_path):
    args = ["pd-scan", "--family", "cone_power", "--dim", "3", "--s-values", "0.5,1",
            "--pd-trials", "3", "--format", "json"]
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert main(args + ["--out", str(c), "--workers", "2"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    d = json.loads(a.read_text())
    assert [r["verdict"] for r in d["rows"]] == ["psd", "psd"]


def test_pd_scan_seed_changes_hash(tmp_path):
    base = ["pd-scan", "--family", "riesz", "--dim", "2", "--s-values", "1", "--pd-trials", "2"]
    main(base + ["--out", str(tmp_path / "a.csv")])
    main(base + ["--seed", "7", "--out", str(tmp_path / "b.csv")])
    ha = (tmp_path / "a.csv").read_text().splitlines()[0].split("config_hash=")[1]
    hb = (tmp_path / "b.csv").read_text().splitlines()[0].split("config_hash=")[1]
    assert ha != hb


def test_gns_default(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gns", "--out", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["rank"] == 1
    assert d["RP1"] and d["RP2"] and d["RP3"]
    for k, m in d["contraction_margins"].items():
        assert m == pytest.approx(np.exp(-float(k)), rel=1e-8)


def test_gns_cos_fails(tmp_path, capsys):
    assert main(["gns", "--phi", "cos", "--out", str(tmp_path / "g.json")]) == EXIT_VIOLATION
    assert "fails" in capsys.readouterr().err


def test_gns_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"phi": {"kind": "measure", "atoms": [
        {"lambda": 0.5, "weight": 1.0}, {"lambda": 2.0, "weight": 0.5}]}}))
    assert main(["gns", str(cfg), "--out", str(tmp_path / "o.json")]) == EXIT_OK
    assert main(["gns", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_fit_csv_and_json(tmp_path, capsys):
    xs = np.linspace(0, 5, 40)
    ys = 0.3 * np.exp(-0.5 * xs) + 0.7 * np.exp(-1.5 * xs)
    p = tmp_path / "s.csv"
    p.write_text("x,phi\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in zip(xs, ys)))
    out = tmp_path / "m.json"
    assert main(["fit", str(p), "--out", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert np.allclose([a["lambda"] for a in d["atoms"]], [0.5, 1.5])
    assert "residual" in capsys.readouterr().err
    j = tmp_path / "s.json"
    j.write_text(json.dumps({"x": xs.tolist(), "phi": ys.tolist()}))
    assert main(["fit", str(j), "--out", str(out)]) == EXIT_OK


def test_fit_noisy_threshold(tmp_path):
    rng = np.random.default_rng(0)
    xs = np.linspace(0, 5, 40)
    ys = np.exp(-xs) + 1e-3 * rng.normal(size=40)
    p = tmp_path / "s.csv"
    p.write_text("".join(f"{float(x)!r},{float(y)!r}\n" for x, y in zip(xs, ys)))
    assert main(["fit", str(p), "--out", str(tmp_path / "o.json")]) == EXIT_INCONCLUSIVE
    assert main(["fit", str(p), "--threshold", "1", "--out", str(tmp_path / "o.json")]) == EXIT_OK


def test_fit_bad_input(tmp_path):
    assert main(["fit", str(tmp_path / "none.csv")]) == EXIT_USAGE
    p = tmp_path / "bad.csv"
    p.write_text("1,abc\n")
    assert main(["fit", str(p)]) == EXIT_USAGE


@pytest.mark.parametrize("suite", ["conformal", "kernels", "cayley"])
def test_verify_suites_pass(suite, tmp_path):
    out = tmp_path / "v.csv"
    assert main(["verify", suite, "--trials", "50", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "identity,max_error,status"
    for line in body[1:]:
        _, err, status = line.split(",")
        assert status == "pass" and float(err) <= 1e-9


def test_verify_unknown_suite():
    assert main(["verify", "nothing"]) == EXIT_USAGE


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "reflpos", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "reflpos" in r.stdout
