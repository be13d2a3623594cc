import csv
import json
import math
import re
import subprocess
import sys
import xml.dom.minidom
from pathlib import Path

import numpy as np
import pytest

from walshms import cli, gate_model as gm, scan
from walshms.config import load_config, parse_config
from walshms.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
TWO_PI = 2 * math.pi
NUMBER = re.compile(r"^-?\d\.\d{16}e[+-]\d{2,3}$")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def write_json(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# ---------------------------------------------------------------- config


def test_defaults_and_conversion():
    cfg = parse_config({"gate": {"omega_hz": 1000.0, "delta_hz": 250.0, "gate_time": 2e-3}})
    p = cfg.gate_params()
    assert p.omega == pytest.approx(TWO_PI * 1000.0)
    assert p.delta == pytest.approx(TWO_PI * 250.0)
    assert p.gate_time == 2e-3 and p.walsh_index == 0 and p.nbar == 0.0


def test_plan_order_in_config():
    cfg = parse_config({"gate": {"omega_hz": 1470.0, "plan_order": 3, "ion_count": 2}})
    p = cfg.gate_params()
    assert p.walsh_index == 7
    assert (p.gate_time, p.delta) == gm.plan_gate(3, TWO_PI * 1470.0)


@pytest.mark.parametrize(
    "doc,where",
    [
        ({"gate": {"omega": 1.0}}, "gate"),
        ({"scan": {"axis": "delta", "step": 3}}, "scan"),
        ({"extras": {}}, "top level"),
        ({"series": [{"label": "a", "colour": "red"}]}, "series[0]"),
        ({"oracle": {"backend": "numba"}}, "oracle"),
    ],
)
def test_unknown_keys_rejected(doc, where):
    with pytest.raises(ConfigError, match=re.escape(where)):
        parse_config(doc)


@pytest.mark.parametrize(
    "doc",
    [
        {"gate": {"walsh_index": 1.5}},
        {"gate": {"omega_hz": "fast"}},
        {"scan": {"axis": "omega"}},
        {"scan": {"engine": "gpu"}},
        {"scan": {"values": []}},
        {"trajectory": {"n_samples": 1}},
        {"series": {"label": "x"}},
        {"series": [{"nbar": "hot"}]},
    ],
)
def test_bad_values_rejected(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "gate": {\n    "omega_hz": 10,\n  }\n}\n')
    with pytest.raises(ConfigError, match=r"broken\.json:4:"):
        load_config(p)


def test_round_trip():
    for path in sorted(CONFIGS.glob("*.json")):
        cfg = load_config(path)
        again = parse_config(json.loads(cfg.canonical_json()))
        assert again == cfg
        assert again.canonical_json() == cfg.canonical_json()


def test_grid_units():
    base = {"gate": {"gate_time": 1e-3, "walsh_index": 3}}
    hz = parse_config({**base, "scan": {"values": [100.0, 200.0]}})
    assert np.allclose(hz.scan_specs()[0].grid, [TWO_PI * 100, TWO_PI * 200])
    norm = parse_config({**base, "scan": {"units": "normalized", "values": [4.0]}})
    assert norm.scan_specs()[0].grid[0] == pytest.approx(TWO_PI * 4.0 / 1e-3)
    off = parse_config({**base, "scan": {"units": "offset", "values": [0.0]}})
    assert off.scan_specs()[0].grid[0] == pytest.approx(TWO_PI * 4.0 / 1e-3)
    logs = parse_config({**base, "scan": {"axis": "nbar", "start": 0.1, "stop": 10.0, "num": 3, "spacing": "log"}})
    assert np.allclose(logs.scan_specs()[0].grid, [0.1, 1.0, 10.0])
    with pytest.raises(ConfigError):
        parse_config({**base, "scan": {"axis": "nbar", "units": "offset", "values": [1.0]}}).scan_specs()
    with pytest.raises(ConfigError):
        parse_config({**base, "scan": {"start": 1.0}}).scan_specs()


# ---------------------------------------------------------------- scan


def test_scan_matches_run_scan(tmp_path):
    out = tmp_path / "a.csv"
    assert cli.main(["scan", "--config", str(CONFIGS / "fig2a.json"), "--csv", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["axis", "axis_value", "analytic", "oracle", "status"]
    spec = load_config(CONFIGS / "fig2a.json").scan_specs()[0]
    direct = scan.run_scan(spec).rows
    assert len(rows) == len(direct) + 1
    for line, row in zip(rows[1:], direct):
        assert line[0] == "delta:W(0)"
        assert float(line[2]) == row.analytic
        assert line[3] == "" and line[4] == "ok"
        assert NUMBER.match(line[1]) and NUMBER.match(line[2])
    assert float(rows[1 + 200][1]) == pytest.approx(1.0)


def test_scan_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert cli.main(["scan", "--config", str(CONFIGS / "fig3d.json"), "--csv", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_fig3d_svg_has_five_series(tmp_path):
    out_csv, out_svg = tmp_path / "d.csv", tmp_path / "d.svg"
    rc = cli.main(["scan", "--config", str(CONFIGS / "fig3d.json"), "--svg", str(out_svg), "--csv", str(out_csv)])
    assert rc == 0
    doc = xml.dom.minidom.parse(str(out_svg))
    assert len(doc.getElementsByTagName("polyline")) == 5
    labels = [t.firstChild.data for t in doc.getElementsByTagName("text")]
    for k in (0, 1, 3, 7, 15):
        assert f"W({k})" in labels
    names = {r[0] for r in read_csv(out_csv)[1:]}
    assert names == {f"delta:W({k})" for k in (0, 1, 3, 7, 15)}


def test_engine_flag_and_both(tmp_path):
    doc = {"gate": {"omega_hz": 4000.0, "gate_time": 1e-4, "walsh_index": 1},
           "scan": {"units": "normalized", "values": [0.5, 1.7, 2.0]}}
    out = tmp_path / "both.csv"
    assert cli.main(["scan", "--config", str(write_json(tmp_path, doc)), "--csv", str(out), "--engine", "both"]) == 0
    for line in read_csv(out)[1:]:
        assert abs(float(line[2]) - float(line[3])) <= 1e-7


def test_missing_config_exit_2(tmp_path, capsys):
    assert cli.main(["scan", "--config", str(tmp_path / "nope.json"), "--csv", str(tmp_path / "x.csv")]) == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "nope.json" in err


def test_unknown_key_exit_2(tmp_path, capsys):
    p = write_json(tmp_path, {"gate": {"omega_hz": 1.0, "detuning": 2.0}})
    assert cli.main(["scan", "--config", str(p), "--csv", str(tmp_path / "x.csv")]) == 2
    assert "gate: unknown key(s) detuning" in capsys.readouterr().err


def test_bad_flag_exit_2(capsys):
    assert cli.main(["scan", "--config", "x.json", "--engine", "gpu"]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_all_points_failed_exit_3(tmp_path, capsys):
    # the two-ion fidelity is undefined at zero detuning, on every point here
    doc = {"gate": {"ion_count": 2, "delta_hz": 0.0},
           "scan": {"axis": "nbar", "values": [0.0, 1.0], "observable": "bell_fidelity"}}
    out = tmp_path / "x.csv"
    assert cli.main(["scan", "--config", str(write_json(tmp_path, doc)), "--csv", str(out)]) == 3
    assert all(r[4].startswith("error:") for r in read_csv(out)[1:])


def test_partial_failure_still_ok(tmp_path):
    doc = {"gate": {"ion_count": 2, "omega_hz": 1470.0, "gate_time": 1e-3},
           "scan": {"values": [-100.0, 0.0, 100.0], "observable": "bell_fidelity"}}
    out = tmp_path / "x.csv"
    assert cli.main(["scan", "--config", str(write_json(tmp_path, doc)), "--csv", str(out)]) == 0
    assert [r[4] == "ok" for r in read_csv(out)[1:]] == [True, False, True]


def test_echo_config(tmp_path, capsys):
    cfg = CONFIGS / "fig2b.json"
    assert cli.main(["scan", "--config", str(cfg), "--csv", str(tmp_path / "b.csv"), "--echo-config"]) == 0
    echoed = json.loads(capsys.readouterr().out)
    assert parse_config(echoed) == load_config(cfg)


# ---------------------------------------------------------------- trajectory


def test_trajectory_fig1a(tmp_path):
    out, svg_out = tmp_path / "t.csv", tmp_path / "t.svg"
    args = ["trajectory", "--config", str(CONFIGS / "fig1a_trajectory.json"), "--csv", str(out), "--svg", str(svg_out)]
    assert cli.main(args) == 0
    rows = read_csv(out)
    assert rows[0] == ["t", "re_alpha_up", "im_alpha_up", "re_alpha_down", "im_alpha_down"]
    data = np.array(rows[1:], dtype=float)
    up = data[:, 1] + 1j * data[:, 2]
    assert np.array_equal(data[:, 3] + 1j * data[:, 4], -up)
    p = load_config(CONFIGS / "fig1a_trajectory.json").gate_params()
    assert p.walsh_index == 1
    assert abs(up[-1] - gm.alpha_k(p)) <= 1e-10 * abs(gm.alpha_k(p))
    mid = len(up) // 2
    assert data[mid, 0] == pytest.approx(p.gate_time / 2)
    assert abs(up[-1]) < abs(up[mid])
    assert len(xml.dom.minidom.parse(str(svg_out)).getElementsByTagName("polyline")) == 2


def test_trajectory_closed_circle(tmp_path):
    doc = {"gate": {"omega_hz": 1000.0, "delta_hz": 1e4, "gate_time": 1e-4}}
    out = tmp_path / "t.csv"
    assert cli.main(["trajectory", "--config", str(write_json(tmp_path, doc)), "--csv", str(out)]) == 0
    last = np.array(read_csv(out)[-1], dtype=float)
    assert np.all(np.abs(last[1:]) < 1e-15)


# ---------------------------------------------------------------- verify, plan, slope


def test_verify_order_1(capsys):
    assert cli.main(["verify", "--order", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and out[-1] == "3/3 checks passed"
    assert all(line.endswith("PASS") for line in out[:3])


def test_verify_order_6(capsys):
    assert cli.main(["verify", "--order", "6"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "28/28 checks passed"


def test_verify_table_matches_library():
    from walshms.walsh import verify_identity

    seen = set()
    for name, residual, ok in cli.verify_table(6):
        assert ok and residual <= cli.VERIFY_TOL
        if name.startswith("identity"):
            n, l = (int(v) for v in re.findall(r"\d+", name))
            assert residual == verify_identity(n, l)
            seen.add((n, l))
    assert seen == {(n, l) for n in range(1, 7) for l in range(n + 1)}


# frozen from the first run; rounding-level values, compared to 1e-15 absolute
VERIFY_PINNED = {
    'identity n=1 l=0': 0.0,
    'identity n=1 l=1': 1.9949319973733282e-17,
    'identity n=2 l=0': 4.622231866529366e-33,
    'identity n=2 l=1': 5.204170427930421e-18,
    'identity n=2 l=2': 7.855042869053095e-18,
    'identity n=3 l=0': 5.3926038442842604e-33,
    'identity n=3 l=1': 3.036250063206881e-18,
    'identity n=3 l=2': 1.3552527156068805e-20,
    'identity n=3 l=3': 3.0975752837642095e-18,
    'identity n=4 l=0': 1.4135798584282297e-16,
    'identity n=4 l=1': 1.502004151885011e-16,
    'identity n=4 l=2': 1.5082068403593353e-16,
    'identity n=4 l=3': 1.4631886824422934e-16,
    'identity n=4 l=4': 1.3884630213387982e-16,
    'identity n=5 l=0': 7.067899292141152e-17,
    'identity n=5 l=1': 3.7543898138433435e-17,
    'identity n=5 l=2': 1.0230854802512728e-17,
    'identity n=5 l=3': 1.1086941860589597e-17,
    'identity n=5 l=4': 2.594168965216348e-17,
    'identity n=5 l=5': 3.6796378207531663e-17,
    'identity n=6 l=0': 1.7669748230352874e-16,
    'identity n=6 l=1': 1.728345869656865e-16,
    'identity n=6 l=2': 1.6690210711805759e-16,
    'identity n=6 l=3': 1.5664667398777914e-16,
    'identity n=6 l=4': 1.4293641189684478e-16,
    'identity n=6 l=5': 1.2745372479331097e-16,
    'identity n=6 l=6': 1.113925002090974e-16,
    'orthonormality j,k<=31': 0.0,
}


def test_verify_residuals_pinned():
    table = {name: residual for name, residual, _ in cli.verify_table(6)}
    assert list(table) == list(VERIFY_PINNED)
    for name, value in VERIFY_PINNED.items():
        assert table[name] == pytest.approx(value, rel=0, abs=1e-15), name


def test_verify_bad_order():
    assert cli.main(["verify", "--order", "0"]) == 2


def test_plan(capsys):
    assert cli.main(["plan", "--order", "2", "--omega-hz", "1470"]) == 0
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    tg, delta = gm.plan_gate(2, TWO_PI * 1470.0)
    assert float(out["gate_time_s"]) == tg
    assert float(out["delta_hz"]) == pytest.approx(delta / TWO_PI, rel=1e-15)
    assert float(out["entangling_phase"]) == pytest.approx(math.pi / 2, abs=1e-9)
    assert cli.main(["plan"]) == 2


def test_slope(capsys):
    assert cli.main(["slope", "--order", "3"]) == 0
    line = capsys.readouterr().out.strip()
    assert abs(float(re.search(r"slope=(\S+)", line).group(1)) - 8) <= 0.2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "walshms", "verify", "--order", "2"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "6/6 checks passed" in res.stdout


# ---------------------------------------------------------------- formatting and svg


def test_number_format_is_locale_free():
    assert cli.fmt(0.1) == "1.0000000000000001e-01"
    assert float(cli.fmt(math.pi)) == math.pi
    assert cli.fmt(None) == ""


def test_svg_handles_gaps_and_flat_series():
    from walshms import svg

    text = svg.line_plot([("a", [0, 1, 2, 3], [1.0, float("nan"), 2.0, 2.5]), ("flat", [0, 1], [1.0, 1.0])])
    doc = xml.dom.minidom.parseString(text)
    assert len(doc.getElementsByTagName("polyline")) == 3
    assert svg.nice_ticks(0.0, 1.0) == [0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]
