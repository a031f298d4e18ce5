from __future__ import annotations

import csv
import json
import shutil
import subprocess
import sys

import pytest

from leotopo.cli import main
from leotopo.io import load_snapshot
from leotopo.topology import Topology


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def manifests(root):
    return sorted(p.relative_to(root) for p in root.rglob("manifest.json"))


@pytest.fixture(scope="module")
def toy_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy")
    assert main(["gen-shell", "--planes", "12", "--per-plane", "12", "--out", str(d / "toy.csv")]) == 0
    return d / "toy.csv"


def test_gen_shell_sizes(tmp_path):
    assert main(["gen-shell", "--planes", "72", "--per-plane", "22", "--out", str(tmp_path / "s1.csv")]) == 0
    s1 = load_snapshot(tmp_path / "s1.csv")
    assert len(s1) == 1584 and s1.config.altitude_km == 550.0
    text = (tmp_path / "s1.csv").read_text().splitlines()
    assert sum(1 for ln in text if ln and not ln.startswith("#")) == 1585
    assert main(["gen-shell", "--planes", "34", "--per-plane", "34", "--altitude-km", "630",
                 "--inclination-deg", "51.9", "--out", str(tmp_path / "k" / "kuiper.csv")]) == 0
    assert len(load_snapshot(tmp_path / "k" / "kuiper.csv")) == 1156
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["subcommand"] == "gen-shell" and m["command"][:2] == ["leotopo", "gen-shell"]
    assert "config_hash" in m and "numpy" in m["versions"]


def test_build_and_evaluate(toy_file, tmp_path):
    out = tmp_path / "grid.csv"
    assert main(["build", "--method", "plus-grid", "--snapshot", str(toy_file), "--out", str(out)]) == 0
    t = Topology.from_csv(out)
    assert t.num_edges == 288
    assert main(["evaluate", "--topology", str(out), "--snapshot", str(toy_file),
                 "--out-dir", str(tmp_path / "ev")]) == 0
    m = rows(tmp_path / "ev" / "metrics.csv")[0]
    assert m["method"] == "PlusGrid" and float(m["stretch"]) > 1.0
    hops = rows(tmp_path / "ev" / "hop_hist.csv")
    assert sum(int(r["pairs"]) for r in hops) == 144 * 143
    assert (tmp_path / "ev" / "delay_hist.csv").exists()


def test_build_floor_and_sa_run_log(toy_file, tmp_path):
    assert main(["build", "--method", "floor", "--snapshot", str(toy_file), "--out", str(tmp_path / "f.csv")]) == 0
    assert main(["build", "--method", "sa", "--preset", "low-hop", "--iters", "2000", "--snapshot", str(toy_file),
                 "--run-log", str(tmp_path / "log.csv"), "--log-stride", "500", "--out", str(tmp_path / "sa.csv")]) == 0
    assert len(rows(tmp_path / "log.csv")) == 4
    assert manifests(tmp_path) == [tmp_path.joinpath("manifest.json").relative_to(tmp_path)]


def test_throughput_outputs(toy_file, tmp_path):
    main(["build", "--method", "lsl", "--lsl-d", "3", "--snapshot", str(toy_file), "--out", str(tmp_path / "l.csv")])
    assert main(["throughput", "--topology", str(tmp_path / "l.csv"), "--snapshot", str(toy_file),
                 "--pairs", "10,20", "--trials", "2", "--out-dir", str(tmp_path / "tp")]) == 0
    tp = rows(tmp_path / "tp" / "throughput.csv")
    assert [(r["pairs"], r["trial"]) for r in tp] == [("10", "0"), ("10", "1"), ("20", "0"), ("20", "1")]
    fpl = rows(tmp_path / "tp" / "flows_per_link.csv")
    assert sum(int(r["flows"]) for r in fpl) > 0


def test_simulate_shrinkage(toy_file, tmp_path):
    series = tmp_path / "series"
    assert main(["gen-series", "--snapshot", str(toy_file), "--mode", "shrinkage", "--start-fraction", "1.0",
                 "--end-fraction", "0.8", "--out-dir", str(series)]) == 0
    assert len(list(series.glob("*.csv"))) == 21
    out = tmp_path / "sim"
    assert main(["simulate", "--method", "lsl", "--lsl-d", "3", "--series-dir", str(series),
                 "--incremental", "--out-dir", str(out)]) == 0
    br = rows(out / "breakage.csv")
    assert len(br) == 20 and list(br[0]) == ["date", "method", "isl_limit", "selected", "broken", "rate_pct"]
    assert br[0]["date"] == "2024-10-02"
    assert len(rows(out / "metrics.csv")) == 21
    assert len(list((out / "topologies").glob("*.csv"))) == 21
    assert manifests(out) == [out.joinpath("manifest.json").relative_to(out)]


def test_weights_are_read_in_table_order(toy_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["build", "--method", "sa", "--weights", "1,2,5", "--iters", "3000", "--snapshot", str(toy_file), "--out", str(a)])
    main(["build", "--method", "sa", "--preset", "low-hop", "--iters", "3000", "--snapshot", str(toy_file), "--out", str(b)])
    assert Topology.from_csv(a).edge_keys() == Topology.from_csv(b).edge_keys()


@pytest.mark.parametrize("argv, code", [
    (["build", "--method", "lsl", "--snapshot", "missing.csv", "--out", "x.csv"], 4),
    (["build", "--method", "lsl", "--lsl-d", "40", "--snapshot", "{toy}", "--out", "{tmp}/x.csv"], 2),
    (["build", "--method", "sa", "--weights", "1,2", "--snapshot", "{toy}", "--out", "{tmp}/x.csv"], 2),
    (["throughput", "--topology", "{tmp}/none.csv", "--snapshot", "{toy}", "--out-dir", "{tmp}"], 4),
    (["simulate", "--method", "plus-grid", "--series-dir", "{tmp}/empty", "--out-dir", "{tmp}/o"], 4),
])
def test_exit_codes(toy_file, tmp_path, argv, code):
    argv = [a.format(toy=toy_file, tmp=tmp_path) for a in argv]
    assert main(argv) == code


def test_partial_shell_is_infeasible_for_three_isl(toy_file, tmp_path):
    text = toy_file.read_text().splitlines()
    # drop one satellite row, leaving plane 0 with an odd count
    idx = next(k for k, ln in enumerate(text) if ln.startswith("0,"))
    (tmp_path / "p.csv").write_text("\n".join(text[:idx] + text[idx + 1:]) + "\n")
    assert main(["build", "--method", "three-isl-grid", "--snapshot", str(tmp_path / "p.csv"),
                 "--out", str(tmp_path / "x.csv")]) == 3


def test_malformed_snapshot_is_validation_error(tmp_path):
    (tmp_path / "bad.csv").write_text("# altitude_km=550\nsat_id,plane_id,raan_deg,anomaly_deg\n")
    assert main(["build", "--method", "plus-grid", "--snapshot", str(tmp_path / "bad.csv"),
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["build", "--method", "bogus"])
    assert info.value.code == 2


def test_console_script(tmp_path):
    exe = shutil.which("leotopo")
    cmd = [exe] if exe else [sys.executable, "-m", "leotopo.cli"]
    r = subprocess.run(cmd + ["gen-shell", "--planes", "4", "--per-plane", "4", "--out", str(tmp_path / "s.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "16 satellites" in r.stdout


@pytest.mark.slow
def test_shell1_plus_grid_hops(tmp_path):
    snap = tmp_path / "s1.csv"
    main(["gen-shell", "--planes", "72", "--per-plane", "22", "--out", str(snap)])
    main(["build", "--method", "plus-grid", "--snapshot", str(snap), "--out", str(tmp_path / "g.csv")])
    assert main(["evaluate", "--topology", str(tmp_path / "g.csv"), "--snapshot", str(snap), "--no-floor",
                 "--out-dir", str(tmp_path / "ev")]) == 0
    m = rows(tmp_path / "ev" / "metrics.csv")[0]
    assert float(m["avg_hops"]) == pytest.approx(23.5, abs=0.1)
    assert m["stretch"] == "nan"
