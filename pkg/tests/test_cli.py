import json
import subprocess
import sys

import numpy as np
import pytest

from imfield import PotentialGrid, farfield_oracle, field_from_dict, potential_to_dict
from imfield.cli import Scenario, ScenarioError, load_scenario, run_scenario

KAPPA = 5.0

PS_FIELD = {"terms": [{"type": "point_source", "y0": [0.3, 0.2], "c": [1.0, 0.0]}]}
MIX_FIELD = {"terms": [{"type": "multipole", "m": 0, "c": [1.0, 0.0]},
                       {"type": "multipole", "m": 1, "c": [0.0, 0.5]}]}
LINE = {"point": [0.0, -2.0], "direction": [1.0, 0.0]}
TARGETS = [[0.5, -4.0], [3.0, -6.0], [-5.0, -8.0], [10.0, -4.0], [0.0, -12.0]]


def write_scenario(tmp_path, entries, name="case"):
    data = {"name": name, "kappa": KAPPA}
    data.update(entries)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data))
    return path


def gaussian_potential_dict(n=12, kappa=4.0, amp=4.0):
    idx = (np.arange(n) - (n - 1) / 2.0) / n
    gx, gy = np.meshgrid(idx, idx, indexing="ij")
    v = amp * np.exp(-(gx**2 + gy**2) / 0.18**2)
    grid = PotentialGrid(bbox=(-0.5, -0.5, 0.5, 0.5), n=n,
                         v=v.astype(complex), kappa=kappa)
    return potential_to_dict(grid)


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


def read_csv(out_dir):
    lines = (out_dir / "results.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    return header, rows


# ------------------------------------------------------------- scenarios


def test_load_scenario_types(tmp_path):
    path = write_scenario(tmp_path, {
        "field": MIX_FIELD, "line": LINE, "interval": [-3.0, 3.0],
        "order": 2, "tau": 0.2, "noise": {"sigma": 1e-5, "seed": 11},
        "targets": TARGETS[:2], "out": "arts"})
    sc = load_scenario(path)
    assert isinstance(sc, Scenario)
    assert sc.kappa == KAPPA and sc.order == 2 and sc.tau == 0.2
    assert sc.noise_sigma == 1e-5 and sc.noise_seed == 11
    assert sc.interval == (-3.0, 3.0) and sc.out == "arts"
    assert sc.targets.shape == (2, 2)
    assert sc.field.kappa == KAPPA and sc.potential is None
    # direction is normalized on load
    tilted = write_scenario(tmp_path, {
        "field": MIX_FIELD,
        "line": {"point": [0.0, -2.0], "direction": [2.0, 0.0]}}, name="tilt")
    assert load_scenario(tilted).line.theta == (1.0, 0.0)


def test_load_scenario_rejects_defects(tmp_path):
    cases = [
        ({"field": MIX_FIELD, "potential": gaussian_potential_dict(),
          "line": LINE}, "at most one"),
        ({"fielld": MIX_FIELD}, "unknown scenario fields"),
        ({"field": MIX_FIELD, "interval": [2.0, -2.0]}, "lo < hi"),
        ({"field": MIX_FIELD,
          "line": {"point": [0.0, -2.0], "direction": [0.0, 0.0]}}, "nonzero"),
        ({"field": MIX_FIELD, "line": {"point": [0.0, -2.0]}}, "direction"),
        ({"field": {"terms": [{"type": "point_source", "y0": [0.3, 0.2],
                               "c": [1.0, 0.0]}], "kappa": 3.0},
          "line": LINE}, "disagrees"),
        ({"field": MIX_FIELD, "order": -1}, "order"),
        ({"field": MIX_FIELD, "noise": {"sigma": -1.0}}, "sigma"),
        ({"field": MIX_FIELD, "targets": [[1.0]]}, "targets"),
        # line through the source disk
        ({"field": MIX_FIELD,
          "line": {"point": [0.0, 0.0], "direction": [1.0, 0.0]}},
         "source disk"),
        # line touching the potential support
        ({"kappa": 4.0, "potential": gaussian_potential_dict(),
          "line": {"point": [0.0, -0.55], "direction": [1.0, 0.0]}},
         "one side"),
    ]
    for i, (entries, needle) in enumerate(cases):
        path = write_scenario(tmp_path, entries, name=f"bad{i}")
        with pytest.raises(ScenarioError, match=needle):
            load_scenario(path)


def test_missing_name_and_kappa(tmp_path):
    p = tmp_path / "anon.json"
    p.write_text(json.dumps({"kappa": 2.0}))
    with pytest.raises(ScenarioError, match="name"):
        load_scenario(p)
    p.write_text(json.dumps({"name": "x"}))
    with pytest.raises(ScenarioError, match="kappa"):
        load_scenario(p)


# --------------------------------------------------------------- commands


def test_counterexample_report_values(tmp_path):
    path = write_scenario(tmp_path, {"kappa": 1.0}, name="ce")
    out = tmp_path / "out"
    assert run_scenario(path, "counterexample", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    assert rep["status"] == "ok"
    assert rep["scenario"] == "ce" and rep["command"] == "counterexample"
    assert rep["metrics"]["radius"] == 2.404825557695773
    assert rep["metrics"]["max_abs_im"] <= 1e-11
    assert rep["metrics"]["max_abs_psi"] >= 0.05
    header, rows = read_csv(out)
    assert header == ["angle", "x", "y", "im_psi", "abs_psi"]
    assert len(rows) == 720


def test_counterexample_higher_root(tmp_path):
    path = write_scenario(tmp_path, {"kappa": 2.5, "order": 3}, name="ce3")
    out = tmp_path / "out"
    assert run_scenario(path, "counterexample", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    # third positive root of J_0, scaled by 1/kappa
    assert rep["metrics"]["radius"] == pytest.approx(8.653727912911013 / 2.5,
                                                     rel=1e-12)
    assert rep["metrics"]["max_abs_im"] <= 1e-11


def test_synth_exact_values(tmp_path):
    path = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE,
        "interval": [-5.0, 5.0]}, name="synth")
    out = tmp_path / "out"
    assert run_scenario(path, "synth", out_dir=out, quiet=True) == 0
    header, rows = read_csv(out)
    assert header == ["s", "x", "y", "value"]
    rep = read_report(out)
    assert rep["metrics"]["n_samples"] == len(rows)
    field = field_from_dict(dict(MIX_FIELD, kappa=2.0))
    from imfield import eval_field
    for s, x, y, value in rows[::7]:
        psi = eval_field(field, np.array([x, y]))
        assert abs(value - np.hypot(x, y) ** 0.5 * psi.imag) <= 1e-12
    # lattice spans the interval at >= 12 samples per wavelength
    assert rows[0][0] == -5.0 and rows[-1][0] == 5.0
    assert len(rows) - 1 >= 10.0 / (2 * np.pi / 2.0 / 12.0)


def test_extract_slope_and_coefficients(tmp_path):
    path = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE, "order": 2},
        name="ex")
    out = tmp_path / "out"
    assert run_scenario(path, "extract", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    assert -1.2 <= rep["metrics"]["f0_slope"] <= -0.8
    coeffs = json.loads((out / "coefficients.json").read_text())
    assert len(coeffs["f_plus"]) == 3 and len(coeffs["f_minus"]) == 3
    assert coeffs["q"] == [0.0, -2.0]
    # line point sits on the x axis ray, so the frame shift leaves f_0 alone
    field = field_from_dict(dict(MIX_FIELD, kappa=2.0))
    oracle = farfield_oracle(field, 0.0, 0)[0]
    got = complex(*coeffs["f_plus"][0])
    assert abs(got - oracle) <= 1e-6 * abs(oracle)
    header, rows = read_csv(out)
    assert header == ["r", "re_f0_raw", "im_f0_raw", "abs_dev"]
    assert len(rows) >= 8


def test_extract_explicit_radii(tmp_path):
    lam = 2 * np.pi / 2.0
    radii = [float(200 * lam * 2**k) for k in range(6)]
    path = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE, "order": 1,
        "radii": radii}, name="exr")
    out = tmp_path / "out"
    assert run_scenario(path, "extract", out_dir=out, quiet=True) == 0
    header, rows = read_csv(out)
    assert [r[0] for r in rows] == radii


def test_karp_command(tmp_path):
    path = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE, "order": 3},
        name="kp")
    out = tmp_path / "out"
    assert run_scenario(path, "karp", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    assert rep["metrics"]["karp_order"] == 3
    assert rep["metrics"]["trusted_radius"] > 0
    assert rep["metrics"]["tail_max_rel_err"] <= 1e-2
    coeffs = json.loads((out / "coefficients.json").read_text())
    assert len(coeffs["F"]) == 4 and len(coeffs["G"]) == 4
    header, rows = read_csv(out)
    assert header == ["s", "re_karp", "im_karp", "re_ref", "im_ref", "abs_err"]
    s_col = [r[0] for r in rows]
    assert s_col == sorted(s_col) and s_col[0] < 0 < s_col[-1]


def test_propagate_exact_trace(tmp_path):
    path = write_scenario(tmp_path, {
        "field": PS_FIELD, "line": LINE, "targets": TARGETS}, name="pr")
    out = tmp_path / "out"
    assert run_scenario(path, "propagate", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    assert rep["metrics"]["max_rel_err"] <= 1e-3
    header, rows = read_csv(out)
    assert header == ["x", "y", "re_psi", "im_psi", "re_ref", "im_ref",
                      "abs_err"]
    assert len(rows) == len(TARGETS)
    for row in rows:
        assert row[6] == pytest.approx(
            abs(complex(row[2], row[3]) - complex(row[4], row[5])), abs=1e-15)


def test_pipeline_point_source_demo(tmp_path):
    path = write_scenario(tmp_path, {
        "field": PS_FIELD, "line": LINE, "order": 3, "targets": TARGETS},
        name="pipe")
    out = tmp_path / "out"
    assert run_scenario(path, "pipeline", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    assert rep["status"] == "ok"
    assert rep["metrics"]["max_rel_err"] <= 1e-2
    header, rows = read_csv(out)
    assert len(rows) == len(TARGETS)
    assert not (out / "coefficients.json").exists()


def test_scatter_command(tmp_path):
    path = write_scenario(tmp_path, {
        "kappa": 4.0, "potential": gaussian_potential_dict()}, name="sc")
    out = tmp_path / "out"
    assert run_scenario(path, "scatter", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    assert rep["metrics"]["reciprocity_defect"] <= 1e-6
    assert rep["metrics"]["max_abs_amplitude"] > 0
    header, rows = read_csv(out)
    assert header == ["theta", "dir_x", "dir_y", "re_a", "im_a", "abs_a"]
    assert len(rows) == 72


def test_scatter_probe_validation(tmp_path):
    inside = write_scenario(tmp_path, {
        "kappa": 4.0, "potential": gaussian_potential_dict(),
        "targets": [[0.0, 0.0], [2.0, 2.0]]}, name="sin")
    out = tmp_path / "o1"
    assert run_scenario(inside, "scatter", out_dir=out, quiet=True) == 2
    assert not out.exists()
    single = write_scenario(tmp_path, {
        "kappa": 4.0, "potential": gaussian_potential_dict(),
        "targets": [[2.0, 2.0]]}, name="sone")
    assert run_scenario(single, "scatter", out_dir=tmp_path / "o2",
                        quiet=True) == 2


def test_gkl_command(tmp_path):
    path = write_scenario(tmp_path, {
        "kappa": 4.0, "potential": gaussian_potential_dict(),
        "line": LINE, "interval": [-1.0, 1.0], "order": 3}, name="gk")
    out = tmp_path / "out"
    assert run_scenario(path, "gkl", out_dir=out, quiet=True) == 0
    rep = read_report(out)
    assert rep["metrics"]["max_rel_err"] <= 1e-2
    assert rep["metrics"]["defect_direct"] <= 1e-8
    header, rows = read_csv(out)
    assert header == ["s_x", "s_y", "re_recovered", "im_recovered",
                      "re_direct", "im_direct", "abs_err"]
    assert len(rows) == 5 * 4  # off-diagonal entries only
    for row in rows:
        assert row[6] == pytest.approx(
            abs(complex(row[2], row[3]) - complex(row[4], row[5])), abs=1e-15)


# ----------------------------------------------------------- error paths


def test_malformed_json_exit_2_no_artifacts(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    out = tmp_path / "out"
    assert run_scenario(bad, "extract", out_dir=out, quiet=True) == 2
    assert not out.exists()


def test_missing_required_field_exit_2(tmp_path):
    path = write_scenario(tmp_path, {"field": MIX_FIELD, "line": LINE},
                          name="noorder")
    out = tmp_path / "out"
    assert run_scenario(path, "extract", out_dir=out, quiet=True) == 2
    assert not out.exists()
    # potential commands reject field scenarios and vice versa
    assert run_scenario(path, "gkl", out_dir=out, quiet=True) == 2
    pot = write_scenario(tmp_path, {
        "kappa": 4.0, "potential": gaussian_potential_dict()}, name="potonly")
    assert run_scenario(pot, "pipeline", out_dir=out, quiet=True) == 2


def test_target_on_wrong_side_exit_2(tmp_path):
    path = write_scenario(tmp_path, {
        "field": PS_FIELD, "line": LINE,
        "targets": [[0.5, -4.0], [0.0, 0.5]]}, name="side")
    out = tmp_path / "out"
    assert run_scenario(path, "propagate", out_dir=out, quiet=True) == 2
    assert not out.exists()


def test_numerical_failure_exit_3_error_report(tmp_path):
    # sin(kappa tau) = 0 makes the two-point system singular at extraction
    path = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE, "order": 2,
        "tau": float(np.pi)}, name="res")
    out = tmp_path / "out"
    assert run_scenario(path, "extract", out_dir=out, quiet=True) == 3
    assert sorted(p.name for p in out.iterdir()) == ["report.json"]
    rep = read_report(out)
    assert rep["status"] == "error"
    assert rep["metrics"] == {}
    assert rep["error"].startswith("[extract]")


def test_unknown_command_exit_2(tmp_path):
    path = write_scenario(tmp_path, {"field": MIX_FIELD, "line": LINE})
    assert run_scenario(path, "plot", out_dir=tmp_path / "o", quiet=True) == 2


# ------------------------------------------------------- reproducibility


def test_rerun_byte_identical(tmp_path):
    path = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE, "order": 2,
        "noise": {"sigma": 1e-5, "seed": 9}}, name="det")
    outs = [tmp_path / "o1", tmp_path / "o2"]
    for out in outs:
        assert run_scenario(path, "extract", out_dir=out, quiet=True) == 0
    assert (outs[0] / "results.csv").read_bytes() == \
           (outs[1] / "results.csv").read_bytes()
    assert (outs[0] / "coefficients.json").read_bytes() == \
           (outs[1] / "coefficients.json").read_bytes()
    # a different seed must change the noisy samples
    other = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE, "order": 2,
        "noise": {"sigma": 1e-5, "seed": 10}}, name="det2")
    assert run_scenario(other, "extract", out_dir=tmp_path / "o3",
                        quiet=True) == 0
    assert (outs[0] / "results.csv").read_bytes() != \
           (tmp_path / "o3" / "results.csv").read_bytes()


def test_out_dir_from_scenario(tmp_path):
    path = write_scenario(tmp_path, {"kappa": 1.0, "out": "arts"}, name="ce")
    assert run_scenario(path, "counterexample", quiet=True) == 0
    assert (tmp_path / "arts" / "report.json").exists()
    assert (tmp_path / "arts" / "results.csv").exists()


def test_console_entry_and_order_override(tmp_path):
    path = write_scenario(tmp_path, {
        "kappa": 2.0, "field": MIX_FIELD, "line": LINE}, name="cli")
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "imfield.cli", "extract",
         "--scenario", str(path), "--out", str(out), "--order", "2",
         "--quiet"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == ""
    coeffs = json.loads((out / "coefficients.json").read_text())
    assert len(coeffs["f_plus"]) == 3
    # without the override the scenario is missing its order
    proc2 = subprocess.run(
        [sys.executable, "-m", "imfield.cli", "extract",
         "--scenario", str(path), "--out", str(out)],
        capture_output=True, text=True)
    assert proc2.returncode == 2
    assert "order" in proc2.stderr
