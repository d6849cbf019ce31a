"""End-to-end pipeline runs on small grids, with artifacts and logs under tmp_path."""
from __future__ import annotations

import json
import math

import pytest

from src.config import parse_config
from src.errors import ConfigError, TubeDegenerateError
from src.export import config_from_header, read_csv
from src.pipelines import run_experiment

HOPF = '[manifold]\nkind = "sphere3_hopf"\n[curve]\nkind = "hopf_curve"\nalpha = 5.0\nbeta = 2.0\n'


def _run(text: str, tmp_path, **kw):
    cfg = parse_config(text)
    return cfg, run_experiment(cfg, out_dir=tmp_path / "out", log_dir=tmp_path / "logs", workers=1, **kw)


def _stage(payload: dict, name: str) -> dict:
    return next(s for s in payload["stages"] if s["stage"] == name)


def test_frenet_on_hopf_knot(tmp_path):
    cfg, payload = _run('[experiment]\nkind = "frenet"\nname = "hf"\n' + HOPF + '[grid]\nn_s = 8\n', tmp_path)
    m = _stage(payload, "frenet")["metrics"]
    assert m["constant"]
    assert m["k1_oracle_error"] < 1e-8
    assert m["k2_oracle_error"] < 1e-8
    assert m["frenet_residual"] < 1e-6
    csv = tmp_path / "out" / "hf_frenet.csv"
    assert len(read_csv(csv)) == 8
    assert config_from_header(csv) == cfg
    summary = json.loads((tmp_path / "out" / "hf_summary.json").read_text())
    assert summary["meta"]["config_digest"] == cfg.digest
    assert summary["meta"]["ok"] is True


def test_tube_metric_matches_closed_form_on_the_sphere(tmp_path):
    _, payload = _run('[experiment]\nkind = "tube-metric"\nname = "tm"\n' + HOPF + '[grid]\nn_s = 8\nn_psi = 8\n', tmp_path)
    m = _stage(payload, "tube-metric")["metrics"]
    assert m["closed_form_max_error"] < 1e-8
    assert m["s_independent"]
    table = read_csv(tmp_path / "out" / "tm_metric.csv")
    assert {"E", "F", "G", "E_closed", "F_closed", "G_closed"} <= set(table.columns)


def test_geodesic_with_reversibility(tmp_path):
    _, payload = _run('[experiment]\nkind = "geodesic"\nname = "g"\n' + HOPF + '[flow]\nlength = 20.0\n', tmp_path)
    m = _stage(payload, "geodesic")["metrics"]
    assert m["energy_drift"] < 1e-9
    assert m["ps_drift"] < 1e-9
    assert m["geodesic_residual"] < 1e-5
    rev = _stage(payload, "geodesic.reversibility")["metrics"]
    assert max(rev.values()) < 1e-6


def test_closed_form_flow_needs_a_space_form(tmp_path):
    text = ('[experiment]\nkind = "geodesic"\n[manifold]\nkind = "ellipsoid3_degenerate"\na = 2.0\n'
            '[curve]\nkind = "ellipsoid_curve"\n')
    with pytest.raises(ConfigError) as info:
        _run(text, tmp_path)
    assert info.value.key == "flow.metric"


def test_catalog_curve_must_match_manifold(tmp_path):
    with pytest.raises(ConfigError) as info:
        _run('[experiment]\nkind = "frenet"\n[curve]\nkind = "hopf_curve"\n', tmp_path)
    assert info.value.key == "curve.kind"


def test_degenerate_tube_fails_and_is_logged(tmp_path):
    text = '[experiment]\nkind = "geodesic"\n[curve]\nkind = "circle"\nR = 2.0\n[profile]\nrho0 = 2.5\n'
    with pytest.raises(TubeDegenerateError):
        _run(text, tmp_path)
    status = json.loads((tmp_path / "logs" / "pipeline_status.json").read_text())
    assert status["stages"]["geodesic"]["success"] is False


def test_torus_poincare_run(tmp_path):
    text = ('[experiment]\nkind = "poincare"\nname = "ps"\n'
            '[section]\nn_crossings = 60\nseed_grid = "custom"\nseeds = [[0.0, 0.5], [0.0, -0.9]]\n')
    _, payload = _run(text, tmp_path)
    m = _stage(payload, "poincare")["metrics"]
    assert m["seeds"] == 2 and m["points"] == 120
    assert m["regular"] == 2 and m["irregular"] == 0
    assert m["max_p_s_drift"] < 1e-12
    out = tmp_path / "out"
    assert (out / "ps_section.svg").exists()
    reg = read_csv(out / "ps_regularity.csv")
    assert list(reg["classification"]) == ["regular", "regular"]


def test_short_orbits_are_unscored(tmp_path):
    text = ('[experiment]\nkind = "poincare"\nname = "few"\n'
            '[section]\nn_crossings = 5\nseed_grid = "custom"\nseeds = [[0.0, 0.5]]\n[output]\nsvg = false\n')
    _, payload = _run(text, tmp_path)
    m = _stage(payload, "poincare")["metrics"]
    assert m["max_residual"] is None
    reg = read_csv(tmp_path / "out" / "few_regularity.csv")
    assert reg["classification"].iloc[0] == "unscored"
    assert math.isnan(reg["residual"].iloc[0])
    assert not (tmp_path / "out" / "few_section.svg").exists()


def test_hopf_mesh_is_projected(tmp_path):
    text = ('[experiment]\nkind = "mesh"\nname = "hm"\n' + HOPF +
            '[profile]\nkind = "lobed"\n[grid]\nn_s = 16\nn_psi = 8\n')
    _, payload = _run(text, tmp_path)
    m = _stage(payload, "mesh")["metrics"]
    assert m["vertices"] == 128 and m["triangles"] == 256
    assert m["sphere_norm_error"] < 1e-12
    assert m["degenerate_faces"] == 0
    lines = (tmp_path / "out" / "hm_tube.obj").read_text().splitlines()
    assert sum(1 for ln in lines if ln.startswith("v ")) == 128


def test_s3_projection_needs_the_hopf_chart(tmp_path):
    with pytest.raises(ConfigError) as info:
        _run('[experiment]\nkind = "mesh"\n[grid]\nn_s = 8\nn_psi = 8\n[output]\nproject = "s3"\n', tmp_path)
    assert info.value.key == "output.project"


def test_certify_ellipsoid_knot(tmp_path):
    text = ('[experiment]\nkind = "certify"\nname = "c"\n[manifold]\nkind = "ellipsoid3_degenerate"\na = 2.0\n'
            '[curve]\nkind = "ellipsoid_curve"\n[certify]\nsamples = 3\nn_psi = 2\nn_rho = 2\n')
    _, payload = _run(text, tmp_path)
    m = _stage(payload, "certify")["metrics"]
    assert m["verdict"] is True
    assert m["active_coordinates"] == [0]
    assert len(read_csv(tmp_path / "out" / "c_certificate.csv")) == 3 * 2 * 2


def test_user_metric_geodesic(tmp_path):
    text = ('[experiment]\nkind = "geodesic"\nname = "u"\n'
            '[manifold]\nkind = "user"\nvariables = ["r", "th", "z"]\n'
            'components = [["1", "0", "0"], ["0", "r^2", "0"], ["0", "0", "1"]]\n'
            '[curve]\nkind = "expression"\nposition = ["2", "t", "0"]\nperiod = 6.283185307179586\n'
            '[profile]\nrho0 = 0.5\n[grid]\nn_s = 8\nn_psi = 16\n'
            '[flow]\nmetric = "numeric"\nlength = 10.0\nreverse_check = false\n')
    _, payload = _run(text, tmp_path)
    m = _stage(payload, "geodesic")["metrics"]
    assert m["s_independent"]
    assert m["energy_drift"] < 1e-8
    assert len(payload["stages"]) == 1


def test_progress_messages(tmp_path):
    seen: list[str] = []
    _run('[experiment]\nkind = "frenet"\n[grid]\nn_s = 8\n', tmp_path, progress=seen.append)
    assert seen and seen[0].startswith("Frenet frame of circle")
