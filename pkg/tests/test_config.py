"""Experiment config: schema, dotted-key errors, canonical TOML and overrides."""
from __future__ import annotations

import math
from pathlib import Path

import pytest

from src.config import KINDS, ExperimentConfig, load_config, parse_config
from src.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _key_of(text: str) -> str:
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.key


def test_defaults_fill_every_section():
    cfg = parse_config('[experiment]\nkind = "poincare"\n')
    assert cfg.kind == "poincare"
    assert cfg.name == "experiment"
    assert cfg.get("section.n_crossings") == 400
    assert cfg.get("section.separatrix_momenta") == (-0.05, -0.02, 0.02, 0.05)
    assert cfg.get("curve.eta0") == pytest.approx(math.pi / 4)
    assert cfg.section("grid") == {"n_s": 32, "n_psi": 32}


def test_kind_aliases():
    assert parse_config('[experiment]\nkind = "certify-s-independence"\n').kind == "certify"
    assert parse_config('[experiment]\nkind = "tube_metric"\n').kind == "tube-metric"


@pytest.mark.parametrize("text, key", [
    ("[experiment]\n", "experiment.kind"),
    ('[experiment]\nkind = "warp"\n', "experiment.kind"),
    ('[experiment]\nkind = "mesh"\n[mesh]\nx = 1\n', "mesh"),
    ('[experiment]\nkind = "mesh"\n[grid]\nn_z = 1\n', "grid.n_z"),
    ('[experiment]\nkind = "mesh"\n[grid]\nn_s = 4\n', "grid.n_s"),
    ('[experiment]\nkind = "mesh"\n[grid]\nn_s = 16.5\n', "grid.n_s"),
    ('[experiment]\nkind = "poincare"\n[section]\nseed_grid = "custom"\n', "section.seeds"),
    ('[experiment]\nkind = "poincare"\n[section]\nseeds = [[0.0, 0.1, 2.0]]\n', "section.seeds[0]"),
    ('[experiment]\nkind = "poincare"\n[section]\ndirection = 0\n', "section.direction"),
    ('[experiment]\nkind = "geodesic"\n[flow]\nmetric = "guess"\n', "flow.metric"),
    ('[experiment]\nkind = "geodesic"\n[manifold]\nkind = "user"\n', "manifold.components"),
    ('[experiment]\nkind = "frenet"\n[curve]\nkind = "expression"\nposition = ["t"]\n', "curve.position"),
    ('[experiment]\nkind = "frenet"\n[profile]\nrho0 = -1.0\n', "profile.rho0"),
    ('[experiment]\nkind = "mesh"\n[output]\nproject = "mercator"\n', "output.project"),
    ("[experiment\n", "<string>"),
])
def test_errors_name_the_dotted_key(text, key):
    assert _key_of(text) == key


def test_canonical_toml_round_trip():
    cfg = parse_config(
        '[experiment]\nkind = "poincare"\nname = "round trip"\n'
        '[manifold]\nconstants = { c = 2.0, a0 = 1.5 }\n'
        '[section]\nseed_grid = "custom"\nseeds = [[0.1, 0.2], [3.0, -0.4]]\n'
    )
    text = cfg.to_toml()
    again = parse_config(text)
    assert again == cfg
    assert again.to_toml() == text
    assert again.digest == cfg.digest
    assert again.get("section.seeds") == ((0.1, 0.2), (3.0, -0.4))
    assert dict(again.get("manifold.constants")) == {"a0": 1.5, "c": 2.0}


def test_digest_changes_with_content():
    a = parse_config('[experiment]\nkind = "mesh"\n')
    b = parse_config('[experiment]\nkind = "mesh"\n[grid]\nn_s = 64\n')
    assert a.digest != b.digest
    assert len(a.digest) == 12


def test_overrides_are_validated():
    cfg = parse_config('[experiment]\nkind = "poincare"\n')
    over = cfg.with_overrides({"section.seed_grid": "both", "grid.n_s": 48, "section.tol": 1e-9})
    assert over.get("section.seed_grid") == "both"
    assert over.get("grid.n_s") == 48
    assert cfg.get("section.seed_grid") == "default"
    with pytest.raises(ConfigError) as info:
        cfg.with_overrides({"section.seed_grid": "nearby"})
    assert info.value.key == "section.seed_grid"
    with pytest.raises(ConfigError):
        cfg.with_overrides({"grid": 3})


def test_config_is_immutable():
    cfg = parse_config('[experiment]\nkind = "mesh"\n')
    with pytest.raises(TypeError):
        cfg.sections["grid"]["n_s"] = 3
    assert isinstance(hash(cfg), int)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_are_valid(path):
    cfg = load_config(path)
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.kind in KINDS
