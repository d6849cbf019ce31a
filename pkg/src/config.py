"""Experiment files: strict TOML schema -> immutable ExperimentConfig, plus its canonical TOML echo."""
from __future__ import annotations

import hashlib
import json
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Mapping

from .errors import ConfigError

KINDS = ("frenet", "tube-metric", "geodesic", "poincare", "mesh", "certify")
KIND_ALIASES = {"certify-s-independence": "certify", "tube_metric": "tube-metric"}
MANIFOLD_KINDS = (
    "euclidean3", "euclidean3_cylindrical", "sphere3_hopf", "hyperbolic3_halfspace",
    "ellipsoid3_degenerate", "user",
)
CURVE_KINDS = (
    "circle", "ellipse", "helix", "helix_cylindrical", "straight_line",
    "hopf_curve", "ellipsoid_curve", "wavy_ellipsoid_curve", "expression",
)
PROFILE_KINDS = ("circular", "fourier", "lobed")
SEED_GRIDS = ("default", "separatrix", "both", "custom")
PROJECTIONS = ("auto", "s3", "none")
METRIC_SOURCES = ("closed-form", "numeric")
CHRISTOFFEL_MODES = ("analytic", "finite-difference")

SECTION_ORDER = ("experiment", "manifold", "curve", "profile", "grid", "flow", "section", "certify", "output")
REQUIRED = object()


def _float(key: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    return float(v)


def _int(key: str, v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return int(v)


def _str(key: str, v: Any) -> str:
    if not isinstance(v, str):
        raise ConfigError(key, f"expected a string, got {v!r}")
    return v


def _bool(key: str, v: Any) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(key, f"expected true or false, got {v!r}")
    return v


def _floats(key: str, v: Any) -> tuple[float, ...]:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(key, f"expected a list of numbers, got {v!r}")
    return tuple(_float(f"{key}[{i}]", x) for i, x in enumerate(v))


def _strings(key: str, v: Any) -> tuple[str, ...]:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(key, f"expected a list of strings, got {v!r}")
    return tuple(_str(f"{key}[{i}]", x) for i, x in enumerate(v))


def _pairs(key: str, v: Any) -> tuple[tuple[float, float], ...]:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(key, f"expected a list of [psi, p_psi] pairs, got {v!r}")
    out = []
    for i, item in enumerate(v):
        pair = _floats(f"{key}[{i}]", item)
        if len(pair) != 2:
            raise ConfigError(f"{key}[{i}]", f"expected [psi, p_psi], got {item!r}")
        out.append(pair)
    return tuple(out)


def _matrix(key: str, v: Any) -> tuple[tuple[str, ...], ...]:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(key, f"expected a table of expression strings, got {v!r}")
    return tuple(_strings(f"{key}[{i}]", row) for i, row in enumerate(v))


def _table(key: str, v: Any) -> Mapping[str, float]:
    if not isinstance(v, dict):
        raise ConfigError(key, f"expected a table of named numbers, got {v!r}")
    return {str(k): _float(f"{key}.{k}", x) for k, x in sorted(v.items())}


Field = tuple[Callable[[str, Any], Any], Any]

SCHEMA: dict[str, dict[str, Field]] = {
    "experiment": {
        "kind": (_str, REQUIRED),
        "name": (_str, "experiment"),
        "description": (_str, ""),
    },
    "manifold": {
        "kind": (_str, "euclidean3"),
        "a": (_float, 1.0),
        "b": (_float, 1.0),
        "christoffel_mode": (_str, "analytic"),
        "variables": (_strings, ("x1", "x2", "x3")),
        "constants": (_table, {}),
        "components": (_matrix, ()),
    },
    "curve": {
        "kind": (_str, "circle"),
        "R": (_float, 2.0),
        "a_semi": (_float, 2.0),
        "b_semi": (_float, 2.0),
        "radius": (_float, 1.0),
        "pitch": (_float, 0.5),
        "turns": (_float, 2.0),
        "alpha": (_float, 5.0),
        "beta": (_float, 2.0),
        "eta0": (_float, math.pi / 4.0),
        "amp": (_float, 0.2),
        "direction": (_floats, (0.0, 0.0, 1.0)),
        "origin": (_floats, (0.0, 0.0, 0.0)),
        "length": (_float, 4.0),
        "position": (_strings, ()),
        "t_range": (_floats, (0.0, 2.0 * math.pi)),
        "period": (_float, 0.0),
        "arc_samples": (_int, 256),
    },
    "profile": {
        "kind": (_str, "circular"),
        "rho0": (_float, 0.2),
        "f_cos": (_floats, ()),
        "f_sin": (_floats, ()),
        "g_cos": (_floats, ()),
        "g_sin": (_floats, ()),
        "amplitude": (_float, 0.3),
        "lobes": (_int, 3),
    },
    "grid": {
        "n_s": (_int, 32),
        "n_psi": (_int, 32),
    },
    "flow": {
        "metric": (_str, "closed-form"),
        "tol": (_float, 1e-11),
        "max_step": (_float, 0.0),
        "length": (_float, 100.0),
        "s0": (_float, 0.0),
        "psi0": (_float, 0.0),
        "angle": (_float, 0.7),
        "n_out": (_int, 0),
        "reverse_check": (_bool, True),
    },
    "section": {
        "a_semi": (_float, 2.0),
        "b_semi": (_float, 2.0),
        "rho0": (_float, 1.0),
        "n_crossings": (_int, 400),
        "seed_grid": (_str, "default"),
        "seeds": (_pairs, ()),
        "psi0": (_float, 0.0),
        "momenta": (_floats, ()),
        "separatrix_offsets": (_floats, (0.05,)),
        "separatrix_momenta": (_floats, (-0.05, -0.02, 0.02, 0.05)),
        "direction": (_int, 1),
        "crossing_tol": (_float, 1e-10),
        "tol": (_float, 1e-11),
        "order": (_int, 60),
        "threshold": (_float, 1e-3),
        "min_points": (_int, 50),
    },
    "certify": {
        "rho0": (_float, 0.5),
        "samples": (_int, 8),
        "tol": (_float, 1e-7),
        "n_psi": (_int, 4),
        "n_rho": (_int, 4),
    },
    "output": {
        "dir": (_str, ""),
        "prefix": (_str, ""),
        "project": (_str, "auto"),
        "svg": (_bool, True),
    },
}


def _choice(key: str, value: str, allowed: tuple[str, ...]) -> None:
    if value not in allowed:
        raise ConfigError(key, f"must be one of {list(allowed)}, got {value!r}")


def _positive(key: str, value: float) -> None:
    if not value > 0:
        raise ConfigError(key, f"must be positive, got {value!r}")


def _check(sections: dict[str, dict[str, Any]]) -> None:
    """Cross-field rules that the per-key types cannot express."""
    exp, man, cur, prof = sections["experiment"], sections["manifold"], sections["curve"], sections["profile"]
    _choice("experiment.kind", exp["kind"], KINDS)
    _choice("manifold.kind", man["kind"], MANIFOLD_KINDS)
    _choice("manifold.christoffel_mode", man["christoffel_mode"], CHRISTOFFEL_MODES)
    if man["kind"] == "user" and not man["components"]:
        raise ConfigError("manifold.components", "a user manifold needs a 3x3 table of component expressions")
    if man["kind"] == "ellipsoid3_degenerate":
        _positive("manifold.a", man["a"])
        _positive("manifold.b", man["b"])
    _choice("curve.kind", cur["kind"], CURVE_KINDS)
    if cur["kind"] == "expression":
        if len(cur["position"]) != 3:
            raise ConfigError("curve.position", "an expression curve needs three coordinate expressions in t")
        if len(cur["t_range"]) != 2 or not cur["t_range"][1] > cur["t_range"][0]:
            raise ConfigError("curve.t_range", f"expected [t0, t1] with t1 > t0, got {list(cur['t_range'])}")
    if cur["period"] < 0:
        raise ConfigError("curve.period", "must be 0 (open curve) or positive")
    for key in ("direction", "origin"):
        if len(cur[key]) != 3:
            raise ConfigError(f"curve.{key}", f"expected three numbers, got {list(cur[key])}")
    if cur["arc_samples"] < 16:
        raise ConfigError("curve.arc_samples", "must be at least 16")
    _choice("profile.kind", prof["kind"], PROFILE_KINDS)
    _positive("profile.rho0", prof["rho0"])
    for key in ("n_s", "n_psi"):
        if sections["grid"][key] < 8:
            raise ConfigError(f"grid.{key}", f"must be at least 8, got {sections['grid'][key]}")
    flow = sections["flow"]
    _choice("flow.metric", flow["metric"], METRIC_SOURCES)
    _positive("flow.tol", flow["tol"])
    _positive("flow.length", flow["length"])
    if flow["max_step"] < 0:
        raise ConfigError("flow.max_step", "must be 0 (unbounded) or positive")
    sec = sections["section"]
    _choice("section.seed_grid", sec["seed_grid"], SEED_GRIDS)
    if sec["seed_grid"] == "custom" and not sec["seeds"]:
        raise ConfigError("section.seeds", "seed_grid = 'custom' needs at least one [psi, p_psi] pair")
    if sec["direction"] not in (-1, 1):
        raise ConfigError("section.direction", f"must be 1 or -1, got {sec['direction']}")
    for key in ("a_semi", "b_semi", "rho0", "crossing_tol", "tol", "threshold"):
        _positive(f"section.{key}", sec[key])
    for key in ("n_crossings", "order", "min_points"):
        if sec[key] < 1:
            raise ConfigError(f"section.{key}", "must be at least 1")
    cert = sections["certify"]
    _positive("certify.rho0", cert["rho0"])
    _positive("certify.tol", cert["tol"])
    for key in ("samples", "n_psi", "n_rho"):
        if cert[key] < 1:
            raise ConfigError(f"certify.{key}", "must be at least 1")
    _choice("output.project", sections["output"]["project"], PROJECTIONS)


def _freeze(value: Any) -> Any:
    if isinstance(value, dict):
        return MappingProxyType({k: _freeze(v) for k, v in value.items()})
    return value


def validate_raw(raw: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    """Check a parsed TOML document against SCHEMA and fill defaults."""
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(unknown[0], f"unknown section (known: {list(SECTION_ORDER)})")
    sections: dict[str, dict[str, Any]] = {}
    for name in SECTION_ORDER:
        given = raw.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(name, "expected a [table]")
        bad = sorted(set(given) - set(SCHEMA[name]))
        if bad:
            raise ConfigError(f"{name}.{bad[0]}", "unknown key")
        values: dict[str, Any] = {}
        for key, (conv, default) in SCHEMA[name].items():
            dotted = f"{name}.{key}"
            if key in given:
                values[key] = conv(dotted, given[key])
            elif default is REQUIRED:
                raise ConfigError(dotted, "missing required key")
            else:
                values[key] = conv(dotted, default) if not isinstance(default, dict) else dict(default)
        sections[name] = values
    kind = sections["experiment"]["kind"]
    sections["experiment"]["kind"] = KIND_ALIASES.get(kind, kind)
    _check(sections)
    return sections


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        return "{ " + ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items()) + " }"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {type(value).__name__} as TOML")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; every section holds every schema key."""
    sections: Mapping[str, Mapping[str, Any]]
    source: str = "<string>"

    @property
    def kind(self) -> str:
        return self.sections["experiment"]["kind"]

    @property
    def name(self) -> str:
        return self.sections["experiment"]["name"]

    def section(self, name: str) -> dict[str, Any]:
        return dict(self.sections[name])

    def get(self, dotted: str) -> Any:
        name, key = dotted.split(".", 1)
        return self.sections[name][key]

    def to_toml(self) -> str:
        """Canonical text: every section and key in schema order, defaults included."""
        out = []
        for name in SECTION_ORDER:
            out.append(f"[{name}]")
            for key in SCHEMA[name]:
                out.append(f"{key} = {_toml_value(self.sections[name][key])}")
            out.append("")
        return "\n".join(out)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_toml().encode("utf-8")).hexdigest()[:12]

    def to_dict(self) -> dict[str, dict[str, Any]]:
        return {name: {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in sec.items()}
                for name, sec in self.sections.items()}

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """New config with dotted keys replaced (CLI flags); the result is validated again."""
        raw = self.to_dict()
        for dotted, value in overrides.items():
            if "." not in dotted:
                raise ConfigError(dotted, "override keys must be dotted (section.key)")
            name, key = dotted.split(".", 1)
            raw.setdefault(name, {})[key] = list(value) if isinstance(value, tuple) else value
        return ExperimentConfig(_freeze(validate_raw(raw)), self.source)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExperimentConfig) and self.to_toml() == other.to_toml()

    def __hash__(self) -> int:
        return hash(self.to_toml())


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(source, f"invalid TOML: {e}") from None
    return ExperimentConfig(_freeze(validate_raw(raw)), source)


def load_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(str(path), f"cannot read config: {e.strerror or e}") from None
    return parse_config(text, source=str(path))
