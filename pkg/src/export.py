"""Tube meshes, S^3 stereographic projection and artifact writers (OBJ, SVG, CSV) with config-echo headers."""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence
from xml.sax.saxutils import escape, unescape

import numpy as np
import pandas as pd

from .curves import ArcLengthTable, ParamCurve, arclength_reparam, frenet_evolve
from .errors import ExportError, PoleSingularityError
from .manifolds import ChartMetric
from .numeric_tubes import ATOL, RTOL, radial_geodesic
from .parallel import ordered_map
from .spaceform_tubes import TWO_PI, TubeProfile, validate_profile

POLE_TOL = 1e-9
POLE_WARN = 1e-3
MIN_MESH = 8
CONFIG_BEGIN = "config:begin"
CONFIG_END = "config:end"

SVG_WIDTH = 800
SVG_HEIGHT = 400
SVG_AXES = (0.0, TWO_PI, -1.0, 1.0)
SEED_COLORS = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
)


@dataclass(frozen=True)
class SurfaceMesh:
    """Vertices on an n_s x n_psi grid, vertex (i, j) at row i * n_psi + j."""
    vertices: np.ndarray
    n_s: int
    n_psi: int
    wrap_s: bool = False
    wrap_psi: bool = True

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (self.n_s * self.n_psi, 3):
            raise ValueError(f"expected {self.n_s * self.n_psi} vertices of dimension 3, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh has non-finite vertex coordinates")
        object.__setattr__(self, "vertices", v)

    def quads(self) -> np.ndarray:
        rows = self.n_s if self.wrap_s else self.n_s - 1
        cols = self.n_psi if self.wrap_psi else self.n_psi - 1
        out = []
        for i in range(rows):
            i1 = (i + 1) % self.n_s
            for j in range(cols):
                j1 = (j + 1) % self.n_psi
                out.append((i * self.n_psi + j, i1 * self.n_psi + j, i1 * self.n_psi + j1, i * self.n_psi + j1))
        return np.array(out, dtype=int).reshape(-1, 4)

    def triangles(self) -> np.ndarray:
        q = self.quads()
        return np.concatenate([q[:, [0, 1, 2]], q[:, [0, 2, 3]]]) if len(q) else np.zeros((0, 3), dtype=int)

    def triangle_areas(self) -> np.ndarray:
        tri = self.triangles()
        a, b, c = (self.vertices[tri[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_tube_mesh(
    chart: ChartMetric,
    curve: ParamCurve,
    profile: TubeProfile,
    n_s: int,
    n_psi: int,
    table: ArcLengthTable | None = None,
    allow_geodesic: bool = False,
    rtol: float = RTOL,
    atol: float = ATOL,
    workers: int | None = None,
) -> SurfaceMesh:
    """Vertex (i, j) = endpoint of the radial geodesic from gamma(s_i) at angle phi(psi_j), length r(psi_j)."""
    if n_s < MIN_MESH or n_psi < MIN_MESH:
        raise ValueError(f"mesh grid must be at least {MIN_MESH}x{MIN_MESH}, got {n_s}x{n_psi}")
    validate_profile(profile)
    table = table or arclength_reparam(curve)
    s = np.linspace(0.0, table.length, n_s, endpoint=not curve.closed)
    psi = np.linspace(0.0, TWO_PI, n_psi, endpoint=False)
    frames = frenet_evolve(curve, s, table, allow_geodesic=allow_geodesic)
    polar = profile.polar(psi)
    phis = np.arctan2(polar.sin_phi, polar.cos_phi)

    def vertex(ij: tuple[int, int]) -> np.ndarray:
        i, j = ij
        path = radial_geodesic(chart, frames[i], float(phis[j]), float(polar.r[j]), n_eval=2, rtol=rtol, atol=atol)
        return path.states[-1].x

    nodes = [(i, j) for i in range(n_s) for j in range(n_psi)]
    vertices = np.array(ordered_map(vertex, nodes, workers))
    return SurfaceMesh(vertices=vertices, n_s=n_s, n_psi=n_psi, wrap_s=curve.closed, wrap_psi=True)


def embed_s3(point) -> np.ndarray:
    """Hopf coordinates (eta, theta, phi) -> unit 4-vector; also accepts an (n, 3) array."""
    p = np.asarray(point, dtype=float)
    eta, theta, phi = p[..., 0], p[..., 1], p[..., 2]
    return np.stack([
        np.sin(eta) * np.cos(theta),
        np.sin(eta) * np.sin(theta),
        np.cos(eta) * np.cos(phi),
        np.cos(eta) * np.sin(phi),
    ], axis=-1)


def stereographic(sigma) -> np.ndarray:
    """Projection from the pole (0, 0, 0, 1): (x1, x2, x3) / (1 - x4)."""
    x = np.asarray(sigma, dtype=float)
    gap = 1.0 - x[..., 3]
    if np.any(np.abs(gap) < POLE_TOL):
        raise PoleSingularityError(float(x[..., 3].flat[int(np.argmin(np.abs(gap)))]))
    return x[..., :3] / gap[..., None]


def embed_and_project_s3(hopf_point) -> np.ndarray:
    return stereographic(embed_s3(hopf_point))


class ProjectedMesh(NamedTuple):
    mesh: SurfaceMesh
    norms: np.ndarray
    min_pole_gap: float

    @property
    def near_pole(self) -> bool:
        return self.min_pole_gap < POLE_WARN


def project_mesh_s3(mesh: SurfaceMesh) -> ProjectedMesh:
    """Hopf-chart mesh -> R^3 mesh, with the norms of the embedded vertices and the closest approach to the pole."""
    sigma = embed_s3(mesh.vertices)
    projected = stereographic(sigma)
    gap = float(np.min(np.abs(1.0 - sigma[:, 3])))
    return ProjectedMesh(replace(mesh, vertices=projected), np.linalg.norm(sigma, axis=1), gap)


def header_lines(config_text: str, title: str | None = None) -> list[str]:
    lines = [title] if title else []
    lines.append(CONFIG_BEGIN)
    lines.extend(config_text.splitlines())
    lines.append(CONFIG_END)
    return lines


def _comment_block(lines: Iterable[str]) -> str:
    return "".join(f"# {line}\n" if line else "#\n" for line in lines)


def _write_text(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ExportError(path, e.strerror or str(e)) from e
    return path


def write_obj(mesh: SurfaceMesh, path: Path, header: Sequence[str] = ()) -> Path:
    """ASCII OBJ: '#' header, one 'v' per vertex, quads split into two 1-based 'f' triangles."""
    parts = [_comment_block(header)]
    parts.extend(f"v {x:.12g} {y:.12g} {z:.12g}\n" for x, y, z in mesh.vertices)
    parts.extend(f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.triangles())
    return _write_text(path, "".join(parts))


def write_csv(table: pd.DataFrame, path: Path, header: Sequence[str] = ()) -> Path:
    """CSV with a '#' header; NaN marks a missing value and is written as an empty cell."""
    if np.any(np.isinf(table.select_dtypes(include="number").to_numpy(dtype=float))):
        raise ExportError(path, "table has infinite values")
    return _write_text(path, _comment_block(header) + table.to_csv(index=False, float_format="%.17g"))


def read_csv(path: Path) -> pd.DataFrame:
    """Read a CSV written by write_csv, skipping the '#' header."""
    try:
        return pd.read_csv(path, comment="#")
    except OSError as e:
        raise ExportError(path, e.strerror or str(e)) from e


SVG_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
  <metadata id="experiment-config">{metadata}</metadata>
  <title>{title}</title>
  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff" stroke="#000000" stroke-width="1"/>
  <g id="axes" stroke="#999999" stroke-width="0.5">
{axes}
  </g>
  <g id="points" stroke="none">
{points}
  </g>
</svg>
"""

SVG_LINE = '    <line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}"/>'
SVG_LABEL = '    <text x="{x:.3f}" y="{y:.3f}" font-size="10" fill="#555555" stroke="none">{text}</text>'
SVG_POINT = '    <circle cx="{x:.4f}" cy="{y:.4f}" r="{r}" fill="{color}"/>'


def svg_map(psi, p, axes: tuple[float, float, float, float] = SVG_AXES,
            width: int = SVG_WIDTH, height: int = SVG_HEIGHT) -> tuple[np.ndarray, np.ndarray]:
    """Affine map from (psi, p_psi) to viewport coordinates; y grows downwards."""
    x0, x1, y0, y1 = axes
    x = (np.asarray(psi, dtype=float) - x0) / (x1 - x0) * width
    y = (y1 - np.asarray(p, dtype=float)) / (y1 - y0) * height
    return x, y


def _axes_markup(axes, width: int, height: int) -> str:
    x0, x1, y0, y1 = axes
    lines = []
    for k in range(1, 4):
        psi = x0 + k * (x1 - x0) / 4.0
        x, _ = svg_map(psi, 0.0, axes, width, height)
        lines.append(SVG_LINE.format(x1=float(x), y1=0.0, x2=float(x), y2=float(height)))
        lines.append(SVG_LABEL.format(x=float(x) + 2.0, y=float(height) - 4.0, text=f"{psi:.3g}"))
    _, y = svg_map(x0, 0.5 * (y0 + y1), axes, width, height)
    lines.append(SVG_LINE.format(x1=0.0, y1=float(y), x2=float(width), y2=float(y)))
    lines.append(SVG_LABEL.format(x=2.0, y=12.0, text=f"p_psi = {y1:g}"))
    lines.append(SVG_LABEL.format(x=2.0, y=float(height) - 4.0, text=f"p_psi = {y0:g}"))
    return "\n".join(lines)


def write_svg_scatter(
    points: pd.DataFrame,
    path: Path,
    header: Sequence[str] = (),
    axes: tuple[float, float, float, float] = SVG_AXES,
    width: int = SVG_WIDTH,
    height: int = SVG_HEIGHT,
    title: str = "Poincare section",
) -> Path:
    """Scatter of section points (columns psi, p_psi, seed_index), one color per seed.

    psi is wrapped into [0, 2 pi) and points outside the p_psi range are dropped.
    """
    marks = []
    if len(points):
        psi = np.mod(points["psi"].to_numpy(dtype=float), TWO_PI)
        p = points["p_psi"].to_numpy(dtype=float)
        seeds = points["seed_index"].to_numpy(dtype=int) if "seed_index" in points else np.zeros(len(p), dtype=int)
        keep = (p >= axes[2]) & (p <= axes[3]) & np.isfinite(psi) & np.isfinite(p)
        xs, ys = svg_map(psi[keep], p[keep], axes, width, height)
        for x, y, k in zip(xs, ys, seeds[keep]):
            marks.append(SVG_POINT.format(x=x, y=y, r=1.2, color=SEED_COLORS[int(k) % len(SEED_COLORS)]))
    text = SVG_TEMPLATE.format(
        width=width,
        height=height,
        metadata=escape("\n" + "\n".join(header) + "\n"),
        title=escape(title),
        axes=_axes_markup(axes, width, height),
        points="\n".join(marks),
    )
    return _write_text(path, text)


def _header_text(path: Path) -> list[str]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ExportError(path, e.strerror or str(e)) from e
    if Path(path).suffix.lower() == ".svg":
        start = raw.find('<metadata id="experiment-config">')
        end = raw.find("</metadata>", start)
        if start < 0 or end < 0:
            return []
        body = raw[start + len('<metadata id="experiment-config">'):end]
        return unescape(body).strip("\n").splitlines()
    lines = []
    for line in raw.splitlines():
        if not line.startswith("#"):
            break
        lines.append(line[2:] if line.startswith("# ") else line[1:])
    return lines


def config_text_from_header(path: Path) -> str:
    """The TOML text between the config markers of an artifact header."""
    lines = _header_text(path)
    try:
        i, j = lines.index(CONFIG_BEGIN), lines.index(CONFIG_END)
    except ValueError:
        raise ExportError(path, "no config block in header") from None
    return "\n".join(lines[i + 1:j]) + "\n"


def config_from_header(path: Path):
    """Parse the echoed config of an OBJ/CSV/SVG artifact back into an ExperimentConfig."""
    from .config import parse_config

    return parse_config(config_text_from_header(path), source=str(path))

