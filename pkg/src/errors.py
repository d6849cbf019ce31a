"""Exception hierarchy for chart, curve, tube, flow and export failures."""
from __future__ import annotations


class TubeToolkitError(Exception):
    """Base class; the runner maps these to exit code 3 (ConfigError maps to 2)."""


class DegenerateMetricError(TubeToolkitError):
    def __init__(self, where: str = "") -> None:
        super().__init__(f"degenerate metric at point {where}".strip())


class DegeneratePlaneError(TubeToolkitError):
    def __init__(self, gram: float) -> None:
        super().__init__(f"degenerate plane (|u|^2|v|^2 - <u,v>^2 = {gram:.3e})")


class ChartDomainError(TubeToolkitError):
    def __init__(self, chart: str, where: str = "") -> None:
        super().__init__(f"left chart domain of {chart} {where}".strip())


class StepFailureError(TubeToolkitError):
    def __init__(self, detail: str) -> None:
        super().__init__(f"step failure: {detail}")


class IrregularCurveError(TubeToolkitError):
    def __init__(self, t: float, speed: float) -> None:
        super().__init__(f"irregular curve: speed {speed:.3e} at t={t:.6g}")


class VanishingCurvatureError(TubeToolkitError):
    def __init__(self, s: float, k1: float) -> None:
        super().__init__(f"vanishing geodesic curvature: k1={k1:.3e} at s={s:.6g}")


class TubeDegenerateError(TubeToolkitError):
    def __init__(self, detail: str) -> None:
        super().__init__(f"tube degenerate: {detail}")


class ProfileNotSimpleError(TubeToolkitError):
    def __init__(self, detail: str) -> None:
        super().__init__(f"profile not simple: {detail}")


class LeftDomainError(TubeToolkitError):
    def __init__(self, s: float, s_range: tuple[float, float]) -> None:
        super().__init__(f"left domain: s={s:.6g} outside [{s_range[0]:.6g}, {s_range[1]:.6g}]")


class SeedInfeasibleError(TubeToolkitError):
    def __init__(self, psi: float, p_psi: float) -> None:
        super().__init__(f"seed infeasible: no real p_s > 0 at H=1/2 for psi={psi:.6g}, p_psi={p_psi:.6g}")


class InsufficientPointsError(TubeToolkitError):
    def __init__(self, seed_index: int, n: int, need: int) -> None:
        super().__init__(f"insufficient points: seed {seed_index} has {n}, need {need}")


class PoleSingularityError(TubeToolkitError):
    def __init__(self, x4: float) -> None:
        super().__init__(f"pole singularity: |1 - x4| = {abs(1.0 - x4):.3e}")


class ConfigError(TubeToolkitError):
    def __init__(self, key: str, detail: str) -> None:
        self.key = key
        super().__init__(f"config error at '{key}': {detail}")


class ExportError(TubeToolkitError):
    def __init__(self, path: object, detail: str) -> None:
        self.path = path
        super().__init__(f"cannot write {path}: {detail}")
