"""Target spaces for grid maps: Euclidean space, the unit circle, unit spheres."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SingularityError


@dataclass(frozen=True)
class TargetSpec:
    kind: str  # "euclidean" | "circle" | "sphere"
    nu: int  # ambient dimension

    def __post_init__(self) -> None:
        if self.kind not in ("euclidean", "circle", "sphere"):
            raise ParameterError(f"unknown target kind {self.kind!r}")
        if self.nu < 1:
            raise ParameterError(f"ambient dimension must be positive, got {self.nu}")
        if self.kind == "circle" and self.nu != 2:
            raise ParameterError("circle target requires ambient dimension 2")
        if self.kind == "sphere" and self.nu < 2:
            raise ParameterError("sphere target requires ambient dimension >= 2")

    @property
    def constrained(self) -> bool:
        return self.kind in ("circle", "sphere")


def euclidean(nu: int) -> TargetSpec:
    return TargetSpec("euclidean", nu)


def circle() -> TargetSpec:
    return TargetSpec("circle", 2)


def sphere(nu: int) -> TargetSpec:
    return TargetSpec("sphere", nu)


def project_to_target(target: TargetSpec, values: np.ndarray) -> np.ndarray:
    """Nearest-point projection onto the target, applied along the last axis.

    Euclidean targets are returned unchanged.  For the circle and the
    sphere the projection is y/|y|, undefined at the origin: any zero
    value raises a SingularityError rather than silently picking a point.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != target.nu:
        raise ParameterError(
            f"value dimension {values.shape[-1]} does not match target {target.nu}"
        )
    if not target.constrained:
        return values
    norms = np.linalg.norm(values, axis=-1)
    if not np.all(norms > 0.0):
        raise SingularityError("cannot project the zero vector onto the unit sphere")
    return values / norms[..., None]


def distance_to_target(target: TargetSpec, values: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean distance from values to the target manifold."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != target.nu:
        raise ParameterError(
            f"value dimension {values.shape[-1]} does not match target {target.nu}"
        )
    if not target.constrained:
        return np.zeros(values.shape[:-1])
    return np.abs(np.linalg.norm(values, axis=-1) - 1.0)
