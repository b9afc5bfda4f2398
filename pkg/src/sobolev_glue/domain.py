"""Product-grid domains.

Every domain handled here is a finite product of one-dimensional axes,
each either a closed interval [0, L] sampled at ``count`` nodes or a
circle of circumference L sampled at ``count`` equally spaced nodes.
The node spacing is ``L/(count-1)`` on intervals and ``L/count`` on
circles (the last node of a circle is not duplicated).

A ``kind`` string names the structural family and fixes the canonical
axis lengths used by the file format:

============   ==========================================  canonical lengths
interval       (0,1)                                       1
circle         circumference-2*pi circle                   2*pi
square         (0,1)^2                                     1, 1
box            (0,1)^3                                     1, 1, 1
cylinder       circle x (0,1)                              2*pi, 1
cube           circle x (0,1)^2                            2*pi, 1, 1
torus          unit flat torus                             1, 1
torus_collar   torus x (0,1)                               1, 1, 1
============   ==========================================  =================

Non-canonical lengths (a collar of depth L != 1, a chart patch whose
first axis is an arc length) are allowed in memory; the file sidecar
records them so round trips are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

TWO_PI = 2.0 * np.pi

# kind -> (periodic flags, canonical lengths)
KIND_TABLE: dict[str, tuple[tuple[bool, ...], tuple[float, ...]]] = {
    "interval": ((False,), (1.0,)),
    "circle": ((True,), (TWO_PI,)),
    "square": ((False, False), (1.0, 1.0)),
    "box": ((False, False, False), (1.0, 1.0, 1.0)),
    "cylinder": ((True, False), (TWO_PI, 1.0)),
    "cube": ((True, False, False), (TWO_PI, 1.0, 1.0)),
    "torus": ((True, True), (1.0, 1.0)),
    "torus_collar": ((True, True, False), (1.0, 1.0, 1.0)),
}


@dataclass(frozen=True)
class Axis:
    count: int
    length: float
    periodic: bool

    def __post_init__(self) -> None:
        minimum = 3 if self.periodic else 2
        if self.count < minimum:
            raise ParameterError(
                f"axis needs at least {minimum} nodes, got {self.count}"
            )
        if not (self.length > 0.0 and np.isfinite(self.length)):
            raise ParameterError(f"axis length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        if self.periodic:
            return self.length / self.count
        return self.length / (self.count - 1)

    @property
    def cell_count(self) -> int:
        return self.count if self.periodic else self.count - 1

    def coordinates(self) -> np.ndarray:
        return self.spacing * np.arange(self.count)


@dataclass(frozen=True)
class DomainSpec:
    """A named product of axes; construct via the module-level helpers."""

    kind: str
    axes: tuple[Axis, ...]

    def __post_init__(self) -> None:
        if self.kind not in KIND_TABLE:
            raise ParameterError(f"unknown domain kind {self.kind!r}")
        flags, _ = KIND_TABLE[self.kind]
        if len(self.axes) != len(flags):
            raise ParameterError(
                f"kind {self.kind!r} has {len(flags)} axes, got {len(self.axes)}"
            )
        for axis, flag in zip(self.axes, flags):
            if axis.periodic != flag:
                raise ParameterError(f"axis periodicity does not match kind {self.kind!r}")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(a.length for a in self.axes)

    @property
    def max_spacing(self) -> float:
        return max(a.spacing for a in self.axes)

    @property
    def volume(self) -> float:
        return float(np.prod([a.length for a in self.axes]))

    def is_canonical(self) -> bool:
        _, canonical = KIND_TABLE[self.kind]
        return all(
            abs(a.length - c) <= 1e-12 * max(1.0, c)
            for a, c in zip(self.axes, canonical)
        )


def _build(kind: str, counts: tuple[int, ...], lengths=None) -> DomainSpec:
    flags, canonical = KIND_TABLE[kind]
    if lengths is None:
        lengths = canonical
    axes = tuple(
        Axis(count=n, length=float(L), periodic=f)
        for n, L, f in zip(counts, lengths, flags)
    )
    return DomainSpec(kind=kind, axes=axes)


def interval(n: int) -> DomainSpec:
    return _build("interval", (n,))


def circle(n: int) -> DomainSpec:
    return _build("circle", (n,))


def square(n1: int, n2: int, lengths: tuple[float, float] | None = None) -> DomainSpec:
    return _build("square", (n1, n2), lengths)


def box(n1: int, n2: int, n3: int, lengths: tuple[float, float, float] | None = None) -> DomainSpec:
    return _build("box", (n1, n2, n3), lengths)


def cylinder(n_theta: int, n_depth: int, depth: float = 1.0) -> DomainSpec:
    return _build("cylinder", (n_theta, n_depth), (TWO_PI, depth))


def cube(n_theta: int, n1: int, n2: int) -> DomainSpec:
    return _build("cube", (n_theta, n1, n2))


def torus(n1: int, n2: int) -> DomainSpec:
    return _build("torus", (n1, n2))


def torus_collar(n1: int, n2: int, n_depth: int, depth: float = 1.0) -> DomainSpec:
    return _build("torus_collar", (n1, n2, n_depth), (1.0, 1.0, depth))


def from_kind(kind: str, counts: tuple[int, ...], lengths=None) -> DomainSpec:
    if kind not in KIND_TABLE:
        raise ParameterError(f"unknown domain kind {kind!r}")
    return _build(kind, counts, lengths)


def kind_for_axes(axes: tuple[Axis, ...]) -> str:
    """Structural kind of an axis tuple (used when slicing a face off)."""
    pattern = tuple(a.periodic for a in axes)
    for kind, (flags, _) in KIND_TABLE.items():
        if flags == pattern:
            return kind
    raise DomainError(f"no named kind for periodicity pattern {pattern}")


# Boundary faces.  "bottom"/"top" always refer to the last axis, which by
# convention carries the collar depth; "left"/"right" refer to the
# second-to-last axis where that axis is an interval.
_FACE_AXIS_OFFSET = {"bottom": -1, "top": -1, "left": -2, "right": -2}
_FACE_SIDE = {"bottom": 0, "top": 1, "left": 0, "right": 1}


def face_axis_side(domain: DomainSpec, face: str) -> tuple[int, int]:
    """Resolve a face name to (axis index, side index). Side 0 is coordinate 0."""
    if face not in _FACE_AXIS_OFFSET:
        raise DomainError(f"unknown face {face!r}")
    offset = _FACE_AXIS_OFFSET[face]
    if domain.ndim + offset < 0:
        raise DomainError(f"face {face!r} invalid for kind {domain.kind!r}")
    axis = domain.ndim + offset
    if domain.axes[axis].periodic:
        raise DomainError(f"face {face!r} lies on a periodic axis of {domain.kind!r}")
    return axis, _FACE_SIDE[face]


def face_domain(domain: DomainSpec, face: str) -> DomainSpec:
    axis, _ = face_axis_side(domain, face)
    remaining = domain.axes[:axis] + domain.axes[axis + 1 :]
    return DomainSpec(kind=kind_for_axes(remaining), axes=remaining)
