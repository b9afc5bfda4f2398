"""Chart coverings of the circle and the flat torus, and the glue induction.

A covering carries K overlapping chart cores G_i inside chart domains
W_i, each with a map to the unit ball of chart coordinates: arcs mapped
affinely onto [-1,1] for the circle, squares mapped affinely onto
[-1,1]^2 and then through a fixed smooth square-to-disk diffeomorphism
for the torus.

``glue`` runs the inductive construction over a collar base x (0, depth):
the first chart's patch is adopted on its core; every later chart
contributes its patch on a ball of certified radius r_i and is folded
into the previous state across the cone-captured annulus, radially
parametrized through ``radial_fold_map``.  Bookkeeping tracks the sampled
trusted region H_i and checks the covering invariant
H_i union G_{i+1} ... G_K = base after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import cone as cone_mod
from .domain import Axis, DomainSpec, TWO_PI, box, cylinder, square, torus_collar
from .energy import PenaltySpec, dirichlet_p_energy, penalized_energy
from .errors import (
    DomainError,
    GlueError,
    ParameterError,
    PreconditionError,
    ResolutionError,
)
from .gridmap import (
    GridMap,
    TraceMap,
    evaluate_batch,
    extract_trace,
    grid_coordinates,
    node_mesh,
)
from .target import project_to_target

#: margin factor of the chart domain W around the core G
_MARGIN_FACTOR = 1.2

#: default chart-coordinate sampling for cone capture, by base dimension
_CONE_RESOLUTION = {1: 513, 2: 257}

#: default base-grid sampling for the trusted-region bookkeeping
_CHECK_RESOLUTION = {1: 2048, 2: 384}


# ---------------------------------------------------- square <-> disk maps

def square_to_disk(xy: np.ndarray) -> np.ndarray:
    """Smooth diffeomorphism [-1,1]^2 -> closed unit disk (elliptical map)."""
    xy = np.asarray(xy, dtype=np.float64)
    x, y = xy[..., 0], xy[..., 1]
    u = x * np.sqrt(np.maximum(1.0 - 0.5 * y * y, 0.0))
    v = y * np.sqrt(np.maximum(1.0 - 0.5 * x * x, 0.0))
    return np.stack([u, v], axis=-1)


def disk_to_square(uv: np.ndarray) -> np.ndarray:
    """Inverse of :func:`square_to_disk` on the closed unit disk."""
    uv = np.asarray(uv, dtype=np.float64)
    u, v = uv[..., 0], uv[..., 1]
    uu, vv = u * u, v * v
    root8 = 2.0 * math.sqrt(2.0)
    tx = 2.0 + uu - vv
    ty = 2.0 - uu + vv
    # clamped square roots: radicands only dip below zero by rounding
    x = 0.5 * (
        np.sqrt(np.maximum(tx + root8 * u, 0.0))
        - np.sqrt(np.maximum(tx - root8 * u, 0.0))
    )
    y = 0.5 * (
        np.sqrt(np.maximum(ty + root8 * v, 0.0))
        - np.sqrt(np.maximum(ty - root8 * v, 0.0))
    )
    return np.stack([x, y], axis=-1)


# ------------------------------------------------------------------ charts

@dataclass(frozen=True)
class Chart:
    """One chart: core box G centered at ``center``, domain box W around it."""

    index: int
    base_lengths: tuple[float, ...]
    center: tuple[float, ...]
    core_extent: tuple[float, ...]
    margin_extent: tuple[float, ...]
    distortion: float

    @property
    def dimension(self) -> int:
        return len(self.center)

    def _wrapped_offsets(self, pts: np.ndarray) -> np.ndarray:
        """Signed offsets from the center, wrapped to the shorter way round."""
        pts = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(pts)
        for a in range(self.dimension):
            length = self.base_lengths[a]
            delta = np.mod(pts[..., a] - self.center[a], length)
            out[..., a] = np.where(delta > length / 2.0, delta - length, delta)
        return out

    def affine(self, pts: np.ndarray) -> np.ndarray:
        """Normalized chart coordinates; the closed core maps onto [-1,1]^m."""
        off = self._wrapped_offsets(pts)
        scale = np.array(self.core_extent) / 2.0
        return off / scale

    def in_core(self, pts: np.ndarray) -> np.ndarray:
        return np.all(np.abs(self.affine(pts)) < 1.0, axis=-1)

    def in_closed_core(self, pts: np.ndarray) -> np.ndarray:
        return np.all(np.abs(self.affine(pts)) <= 1.0 + 1e-12, axis=-1)

    def in_domain(self, pts: np.ndarray) -> np.ndarray:
        off = self._wrapped_offsets(pts)
        half = np.array(self.margin_extent) / 2.0
        return np.all(np.abs(off) < half, axis=-1)

    def to_disk(self, pts: np.ndarray) -> np.ndarray:
        """Chart-ball coordinates of base points (points of the closed core)."""
        a = self.affine(pts)
        if self.dimension == 1:
            return a
        return square_to_disk(a)

    def from_disk(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Base points and patch offsets of chart-ball coordinates |z| <= 1.

        Returns ``(points, offsets)`` where offsets live in the patch box
        [0, core_extent] per axis (the parametrization patch maps use).
        """
        z = np.asarray(z, dtype=np.float64)
        a = z if self.dimension == 1 else disk_to_square(z)
        extent = np.array(self.core_extent)
        offsets = np.clip((a + 1.0) / 2.0, 0.0, 1.0) * extent
        pts = np.empty_like(offsets)
        for ax in range(self.dimension):
            low = self.center[ax] - extent[ax] / 2.0
            pts[..., ax] = np.mod(low + offsets[..., ax], self.base_lengths[ax])
        return pts, offsets

    def patch_offsets(self, pts: np.ndarray) -> np.ndarray:
        """Patch-box coordinates of base points of the closed core."""
        off = self._wrapped_offsets(pts)
        extent = np.array(self.core_extent)
        return np.clip(off + extent / 2.0, 0.0, extent)


@dataclass(frozen=True)
class Covering:
    base_kind: str  # "circle" | "torus"
    base_lengths: tuple[float, ...]
    charts: tuple[Chart, ...]

    @property
    def single_chart(self) -> bool:
        return len(self.charts) == 0

    @property
    def chart_count(self) -> int:
        return 1 if self.single_chart else len(self.charts)

    @property
    def dimension(self) -> int:
        return len(self.base_lengths)


def single_chart_covering(base: DomainSpec) -> Covering:
    """Degenerate one-patch covering: the whole base, no chart map.

    Gluing with it is a passthrough; it exists so chart count 1 has a
    well-defined meaning even though no single honest chart can cover a
    closed manifold.
    """
    if base.kind not in ("circle", "torus"):
        raise ParameterError(f"coverings need a circle or torus base, got {base.kind!r}")
    return Covering(base_kind=base.kind, base_lengths=base.lengths, charts=())


def _sigma_distortion() -> float:
    """Largest singular value of the square-to-disk map, sampled once."""
    axis = np.linspace(-1.0, 1.0, 81)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([xs.reshape(-1), ys.reshape(-1)], axis=-1)
    eps = 1e-6
    worst = 0.0
    cols = []
    for a in range(2):
        shift = np.zeros(2)
        shift[a] = eps
        d = (square_to_disk(np.clip(pts + shift, -1, 1)) - square_to_disk(np.clip(pts - shift, -1, 1))) / (2 * eps)
        cols.append(d)
    jac = np.stack(cols, axis=-1)  # (N, 2, 2)
    svals = np.linalg.svd(jac, compute_uv=False)
    worst = float(np.max(svals))
    return worst


def _torus_factors(count: int) -> tuple[int, int]:
    best: Optional[tuple[int, int]] = None
    for k1 in range(2, int(math.isqrt(count)) + 1):
        if count % k1 == 0 and count // k1 >= 2:
            best = (k1, count // k1)
    if best is None:
        raise ParameterError(
            f"torus coverings arrange charts on a grid; {count} does not factor "
            "into two counts >= 2"
        )
    return best


def build_covering(base: DomainSpec, count: int) -> Covering:
    """Overlapping arcs (circle) or squares (torus) with affine chart maps.

    Chart count 1 returns the degenerate passthrough covering.  The
    sampled covering property and the chart-ball normalization are
    checked before returning.
    """
    if base.kind not in ("circle", "torus"):
        raise ParameterError(f"coverings need a circle or torus base, got {base.kind!r}")
    if not base.is_canonical():
        raise ParameterError("coverings assume canonical base lengths")
    if count < 1:
        raise ParameterError(f"chart count must be positive, got {count}")
    if count == 1:
        return single_chart_covering(base)

    charts: list[Chart] = []
    if base.kind == "circle":
        length = TWO_PI
        arc = min(1.5 * math.pi, 3.0 * math.pi / count)
        margin = min(_MARGIN_FACTOR * arc, 0.98 * length)
        for i in range(count):
            center = length * i / count
            charts.append(
                Chart(
                    index=i,
                    base_lengths=(length,),
                    center=(center,),
                    core_extent=(arc,),
                    margin_extent=(margin,),
                    distortion=2.0 / arc,
                )
            )
    else:
        if count < 4:
            raise ParameterError(f"torus coverings need at least 4 charts, got {count}")
        k1, k2 = _torus_factors(count)
        sides = (min(1.5 / k1, 0.95), min(1.5 / k2, 0.95))
        margins = tuple(min(_MARGIN_FACTOR * s, 0.98) for s in sides)
        sigma = _sigma_distortion()
        dist = sigma * max(2.0 / sides[0], 2.0 / sides[1])
        index = 0
        for a in range(k1):
            for b in range(k2):
                center = ((a + 0.5) / k1, (b + 0.5) / k2)
                charts.append(
                    Chart(
                        index=index,
                        base_lengths=(1.0, 1.0),
                        center=center,
                        core_extent=sides,
                        margin_extent=margins,
                        distortion=dist,
                    )
                )
                index += 1

    covering = Covering(base_kind=base.kind, base_lengths=base.lengths, charts=tuple(charts))
    _validate_covering(covering)
    return covering


def _validate_covering(covering: Covering) -> None:
    m = covering.dimension
    res = 1024 if m == 1 else 128
    axes = [np.linspace(0.0, L, res, endpoint=False) for L in covering.base_lengths]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    covered = np.zeros(pts.shape[0], dtype=bool)
    for chart in covering.charts:
        covered |= chart.in_core(pts)
    if not np.all(covered):
        raise GlueError("internal: chart cores fail to cover the base")
    for chart in covering.charts:
        # core boundary must land on the unit sphere of chart coordinates
        probe = np.linspace(-1.0, 1.0, 33)
        if m == 1:
            edges = np.array([[-1.0], [1.0]])
        else:
            edges = np.concatenate(
                [
                    np.stack([np.full_like(probe, s), probe], axis=-1)
                    for s in (-1.0, 1.0)
                ]
                + [
                    np.stack([probe, np.full_like(probe, s)], axis=-1)
                    for s in (-1.0, 1.0)
                ]
            )
        extent = np.array(chart.core_extent)
        base_pts = np.mod(
            np.array(chart.center) + edges * extent / 2.0,
            np.array(covering.base_lengths),
        )
        z = chart.to_disk(base_pts)
        radii = np.linalg.norm(np.atleast_2d(z), axis=-1)
        if np.max(np.abs(radii - 1.0)) > 1e-9:
            raise GlueError("internal: chart core boundary misses the unit sphere")
        pts_back, _ = chart.from_disk(z)
        gap = np.array(chart._wrapped_offsets(pts_back) - chart._wrapped_offsets(base_pts))
        if np.max(np.abs(gap)) > 1e-9:
            raise GlueError("internal: chart map does not invert on the core boundary")


# -------------------------------------------------------- radial fold map

def radial_fold_map(z_prime: np.ndarray, z_m, r: float) -> np.ndarray:
    """(z', z_m) -> (1 - z_m * r) z' for unit directions z'.

    Sweeps the radius interval (1-r, 1) as z_m runs over (0, 1); the end
    values are accepted so sampled grids can touch both rims.
    """
    z_prime = np.asarray(z_prime, dtype=np.float64)
    single = z_prime.ndim == 1
    dirs = np.atleast_2d(z_prime)
    norms = np.linalg.norm(dirs, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise DomainError("radial fold directions must be unit vectors")
    z_m = np.asarray(z_m, dtype=np.float64)
    out = (1.0 - z_m * float(r)).reshape(-1, 1) * dirs
    return out[0] if single and out.shape[0] == 1 else out


# ------------------------------------------------------------ glue reports

@dataclass(frozen=True)
class GlueStep:
    chart_index: int
    radius: float
    accepted_fraction: float
    trace_sup_error: float
    gap_fraction: float
    certificate: Optional[cone_mod.ConeCertificate]
    f_set: Optional[cone_mod.SampledSet]
    e_set: Optional[cone_mod.SampledSet]


@dataclass(frozen=True)
class GlueReport:
    steps: tuple[GlueStep, ...]
    patch_energies: tuple[float, ...]
    patch_energy_total: float
    glued_energy: float
    ratio: float
    trace_sup_error: float
    p: float
    penalized: bool
    degenerate: bool


@dataclass(frozen=True)
class VerifyGlueReport:
    trace_sup_error: float
    glued_energy: float
    patch_energy_total: float
    ratio: float
    degenerate: bool
    cone_checks_passed: Optional[bool]


def _energy_value(m: GridMap, p: float, penalty: Optional[PenaltySpec]) -> float:
    if penalty is not None and penalty.kind != "none":
        return penalized_energy(m, p, penalty).value
    return dirichlet_p_energy(m, p).value


# ------------------------------------------------------------------- glue

def _collar_domain(base: DomainSpec, n_depth: int, depth: float) -> DomainSpec:
    if base.kind == "circle":
        return cylinder(base.shape[0], n_depth, depth)
    return torus_collar(base.shape[0], base.shape[1], n_depth, depth)


def _patch_domain_for(chart: Chart, counts: tuple[int, ...], n_depth: int, depth: float) -> DomainSpec:
    if chart.dimension == 1:
        return square(counts[0], n_depth, lengths=(chart.core_extent[0], depth))
    return box(
        counts[0],
        counts[1],
        n_depth,
        lengths=(chart.core_extent[0], chart.core_extent[1], depth),
    )


def replicate_trace_patch(
    trace: TraceMap,
    chart: Chart,
    n_depth: int,
    depth: float = 1.0,
    counts: Optional[tuple[int, ...]] = None,
) -> GridMap:
    """Depth-constant patch over a chart core sampled from the trace."""
    if counts is None:
        counts = tuple(
            max(2, int(round(extent / trace.base.axes[a].spacing)) + 1)
            for a, extent in enumerate(chart.core_extent)
        )
    dom = _patch_domain_for(chart, counts, n_depth, depth)
    coords = grid_coordinates(dom)
    mesh = np.meshgrid(*coords[:-1], indexing="ij")
    offsets = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    extent = np.array(chart.core_extent)
    low = np.array(chart.center) - extent / 2.0
    base_pts = np.mod(low + offsets, np.array(chart.base_lengths))
    vals = evaluate_batch(trace, base_pts)
    if trace.target.constrained:
        vals = project_to_target(trace.target, vals)
    sheet = vals.reshape(tuple(counts) + (trace.nu,))
    full = np.repeat(sheet[..., None, :], n_depth, axis=-2)
    return GridMap(domain=dom, target=trace.target, values=full)


def _check_patch(
    chart: Chart, patch: GridMap, trace: TraceMap, n_depth: int, depth: float, tol: float
) -> float:
    dom = patch.domain
    want_kind = "square" if chart.dimension == 1 else "box"
    if dom.kind != want_kind:
        raise ParameterError(
            f"patch {chart.index} must live on a {want_kind} grid, got {dom.kind!r}"
        )
    for a, extent in enumerate(chart.core_extent):
        if abs(dom.axes[a].length - extent) > 1e-9 * max(1.0, extent):
            raise ParameterError(
                f"patch {chart.index} axis {a} has length {dom.axes[a].length}, "
                f"chart core needs {extent}"
            )
    if dom.axes[-1].count != n_depth or abs(dom.axes[-1].length - depth) > 1e-12:
        raise ParameterError("patches must share one collar depth axis")
    if patch.target != trace.target:
        raise ParameterError(f"patch {chart.index} target does not match the trace")
    # trace agreement on the core; pairwise overlap agreement follows since
    # every patch is compared against the same trace
    base_pts = node_mesh(trace.base)
    inside = chart.in_closed_core(base_pts)
    offsets = chart.patch_offsets(base_pts[inside])
    probe = np.concatenate([offsets, np.zeros((offsets.shape[0], 1))], axis=-1)
    got = evaluate_batch(patch, probe)
    want = trace.values.reshape(-1, trace.nu)[inside]
    sup = float(np.max(np.linalg.norm(got - want, axis=-1), initial=0.0))
    if sup > tol:
        raise PreconditionError(
            f"patch {chart.index} bottom trace strays {sup:.3g} from the boundary "
            f"data on its core, tolerance {tol:.3g}"
        )
    return sup


def _conservative_membership(
    indicator: np.ndarray, axes: Sequence[Axis], pts: np.ndarray
) -> np.ndarray:
    """All containing-cell corners of each point are inside the set.

    Axes are periodic here (the base is a circle or torus).
    """
    ok = np.ones(pts.shape[0], dtype=bool)
    idx = []
    for a, axis in enumerate(axes):
        h = axis.spacing
        x = np.mod(pts[:, a], axis.length)
        i = np.floor(x / h).astype(np.int64)
        idx.append(np.clip(i, 0, axis.count - 1))
    for corner in range(1 << len(axes)):
        sel = []
        for a, axis in enumerate(axes):
            j = idx[a] + ((corner >> a) & 1)
            sel.append(np.mod(j, axis.count))
        ok &= indicator[tuple(sel)]
    return ok


def _chart_grid_points(resolution: int, dimension: int) -> tuple[np.ndarray, np.ndarray]:
    axis = np.linspace(-1.0, 1.0, resolution)
    if dimension == 1:
        pts = axis[:, None]
    else:
        xs, ys = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([xs.reshape(-1), ys.reshape(-1)], axis=-1)
    return pts, np.linalg.norm(pts, axis=-1)


def glue(
    covering: Covering,
    patches: Sequence[GridMap],
    trace: TraceMap,
    p: float = 2.0,
    tol: Optional[float] = None,
    cone_resolution: Optional[int] = None,
    check_resolution: Optional[int] = None,
    gap_policy: str = "abort",
    penalty: Optional[PenaltySpec] = None,
) -> tuple[GridMap, GlueReport]:
    """Glue patch extensions into one collar extension of the trace.

    Patches are maps over chart-core boxes cross the depth axis (plain
    collar maps for the single-chart covering).  The report carries the
    certified radius, cone size, measured trace error and covering-gap
    fraction of every step, the patch and glued energies (penalized when
    a penalty is given) and their ratio.
    """
    if gap_policy not in ("abort", "warn"):
        raise ParameterError(f"gap policy must be abort|warn, got {gap_policy!r}")
    if trace.base.kind != covering.base_kind:
        raise ParameterError(
            f"trace base {trace.base.kind!r} does not match covering base "
            f"{covering.base_kind!r}"
        )
    if len(patches) != covering.chart_count:
        raise ParameterError(
            f"covering has {covering.chart_count} charts, got {len(patches)} patches"
        )

    if covering.single_chart:
        return _glue_single(covering, patches[0], trace, p, tol, penalty)

    m = covering.dimension
    n_depth = patches[0].domain.axes[-1].count
    depth = patches[0].domain.axes[-1].length
    if tol is None:
        h_worst = max(
            [trace.base.max_spacing] + [patch.domain.max_spacing for patch in patches]
        )
        tol = 10.0 * h_worst
    for chart, patch in zip(covering.charts, patches):
        _check_patch(chart, patch, trace, n_depth, depth, tol)

    collar = _collar_domain(trace.base, n_depth, depth)
    base_pts = node_mesh(trace.base)
    n_base = base_pts.shape[0]
    depth_coords = collar.axes[-1].coordinates()

    # initial state: replicated trace as the (never trusted) placeholder
    values = np.repeat(
        trace.values.reshape(n_base, trace.nu)[:, None, :], n_depth, axis=1
    )

    check_res = check_resolution or _CHECK_RESOLUTION[m]
    check_axes = tuple(Axis(count=check_res, length=L, periodic=True) for L in covering.base_lengths)
    check_grids = np.meshgrid(*[ax.coordinates() for ax in check_axes], indexing="ij")
    check_pts = np.stack([g.reshape(-1) for g in check_grids], axis=-1)
    check_shape = tuple(ax.count for ax in check_axes)

    cone_res = cone_resolution or _CONE_RESOLUTION[m]
    chart_pts, chart_radii = _chart_grid_points(cone_res, m)
    in_ball_mask = chart_radii <= 1.0

    h_collar = np.zeros(n_base, dtype=bool)  # trusted region on the collar base grid
    h_check = np.zeros(check_pts.shape[0], dtype=bool)
    steps: list[GlueStep] = []
    trace_flat = trace.values.reshape(n_base, trace.nu)

    for i, (chart, patch) in enumerate(zip(covering.charts, patches)):
        later = covering.charts[i + 1 :]
        if i == 0:
            inside = chart.in_closed_core(base_pts)
            offs = chart.patch_offsets(base_pts[inside])
            probe = np.concatenate(
                [
                    np.repeat(offs, n_depth, axis=0),
                    np.tile(depth_coords, offs.shape[0])[:, None],
                ],
                axis=-1,
            )
            got = evaluate_batch(patch, probe).reshape(-1, n_depth, trace.nu)
            if trace.target.constrained:
                got = project_to_target(trace.target, got)
            values[inside] = got
            h_collar = np.array(chart.in_core(base_pts))
            h_check = np.array(chart.in_core(check_pts))
            cert = None
            f_set = None
            e_set = None
            radius = 1.0
            accepted_fraction = 0.0
        else:
            # closed leftover of this core vs the trusted region so far
            pts_back, _ = chart.from_disk(chart_pts[in_ball_mask])
            in_later = np.zeros(pts_back.shape[0], dtype=bool)
            for other in later:
                in_later |= other.in_core(pts_back)
            f_ind = np.zeros(chart_pts.shape[0], dtype=bool)
            f_ind[in_ball_mask] = ~in_later
            e_ind = np.zeros(chart_pts.shape[0], dtype=bool)
            e_ind[in_ball_mask] = _conservative_membership(
                h_check.reshape(check_shape), check_axes, pts_back
            )
            shape = (cone_res,) * m
            f_set = cone_mod.SampledSet(m, cone_res, True, f_ind.reshape(shape))
            e_set = cone_mod.SampledSet(m, cone_res, False, e_ind.reshape(shape))
            try:
                cert = cone_mod.find_cone(f_set, e_set)
            except PreconditionError as exc:
                raise GlueError(
                    f"internal: step {i + 1} leftover touches the chart sphere "
                    f"outside the trusted region ({exc})"
                ) from exc
            except ResolutionError as exc:
                raise ResolutionError(
                    f"step {i + 1} (chart {chart.index}): {exc}"
                ) from exc
            radius = cert.radius
            accepted_fraction = float(np.mean(cert.directions))

            values = _fold_chart_step(
                chart,
                patch,
                collar,
                values,
                base_pts,
                depth_coords,
                depth,
                radius,
                cert,
                trace,
            )

            # trusted region: certified ball and cone annulus of this chart,
            # plus whatever survives outside the closed core
            for pts, target in ((base_pts, "collar"), (check_pts, "check")):
                inside = chart.in_closed_core(pts)
                z = np.atleast_2d(chart.to_disk(pts[inside]))
                radii = np.linalg.norm(z, axis=-1)
                ball = radii < radius
                annulus = (radii >= radius) & cone_mod.accepts(cert, z)
                new_h = np.zeros(pts.shape[0], dtype=bool)
                new_h[inside] = ball | annulus
                if target == "collar":
                    h_collar = new_h | (h_collar & ~inside)
                else:
                    h_check = new_h | (h_check & ~inside)

        remaining = np.zeros(check_pts.shape[0], dtype=bool)
        for other in later:
            remaining |= other.in_core(check_pts)
        holes = ~(h_check | remaining)
        gap_fraction = float(np.mean(holes))
        if gap_fraction > 0.0 and gap_policy == "abort":
            raise GlueError(
                f"covering invariant fails after step {i + 1}: "
                f"{gap_fraction:.3%} of the base is uncovered"
            )

        trusted = h_collar
        if np.any(trusted):
            errs = np.linalg.norm(values[trusted, 0, :] - trace_flat[trusted], axis=-1)
            step_trace = float(np.max(errs))
        else:
            step_trace = 0.0
        steps.append(
            GlueStep(
                chart_index=chart.index,
                radius=radius,
                accepted_fraction=accepted_fraction,
                trace_sup_error=step_trace,
                gap_fraction=gap_fraction,
                certificate=cert,
                f_set=f_set,
                e_set=e_set,
            )
        )

    glued = GridMap(
        domain=collar,
        target=trace.target,
        values=values.reshape(collar.shape + (trace.nu,)),
        constraint_tol=max(trace.constraint_tol, 10.0 * collar.max_spacing),
    )
    patch_energies = tuple(_energy_value(patch, p, penalty) for patch in patches)
    total = float(sum(patch_energies))
    glued_energy = _energy_value(glued, p, penalty)
    degenerate = total <= 0.0
    ratio = float("nan") if degenerate else glued_energy / total
    report = GlueReport(
        steps=tuple(steps),
        patch_energies=patch_energies,
        patch_energy_total=total,
        glued_energy=glued_energy,
        ratio=ratio,
        trace_sup_error=max(step.trace_sup_error for step in steps),
        p=float(p),
        penalized=penalty is not None and penalty.kind != "none",
        degenerate=degenerate,
    )
    return glued, report


def _fold_chart_step(
    chart: Chart,
    patch: GridMap,
    collar: DomainSpec,
    values: np.ndarray,
    base_pts: np.ndarray,
    depth_coords: np.ndarray,
    depth: float,
    radius: float,
    cert: cone_mod.ConeCertificate,
    trace: TraceMap,
) -> np.ndarray:
    """One induction step: patch on the ball, fold across the cone annulus."""
    prev = GridMap(
        domain=collar,
        target=trace.target,
        values=values.reshape(collar.shape + (trace.nu,)),
        constraint_tol=max(trace.constraint_tol, 10.0 * collar.max_spacing),
    )
    n_depth = depth_coords.shape[0]
    out = values.copy()

    inside = chart.in_closed_core(base_pts)
    inside_idx = np.where(inside)[0]
    z = np.atleast_2d(chart.to_disk(base_pts[inside]))
    radii = np.linalg.norm(z, axis=-1)

    ball = radii < radius
    if np.any(ball):
        offs = chart.patch_offsets(base_pts[inside_idx[ball]])
        probe = np.concatenate(
            [
                np.repeat(offs, n_depth, axis=0),
                np.tile(depth_coords, offs.shape[0])[:, None],
            ],
            axis=-1,
        )
        got = evaluate_batch(patch, probe).reshape(-1, n_depth, trace.nu)
        if trace.target.constrained:
            got = project_to_target(trace.target, got)
        out[inside_idx[ball]] = got

    annulus = (radii >= radius) & cone_mod.accepts(cert, z)
    ann_idx = inside_idx[annulus]
    if ann_idx.size == 0:
        return out

    z_ann = z[annulus]
    r_ann = radii[annulus]
    omega = z_ann / np.maximum(r_ann, 1e-300)[:, None]
    # radial fold parameter: 0 at the outer rim |z|=1, 1 at the inner rim
    x = np.clip((1.0 - r_ann) / (1.0 - radius), 0.0, 1.0)
    n_ann = ann_idx.size
    tau = np.tile(depth_coords / depth, n_ann).reshape(n_ann, n_depth)
    xx = np.repeat(x, n_depth).reshape(n_ann, n_depth)

    from_prev = xx <= tau / 2.0
    reflected = ~from_prev & (xx <= tau)
    copied = ~from_prev & ~reflected

    result = np.empty((n_ann, n_depth, trace.nu))

    if np.any(from_prev):
        sel = np.where(from_prev.reshape(-1))[0]
        node = sel // n_depth
        a = 2.0 * xx.reshape(-1)[sel]
        t_val = (tau.reshape(-1)[sel] - a) * depth
        target_z = radial_fold_map(omega[node], a, 1.0 - radius)
        pts_back, _ = chart.from_disk(np.atleast_2d(target_z))
        probe = np.concatenate([pts_back, t_val[:, None]], axis=-1)
        result.reshape(-1, trace.nu)[sel] = evaluate_batch(prev, probe)

    if np.any(reflected):
        sel = np.where(reflected.reshape(-1))[0]
        node = sel // n_depth
        a = tau.reshape(-1)[sel]
        t_val = (2.0 * xx.reshape(-1)[sel] - a) * depth
        target_z = radial_fold_map(omega[node], a, 1.0 - radius)
        _, offs = chart.from_disk(np.atleast_2d(target_z))
        probe = np.concatenate([offs, t_val[:, None]], axis=-1)
        result.reshape(-1, trace.nu)[sel] = evaluate_batch(patch, probe)

    if np.any(copied):
        sel = np.where(copied.reshape(-1))[0]
        node = sel // n_depth
        t_val = tau.reshape(-1)[sel] * depth
        _, offs = chart.from_disk(np.atleast_2d(z_ann[node]))
        probe = np.concatenate([offs, t_val[:, None]], axis=-1)
        result.reshape(-1, trace.nu)[sel] = evaluate_batch(patch, probe)

    if trace.target.constrained:
        result = project_to_target(trace.target, result)
    out[ann_idx] = result
    return out


def _glue_single(
    covering: Covering,
    patch: GridMap,
    trace: TraceMap,
    p: float,
    tol: Optional[float],
    penalty: Optional[PenaltySpec],
) -> tuple[GridMap, GlueReport]:
    want = "cylinder" if covering.base_kind == "circle" else "torus_collar"
    if patch.domain.kind != want:
        raise ParameterError(
            f"the single-chart patch must be a {want} map, got {patch.domain.kind!r}"
        )
    if patch.domain.shape[:-1] != trace.base.shape:
        raise ParameterError("single-chart patch resolution does not match the trace")
    if patch.target != trace.target:
        raise ParameterError("single-chart patch target does not match the trace")
    if tol is None:
        tol = 10.0 * max(trace.base.max_spacing, patch.domain.max_spacing)
    bottom = extract_trace(patch, "bottom")
    sup = float(np.max(np.linalg.norm(bottom.values - trace.values, axis=-1), initial=0.0))
    if sup > tol:
        raise PreconditionError(
            f"single-chart patch bottom trace strays {sup:.3g} from the boundary "
            f"data, tolerance {tol:.3g}"
        )
    energy = _energy_value(patch, p, penalty)
    degenerate = energy <= 0.0
    step = GlueStep(
        chart_index=0,
        radius=1.0,
        accepted_fraction=0.0,
        trace_sup_error=sup,
        gap_fraction=0.0,
        certificate=None,
        f_set=None,
        e_set=None,
    )
    report = GlueReport(
        steps=(step,),
        patch_energies=(energy,),
        patch_energy_total=energy,
        glued_energy=energy,
        ratio=float("nan") if degenerate else 1.0,
        trace_sup_error=sup,
        p=float(p),
        penalized=penalty is not None and penalty.kind != "none",
        degenerate=degenerate,
    )
    return patch, report


def verify_glue(
    glued: GridMap,
    trace: TraceMap,
    covering: Covering,
    patches: Sequence[GridMap],
    p: float = 2.0,
    penalty: Optional[PenaltySpec] = None,
    report: Optional[GlueReport] = None,
) -> VerifyGlueReport:
    """Independent audit of a glued extension.

    Recomputes the bottom-trace discrepancy through the public face
    extraction, recomputes all energies from scratch, and re-checks every
    retained cone certificate with the cone module's verifier.
    """
    bottom = extract_trace(glued, "bottom")
    if bottom.values.shape != trace.values.shape:
        raise ParameterError("glued map resolution does not match the trace")
    sup = float(np.max(np.linalg.norm(bottom.values - trace.values, axis=-1), initial=0.0))
    patch_total = float(sum(_energy_value(patch, p, penalty) for patch in patches))
    glued_energy = _energy_value(glued, p, penalty)
    degenerate = patch_total <= 0.0
    ratio = float("nan") if degenerate else glued_energy / patch_total
    cone_ok: Optional[bool] = None
    if report is not None:
        checks = [
            cone_mod.verify_cone(step.f_set, step.e_set, step.certificate)
            for step in report.steps
            if step.certificate is not None
        ]
        cone_ok = all(checks) if checks else True
    return VerifyGlueReport(
        trace_sup_error=sup,
        glued_energy=glued_energy,
        patch_energy_total=patch_total,
        ratio=ratio,
        degenerate=degenerate,
        cone_checks_passed=cone_ok,
    )
