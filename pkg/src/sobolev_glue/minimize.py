"""Gradient-descent estimators for collar extension energies.

``minimize_extension`` runs projected gradient descent on the discrete
p-Dirichlet cell sum with the bottom row pinned to the boundary data,
``minimize_penalized`` drops the manifold projection and adds a pointwise
distance penalty, ``isobe_sweep`` tabulates penalized minima over a grid
of penalty widths and collar depths, and ``circle_lifting_oracle`` solves
the lifted scalar problem exactly for p = 2 circle-valued data.

The descent direction is the exact analytic gradient of the discrete
objective; the bottom row's gradient is zeroed and its values are copied
from the boundary data after every accepted step, so they stay
bit-identical throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from .domain import DomainSpec, cylinder, torus_collar
from .energy import (
    PenaltySpec,
    dirichlet_p_energy,
    no_penalty,
    node_volumes,
    penalized_energy,
    penalty_total,
)
from .errors import (
    LiftingError,
    OptimizationError,
    ParameterError,
    PreconditionError,
    SingularityError,
)
from .gridmap import GridMap, TraceMap
from .target import TargetSpec, distance_to_target, euclidean, project_to_target

_ARMIJO = 1e-4
_MAX_HALVINGS = 30


@dataclass(frozen=True)
class MinimizeConfig:
    """Optimizer knobs.

    ``step`` is the initial trial step; with the backtracking rule it is
    halved until sufficient decrease holds and regrows after acceptances.
    ``tol`` stops the loop once the relative energy decrease of an
    accepted step falls below it.  ``seed`` is reserved for randomized
    restarts; the default initializer (depth-replicated boundary data) is
    deterministic and ignores it.
    """

    p: float = 2.0
    max_iterations: int = 500
    step_rule: str = "backtracking"
    step: float = 1.0
    tol: float = 1e-8
    projection: str = "auto"
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.p > 1.0 and np.isfinite(self.p)):
            raise ParameterError(f"exponent p must satisfy p > 1, got {self.p}")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ParameterError(
                f"step rule must be fixed|backtracking, got {self.step_rule!r}"
            )
        if not (self.step > 0.0 and np.isfinite(self.step)):
            raise ParameterError(f"step must be positive, got {self.step}")
        if not (self.tol > 0.0):
            raise ParameterError(f"tolerance must be positive, got {self.tol}")
        if self.projection not in ("auto", "none"):
            raise ParameterError(
                f"projection mode must be auto|none, got {self.projection!r}"
            )


@dataclass(frozen=True)
class MinimizeResult:
    map: GridMap
    energy: float
    iterations: int
    energies: tuple[float, ...]
    converged: bool
    gradient_sup: float


@dataclass(frozen=True)
class SweepResult:
    """Penalized minima over (eps, depth) pairs with the two limit flags.

    ``bounded_in_eps``: at every depth the smallest-eps energy stays
    within a factor 2 of the largest-eps energy (plus an absolute floor),
    the sampled form of boundedness along eps -> 0.  ``depth_limit_vanishes``:
    the largest-over-eps energy at the smallest depth is at most 1.5 x
    (depth ratio) x the one at the largest depth, the sampled form of the
    small-depth limit vanishing.  Both statements are about the computed
    resolutions only.
    """

    triples: tuple[tuple[float, float, float], ...]
    bounded_in_eps: bool
    depth_limit_vanishes: bool


# ------------------------------------------------------------- objectives

def _cells(domain: DomainSpec) -> tuple[slice, ...]:
    return tuple(slice(0, ax.cell_count) for ax in domain.axes)


def _grad_sq_cells(values: np.ndarray, domain: DomainSpec) -> np.ndarray:
    cells = _cells(domain)
    total = None
    for a, axis in enumerate(domain.axes):
        diff = (np.roll(values, -1, axis=a) - values) / axis.spacing
        contrib = np.sum(diff[cells + (slice(None),)] ** 2, axis=-1)
        total = contrib if total is None else total + contrib
    return total


def _dirichlet_value(values: np.ndarray, domain: DomainSpec, p: float) -> float:
    cell_vol = float(np.prod([ax.spacing for ax in domain.axes]))
    return float(np.sum(_grad_sq_cells(values, domain) ** (p / 2.0)) * cell_vol)


def _dirichlet_gradient(values: np.ndarray, domain: DomainSpec, p: float) -> np.ndarray:
    cell_vol = float(np.prod([ax.spacing for ax in domain.axes]))
    cells = _cells(domain)
    s = _grad_sq_cells(values, domain)
    exponent = (p - 2.0) / 2.0
    if exponent < 0.0:
        # p < 2: the cell term is non-differentiable at zero gradient;
        # take the zero subgradient there
        w_cells = np.where(s > 0.0, s, 1.0) ** exponent
        w_cells = np.where(s > 0.0, w_cells, 0.0)
    else:
        w_cells = s**exponent
    w_full = np.zeros(domain.shape)
    w_full[cells] = w_cells
    grad = np.zeros_like(values)
    for a, axis in enumerate(domain.axes):
        diff = np.roll(values, -1, axis=a) - values
        t = w_full[..., None] * diff / axis.spacing**2
        grad += np.roll(t, 1, axis=a) - t
    return grad * (p * cell_vol)


def _penalty_value(
    values: np.ndarray, vols: np.ndarray, penalty: PenaltySpec
) -> float:
    if penalty.kind == "none":
        return 0.0
    return float(np.sum(penalty.evaluate(values) * vols))


def _penalty_gradient(
    values: np.ndarray, vols: np.ndarray, penalty: PenaltySpec
) -> np.ndarray:
    if penalty.kind == "none":
        return np.zeros_like(values)
    norms = np.linalg.norm(values, axis=-1)
    dist = np.abs(norms - 1.0)
    q = penalty.power
    mag = q * np.where(dist > 0.0, dist, 1.0) ** (q - 1.0)
    mag = np.where(dist > 0.0, mag, 0.0) / penalty.eps**q
    safe = np.where(norms > 0.0, norms, 1.0)
    direction = values * (np.sign(norms - 1.0) / safe)[..., None]
    direction[norms == 0.0] = 0.0
    return (vols * mag)[..., None] * direction


def dirichlet_gradient(m: GridMap, p: float) -> np.ndarray:
    """Exact gradient of the discrete p-Dirichlet energy in the node values."""
    if not (p > 1.0 and np.isfinite(p)):
        raise ParameterError(f"exponent p must satisfy p > 1, got {p}")
    return _dirichlet_gradient(np.asarray(m.values), m.domain, float(p))


# ---------------------------------------------------------------- descent

def _check_collar(u: TraceMap, domain: DomainSpec) -> None:
    if domain.kind not in ("cylinder", "torus_collar", "square", "box"):
        raise ParameterError(
            f"extension domains are collars over the trace base, got {domain.kind!r}"
        )
    if domain.shape[:-1] != u.base.shape:
        raise ParameterError(
            f"collar base resolution {domain.shape[:-1]} does not match the "
            f"trace resolution {u.base.shape}"
        )
    for a in range(u.base.ndim):
        if abs(domain.axes[a].length - u.base.axes[a].length) > 1e-12:
            raise ParameterError("collar base lengths do not match the trace")


def _descend(
    u: TraceMap,
    domain: DomainSpec,
    target: TargetSpec,
    cfg: MinimizeConfig,
    penalty: PenaltySpec,
    project: bool,
) -> MinimizeResult:
    _check_collar(u, domain)
    p = cfg.p
    n_depth = domain.shape[-1]
    bottom = np.array(u.values)
    values = np.repeat(bottom[..., None, :], n_depth, axis=-2)
    vols = node_volumes(domain)

    def objective(v: np.ndarray) -> float:
        return _dirichlet_value(v, domain, p) + _penalty_value(v, vols, penalty)

    def gradient(v: np.ndarray) -> np.ndarray:
        g = _dirichlet_gradient(v, domain, p) + _penalty_gradient(v, vols, penalty)
        g[..., 0, :] = 0.0  # bottom row pinned
        return g

    energy = objective(values)
    if not np.isfinite(energy):
        raise OptimizationError("initial energy is not finite")
    energies = [energy]
    trial = cfg.step
    converged = False
    grad_sup = float("inf")
    iterations = 0

    for it in range(cfg.max_iterations):
        grad = gradient(values)
        if not np.all(np.isfinite(grad)):
            raise OptimizationError(f"gradient not finite at iteration {it}")
        grad_sup = float(np.max(np.abs(grad)))
        if grad_sup == 0.0:
            converged = True
            break

        accepted = False
        t = trial
        for _ in range(_MAX_HALVINGS):
            candidate = values - t * grad
            if project:
                try:
                    candidate = project_to_target(target, candidate)
                except SingularityError:
                    t *= 0.5
                    continue
                candidate[..., 0, :] = bottom
            cand_energy = objective(candidate)
            moved_sq = float(np.sum((candidate - values) ** 2))
            if np.isfinite(cand_energy) and (
                cand_energy <= energy - _ARMIJO * moved_sq / t
            ):
                accepted = True
                break
            if cfg.step_rule == "fixed":
                break
            t *= 0.5

        if not accepted:
            if cfg.step_rule == "fixed":
                raise OptimizationError(
                    f"energy increased at iteration {it} under the fixed step "
                    f"(energy {energy:.6g}, gradient sup {grad_sup:.3g}, "
                    f"step {t:.3g})"
                )
            # backtracking shrank the step to rounding scale without any
            # decrease along the negative gradient: stationary here
            converged = True
            break

        drop = energy - cand_energy
        values = candidate
        values[..., 0, :] = bottom
        energy = cand_energy
        energies.append(energy)
        iterations = it + 1
        trial = min(t * 2.0, cfg.step * 1024.0)
        if drop <= cfg.tol * max(1.0, abs(energy)):
            converged = True
            break

    final = GridMap(
        domain=domain,
        target=target if project else euclidean(u.nu),
        values=values,
        constraint_tol=max(u.constraint_tol, 10.0 * domain.max_spacing),
    )
    if penalty.kind == "none":
        reported = dirichlet_p_energy(final, p).value
    else:
        reported = penalized_energy(final, p, penalty).value
    return MinimizeResult(
        map=final,
        energy=reported,
        iterations=iterations,
        energies=tuple(energies),
        converged=converged,
        gradient_sup=grad_sup,
    )


def minimize_extension_detailed(
    u: TraceMap, domain: DomainSpec, target: TargetSpec, cfg: MinimizeConfig
) -> MinimizeResult:
    if u.target != target:
        raise ParameterError("trace target does not match the requested target")
    if target.constrained:
        worst = float(np.max(distance_to_target(target, u.values)))
        if worst > u.constraint_tol:
            raise PreconditionError(
                f"boundary data strays {worst:.3g} from the target"
            )
    project = target.constrained and cfg.projection == "auto"
    return _descend(u, domain, target, cfg, no_penalty(), project)


def minimize_extension(
    u: TraceMap, domain: DomainSpec, target: TargetSpec, cfg: MinimizeConfig
) -> tuple[GridMap, float]:
    """Estimate the constrained extension energy over a collar domain.

    The bottom row of the result carries ``u`` bit-identically; accepted
    iterations never increase the objective.
    """
    res = minimize_extension_detailed(u, domain, target, cfg)
    return res.map, res.energy


def minimize_penalized_detailed(
    u: TraceMap, penalty: PenaltySpec, domain: DomainSpec, cfg: MinimizeConfig
) -> MinimizeResult:
    if penalty.kind == "none":
        raise ParameterError("penalized descent needs a non-trivial penalty")
    return _descend(u, domain, euclidean(u.nu), cfg, penalty, project=False)


def minimize_penalized(
    u: TraceMap, penalty: PenaltySpec, domain: DomainSpec, cfg: MinimizeConfig
) -> tuple[GridMap, float]:
    """Unconstrained descent on Dirichlet-plus-penalty with pinned bottom."""
    res = minimize_penalized_detailed(u, penalty, domain, cfg)
    return res.map, res.energy


# ------------------------------------------------------------------ sweep

def _collar_over(base: DomainSpec, n_depth: int, depth: float) -> DomainSpec:
    if base.kind == "circle":
        return cylinder(base.shape[0], n_depth, depth)
    if base.kind == "torus":
        return torus_collar(base.shape[0], base.shape[1], n_depth, depth)
    raise ParameterError(f"sweep bases are circles or tori, got {base.kind!r}")


def isobe_sweep(
    u: TraceMap,
    p: float,
    eps_list: Sequence[float],
    depth_list: Sequence[float],
    cfg: MinimizeConfig,
    n_depth: Optional[int] = None,
) -> SweepResult:
    """Tabulate penalized minima over penalty widths and collar depths."""
    if len(eps_list) == 0 or len(depth_list) == 0:
        raise ParameterError("sweep lists must be nonempty")
    if any(e <= 0 for e in eps_list) or any(L <= 0 for L in depth_list):
        raise ParameterError("sweep parameters must be positive")
    if not u.target.constrained:
        raise ParameterError("the sweep penalty needs a constrained reference target")
    cfg = MinimizeConfig(
        p=p,
        max_iterations=cfg.max_iterations,
        step_rule=cfg.step_rule,
        step=cfg.step,
        tol=cfg.tol,
        projection=cfg.projection,
        seed=cfg.seed,
    )
    h_base = u.base.max_spacing
    triples: list[tuple[float, float, float]] = []
    for depth in depth_list:
        nd = n_depth or max(8, min(64, int(round(depth / h_base)) + 1))
        domain = _collar_over(u.base, nd, float(depth))
        for eps in eps_list:
            penalty = PenaltySpec(
                kind="distance_power", eps=float(eps), power=p, reference=u.target
            )
            try:
                _, energy = minimize_penalized(u, penalty, domain, cfg)
            except OptimizationError as exc:
                raise OptimizationError(
                    f"sweep point eps={eps} depth={depth}: {exc}"
                ) from exc
            triples.append((float(eps), float(depth), energy))

    floor = 1e-9
    by_depth: dict[float, dict[float, float]] = {}
    for eps, depth, energy in triples:
        by_depth.setdefault(depth, {})[eps] = energy
    bounded = True
    for depth, row in by_depth.items():
        top = row[max(row)]
        small = row[min(row)]
        bounded &= small <= max(2.0 * top, floor)
    depths = sorted(by_depth)
    d_min, d_max = depths[0], depths[-1]
    sup_min = max(by_depth[d_min].values())
    sup_max = max(by_depth[d_max].values())
    vanishes = sup_min <= max(1.5 * (d_min / d_max) * sup_max, floor)
    return SweepResult(
        triples=tuple(triples),
        bounded_in_eps=bounded,
        depth_limit_vanishes=vanishes,
    )


# ---------------------------------------------------------- lifting oracle

def circle_lifting_oracle(
    u: TraceMap, domain: DomainSpec
) -> tuple[GridMap, float]:
    """Exact p = 2 extension energy of circle-valued data via its lifting.

    Unwraps the boundary angles (adjacent jumps must stay below pi),
    splits off the winding part, solves the scalar harmonic problem with
    pinned bottom and free top by a sparse direct solve, and returns the
    wrapped harmonic map with the exact discrete energy of its lifting.
    """
    if u.base.kind != "circle":
        raise ParameterError(f"the lifting oracle needs a circle base, got {u.base.kind!r}")
    if domain.kind != "cylinder":
        raise ParameterError(f"the lifting oracle needs a cylinder collar, got {domain.kind!r}")
    if u.nu != 2 or not u.target.constrained:
        raise ParameterError("the lifting oracle needs circle-valued data")
    _check_collar(u, domain)

    n = u.base.shape[0]
    n_t = domain.shape[-1]
    h_theta = domain.axes[0].spacing
    h_t = domain.axes[1].spacing

    vals = np.asarray(u.values)
    norms = np.linalg.norm(vals, axis=-1)
    if np.any(norms == 0.0):
        raise LiftingError("boundary data vanishes at a node; no angle exists")
    raw = np.arctan2(vals[:, 1], vals[:, 0])
    jumps = np.mod(np.diff(raw, append=raw[0]) + math.pi, 2.0 * math.pi) - math.pi
    if np.any(np.abs(jumps) >= math.pi - 1e-9):
        raise LiftingError("adjacent boundary angles jump by pi or more")
    winding = float(np.sum(jumps)) / (2.0 * math.pi)
    degree = int(round(winding))
    if abs(winding - degree) > 1e-6:
        raise LiftingError(f"winding number {winding} is not an integer")

    phi = raw[0] + np.concatenate([[0.0], np.cumsum(jumps[:-1])])
    theta = u.base.axes[0].coordinates()
    psi_bottom = phi - degree * theta

    # scalar harmonic extension of psi: quadratic form over grid edges,
    # theta edges only below the top row (cells anchor at their low corner)
    w_theta = h_t / h_theta
    w_t = h_theta / h_t
    n_free = n * (n_t - 1)

    def free_index(i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return (j - 1) * n + i

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    rhs = np.zeros(n_free)

    def add_edge(ia, ja, ib, jb, w) -> None:
        a_free = ja >= 1
        b_free = jb >= 1
        idx_a = free_index(ia, ja)
        idx_b = free_index(ib, jb)
        both = a_free & b_free
        rows.append(idx_a[a_free])
        cols.append(idx_a[a_free])
        data.append(np.full(int(np.sum(a_free)), w))
        rows.append(idx_b[b_free])
        cols.append(idx_b[b_free])
        data.append(np.full(int(np.sum(b_free)), w))
        rows.append(idx_a[both])
        cols.append(idx_b[both])
        data.append(np.full(int(np.sum(both)), -w))
        rows.append(idx_b[both])
        cols.append(idx_a[both])
        data.append(np.full(int(np.sum(both)), -w))
        only_a = a_free & ~b_free
        rhs[idx_a[only_a]] += w * psi_bottom[ib[only_a]]
        only_b = b_free & ~a_free
        rhs[idx_b[only_b]] += w * psi_bottom[ia[only_b]]

    ii = np.arange(n)
    for j in range(n_t - 1):
        jj = np.full(n, j)
        add_edge(ii, jj, np.mod(ii + 1, n), jj, w_theta)  # theta edge in row j
        add_edge(ii, jj, ii, jj + 1, w_t)  # depth edge from row j to j+1

    matrix = coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_free, n_free),
    ).tocsr()
    solution = spsolve(matrix, rhs)
    psi = np.empty((n, n_t))
    psi[:, 0] = psi_bottom
    psi[:, 1:] = solution.reshape(n_t - 1, n).T

    # exact discrete energy of the lifting deg*theta + psi; the seam
    # difference carries the winding increment deg * h_theta
    d_theta = (np.roll(psi, -1, axis=0) - psi) + degree * h_theta
    d_t = psi[:, 1:] - psi[:, :-1]
    energy = float(
        np.sum((d_theta[:, : n_t - 1] / h_theta) ** 2) * h_theta * h_t
        + np.sum((d_t / h_t) ** 2) * h_theta * h_t
    )

    full_phi = degree * theta[:, None] + psi
    wrapped = np.stack([np.cos(full_phi), np.sin(full_phi)], axis=-1)
    lifted = GridMap(domain=domain, target=u.target, values=wrapped)
    return lifted, energy
