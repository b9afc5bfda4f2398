"""The primary acceptance suite: ten pinned, self-verifying checks.

Each criterion function runs one check end to end and returns a
CriterionResult with a pass flag and a short detail string; these are the
checks the command-line ``accept`` subcommand and the acceptance test
module drive.  Expected values are closed forms computed independently
inside each criterion (eigenvalue oracles, winding bounds, exact
integrands), never copied from the code under test.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cone as cone_mod
from .covering import build_covering, glue, replicate_trace_patch, verify_glue
from .domain import circle, cylinder, interval, square
from .energy import PenaltySpec, dirichlet_p_energy, gagliardo_energy
from .folding import FIRST_WEDGE_MATRIX, REFLECTED_WEDGE_MATRIX, fold
from .gridmap import GridMap, TraceMap
from .minimize import (
    MinimizeConfig,
    circle_lifting_oracle,
    dirichlet_gradient,
    isobe_sweep,
    minimize_extension,
    minimize_extension_detailed,
)
from .target import circle as circle_target, euclidean


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    details: str
    duration: float


def format_line(result: CriterionResult) -> str:
    status = "PASS" if result.passed else "FAIL"
    return f"{status} {result.name}: {result.details} ({result.duration:.1f}s)"


def _timed(
    name: str, check: Callable[[], tuple[bool, str]]
) -> CriterionResult:
    start = time.monotonic()
    passed, details = check()
    return CriterionResult(
        name=name, passed=passed, details=details, duration=time.monotonic() - start
    )


# ----------------------------------------------------------- criterion 01

def criterion_01_pair_sum_exactness() -> CriterionResult:
    """u(x) = x on the unit interval has pair-sum energy exactly 1."""

    def check() -> tuple[bool, str]:
        base = interval(512)
        x = base.axes[0].coordinates()
        u = TraceMap(base=base, target=euclidean(1), values=x[:, None])
        value = gagliardo_energy(u, 0.5, 2.0).value
        err = abs(value - 1.0)
        return err <= 1e-3, f"value={value:.17g} err={err:.3g} tol=1e-3"

    return _timed("01_pair_sum_exactness", check)


# ------------------------------------------------- criteria 02, 03 (folds)

def _smooth_field(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random low-frequency field on the unit square grid, two components."""
    xs = np.linspace(0.0, 1.0, n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    out = np.zeros((n, n, 2))
    for comp in range(2):
        field = np.zeros((n, n))
        for kx in range(3):
            for ky in range(3):
                amp = rng.normal() / (1.0 + kx * kx + ky * ky)
                phase = rng.uniform(0.0, 2.0 * math.pi)
                field += amp * np.cos(2.0 * math.pi * (kx * gx + ky * gy) + phase)
        out[..., comp] = field
    return out


def _matched_pair(rng: np.random.Generator, n: int) -> tuple[GridMap, GridMap]:
    dom = square(n, n)
    v0 = _smooth_field(rng, n)
    v1 = _smooth_field(rng, n)
    # shift the second field so both bottom rows agree exactly; the shift
    # is depth-constant, so smoothness is preserved
    v1 = v1 - v1[:, 0, None, :] + v0[:, 0, None, :]
    u0 = GridMap(domain=dom, target=euclidean(2), values=v0)
    u1 = GridMap(domain=dom, target=euclidean(2), values=v1)
    return u0, u1


def criterion_02_fold_trace_contract() -> CriterionResult:
    """Fifty random matched pairs fold with all trace errors below 10 h."""

    def check() -> tuple[bool, str]:
        rng = np.random.default_rng(0)
        n = 129
        h = 1.0 / (n - 1)
        worst = 0.0
        for _ in range(50):
            u0, u1 = _matched_pair(rng, n)
            _, report = fold(u0, u1)
            worst = max(
                worst,
                report.trace_bottom_error,
                report.trace_left_error,
                report.trace_right_error,
            )
        return worst <= 10.0 * h, f"worst_trace_error={worst:.3g} tol={10.0 * h:.3g}"

    return _timed("02_fold_trace_contract", check)


def criterion_03_fold_energy_constant() -> CriterionResult:
    """Fold energy ratios stay under the singular-value bound for three p."""

    def check() -> tuple[bool, str]:
        # independent oracle: largest eigenvalues of J^T J
        s0_sq = float(np.max(np.linalg.eigvalsh(FIRST_WEDGE_MATRIX.T @ FIRST_WEDGE_MATRIX)))
        ss_sq = float(
            np.max(np.linalg.eigvalsh(REFLECTED_WEDGE_MATRIX.T @ REFLECTED_WEDGE_MATRIX))
        )
        if abs(s0_sq - (9.0 + math.sqrt(65.0)) / 2.0) > 1e-12:
            return False, "eigenvalue oracle disagrees with the first wedge constant"
        if abs(ss_sq - (6.0 + math.sqrt(20.0)) / 2.0) > 1e-12:
            return False, "eigenvalue oracle disagrees with the reflected wedge constant"
        n = 129
        margins = []
        for p in (1.5, 2.0, 3.0):
            bound = max(s0_sq ** (p / 2.0), ss_sq ** (p / 2.0)) / 2.0 + 1.0
            rng_p = np.random.default_rng(0)
            worst = 0.0
            for _ in range(50):
                u0, u1 = _matched_pair(rng_p, n)
                folded, _ = fold(u0, u1, p=p)
                e_out = dirichlet_p_energy(folded, p).value
                e_in = (
                    dirichlet_p_energy(u0, p).value + dirichlet_p_energy(u1, p).value
                )
                worst = max(worst, e_out / e_in)
            margins.append((p, worst, bound))
            if worst > bound:
                return False, f"p={p}: ratio {worst:.4g} exceeds bound {bound:.4g}"
        detail = " ".join(f"p={p}:{w:.3g}<={b:.3g}" for p, w, b in margins)
        return True, detail

    return _timed("03_fold_energy_constant", check)


# ----------------------------------------------------------- criterion 04

def _random_cone_instance(
    rng: np.random.Generator, resolution: int
) -> tuple[cone_mod.SampledSet, cone_mod.SampledSet]:
    """Random wedge-union F with a fattened open G satisfying the hypothesis."""
    wedges = rng.integers(1, 4)
    centers = rng.uniform(0.0, 2.0 * math.pi, size=wedges)
    widths = rng.uniform(0.15, 0.5, size=wedges)
    rho = rng.uniform(0.1, 0.5)
    delta = 0.06

    axis = np.linspace(-1.0, 1.0, resolution)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    radii = np.hypot(xs, ys)
    angles = np.arctan2(ys, xs)

    def ang_dist(center: float) -> np.ndarray:
        d = np.abs(np.mod(angles - center + math.pi, 2.0 * math.pi) - math.pi)
        return d

    in_wedge = np.zeros_like(radii, dtype=bool)
    in_fat = np.zeros_like(radii, dtype=bool)
    for c, w in zip(centers, widths):
        in_wedge |= ang_dist(float(c)) <= w
        in_fat |= ang_dist(float(c)) <= w + delta
    f_ind = (radii <= rho) | ((radii <= 1.0) & in_wedge)
    g_ind = (radii < rho + 0.05) | in_fat
    f = cone_mod.SampledSet(2, resolution, True, f_ind)
    g = cone_mod.SampledSet(2, resolution, False, g_ind)
    return f, g


def criterion_04_cone_capture() -> CriterionResult:
    """100 random hypothesis-satisfying instances certify and re-verify."""

    def check() -> tuple[bool, str]:
        rng = np.random.default_rng(0)
        resolution = 256
        radii = []
        for k in range(100):
            f, g = _random_cone_instance(rng, resolution)
            cert = cone_mod.find_cone(f, g)
            if not cert.verified:
                return False, f"instance {k}: certificate failed verification"
            if not cone_mod.verify_cone(f, g, cert):
                return False, f"instance {k}: independent re-verification failed"
            radii.append(cert.radius)
        # segment toward e1 inside the open half-space x > 1/2
        axis = np.linspace(-1.0, 1.0, resolution)
        xs, ys = np.meshgrid(axis, axis, indexing="ij")
        h = 2.0 / (resolution - 1)
        # rounding slack: the grid has no y = 0 row at even resolution
        seg = (np.abs(ys) <= h / 2.0 + 1e-9) & (xs >= 0.0) & (np.hypot(xs, ys) <= 1.0)
        half = xs > 0.5
        f = cone_mod.SampledSet(2, resolution, True, seg)
        g = cone_mod.SampledSet(2, resolution, False, half)
        cert = cone_mod.find_cone(f, g)
        if not (cert.verified and cert.radius >= 0.6):
            return False, f"segment example: r={cert.radius} verified={cert.verified}"
        return True, (
            f"100 instances certified, min_r={min(radii):.4g}, "
            f"segment r={cert.radius:.4g}>=0.6"
        )

    return _timed("04_cone_capture", check)


# ----------------------------------------------------------- criterion 05

def _degree_one_trace(n: int) -> TraceMap:
    base = circle(n)
    theta = base.axes[0].coordinates()
    values = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return TraceMap(base=base, target=circle_target(), values=values)


def criterion_05_circle_covering_glue() -> CriterionResult:
    """Circle glue for two and three charts: traces tight, ratio stable."""

    def check() -> tuple[bool, str]:
        details = []
        for k in (2, 3):
            ratios = []
            for n in (128, 256):
                u = _degree_one_trace(n)
                cov = build_covering(u.base, k)
                patches = [
                    replicate_trace_patch(u, c, max(16, n // 8), depth=1.0)
                    for c in cov.charts
                ]
                glued, report = glue(cov, patches, u, p=2.0)
                audit = verify_glue(glued, u, cov, patches, p=2.0, report=report)
                h = u.base.max_spacing
                if audit.trace_sup_error > 10.0 * h:
                    return False, (
                        f"K={k} n={n}: trace error {audit.trace_sup_error:.3g} "
                        f"exceeds {10.0 * h:.3g}"
                    )
                if audit.cone_checks_passed is False:
                    return False, f"K={k} n={n}: a cone certificate failed re-verification"
                ratios.append(report.ratio)
            drift = abs(ratios[1] - ratios[0]) / ratios[0]
            if drift > 0.20:
                return False, f"K={k}: ratio drift {drift:.3g} exceeds 20%"
            details.append(f"K={k}:ratio={ratios[0]:.4g}->{ratios[1]:.4g}")
        return True, " ".join(details)

    return _timed("05_circle_covering_glue", check)


# ----------------------------------------------------------- criterion 06

def criterion_06_extension_closed_form() -> CriterionResult:
    """Identity and degree-2 circle traces: 2 pi and 8 pi within 5%."""

    def check() -> tuple[bool, str]:
        n, n_depth = 128, 64
        base = circle(n)
        theta = base.axes[0].coordinates()
        dom = cylinder(n, n_depth, 1.0)
        cfg = MinimizeConfig(p=2.0, max_iterations=400, tol=1e-10)

        ident = TraceMap(
            base=base,
            target=circle_target(),
            values=np.stack([np.cos(theta), np.sin(theta)], axis=-1),
        )
        _, e_ident = minimize_extension(ident, dom, circle_target(), cfg)
        _, oracle_ident = circle_lifting_oracle(ident, dom)
        two_pi = 2.0 * math.pi
        if abs(e_ident - two_pi) > 0.05 * two_pi:
            return False, f"identity energy {e_ident:.6g} not within 5% of 2pi"
        if abs(e_ident - oracle_ident) > 0.01 * oracle_ident:
            return False, (
                f"identity energy {e_ident:.6g} disagrees with oracle "
                f"{oracle_ident:.6g} beyond 1%"
            )

        deg2 = TraceMap(
            base=base,
            target=circle_target(),
            values=np.stack([np.cos(2 * theta), np.sin(2 * theta)], axis=-1),
        )
        _, e_deg2 = minimize_extension(deg2, dom, circle_target(), cfg)
        eight_pi = 8.0 * math.pi
        if abs(e_deg2 - eight_pi) > 0.05 * eight_pi:
            return False, f"degree-2 energy {e_deg2:.6g} not within 5% of 8pi"
        return True, (
            f"identity={e_ident:.6g}~2pi oracle={oracle_ident:.6g} "
            f"degree2={e_deg2:.6g}~8pi"
        )

    return _timed("06_extension_closed_form", check)


# ----------------------------------------------------------- criterion 07

def criterion_07_penalized_glue_constant() -> CriterionResult:
    """Penalized glue constant at eps 0.25 stays stable under refinement."""

    def check() -> tuple[bool, str]:
        penalty = PenaltySpec(
            kind="distance_power", eps=0.25, power=2.0, reference=circle_target()
        )
        ratios = []
        for n in (128, 256):
            base = circle(n)
            theta = base.axes[0].coordinates()
            u = TraceMap(
                base=base,
                target=euclidean(2),
                values=np.stack([np.cos(theta), np.sin(theta)], axis=-1),
            )
            cov = build_covering(base, 2)
            patches = [
                replicate_trace_patch(u, c, max(16, n // 8), depth=1.0)
                for c in cov.charts
            ]
            glued, report = glue(cov, patches, u, p=2.0, penalty=penalty)
            if report.degenerate:
                return False, f"n={n}: degenerate patch energies"
            ratios.append(report.ratio)
        drift = abs(ratios[1] - ratios[0]) / ratios[0]
        if drift > 0.20:
            return False, f"measured constant drift {drift:.3g} exceeds 20%"
        return True, f"measured_C={ratios[0]:.4g}->{ratios[1]:.4g} drift={drift:.3g}"

    return _timed("07_penalized_glue_constant", check)


# ----------------------------------------------------------- criterion 08

def criterion_08_isobe_boundedness() -> CriterionResult:
    """Identity-trace sweep stays below 1.1 x 2 pi for all eps."""

    def check() -> tuple[bool, str]:
        n = 64
        base = circle(n)
        theta = base.axes[0].coordinates()
        u = TraceMap(
            base=base,
            target=circle_target(),
            values=np.stack([np.cos(theta), np.sin(theta)], axis=-1),
        )
        cfg = MinimizeConfig(p=2.0, max_iterations=400, tol=1e-9)
        sweep = isobe_sweep(u, 2.0, [0.5, 0.25, 0.125], [1.0, 0.5], cfg)
        bound = 1.1 * 2.0 * math.pi
        worst = max(energy for _, _, energy in sweep.triples)
        if worst > bound:
            return False, f"energy {worst:.6g} exceeds the competitor bound {bound:.6g}"
        if not sweep.bounded_in_eps:
            return False, "bounded-in-eps flag is false"
        return True, f"max_energy={worst:.6g}<= {bound:.6g} bounded_in_eps=true"

    return _timed("08_isobe_boundedness", check)


# ----------------------------------------------------------- criterion 09

def _degree_zero_trace(rng: np.random.Generator, n: int) -> TraceMap:
    base = circle(n)
    theta = base.axes[0].coordinates()
    psi = np.zeros(n)
    for k in range(1, 5):
        psi += (rng.normal() * np.cos(k * theta) + rng.normal() * np.sin(k * theta)) / (
            k * k
        )
    values = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
    return TraceMap(base=base, target=circle_target(), values=values)


def criterion_09_trace_inequality_echo() -> CriterionResult:
    """Pair-sum energies bounded by a stable multiple of extension energies."""

    def check() -> tuple[bool, str]:
        cfg = MinimizeConfig(p=2.0, max_iterations=300, tol=1e-9)
        constants = []
        for n in (64, 128):
            rng = np.random.default_rng(0)
            worst = 0.0
            for _ in range(10):
                u = _degree_zero_trace(rng, n)
                gag = gagliardo_energy(u, 0.5, 2.0).value
                dom = cylinder(n, max(16, n // 4), 1.0)
                _, ext = minimize_extension(u, dom, circle_target(), cfg)
                if ext <= 0.0:
                    return False, f"n={n}: degenerate extension energy"
                worst = max(worst, gag / ext)
            constants.append(worst)
        drift = abs(constants[1] - constants[0]) / constants[0]
        if drift > 0.30:
            return False, f"measured constant drift {drift:.3g} exceeds 30%"
        return True, (
            f"measured_C={constants[0]:.4g}->{constants[1]:.4g} drift={drift:.3g}"
        )

    return _timed("09_trace_inequality_echo", check)


# ----------------------------------------------------------- criterion 10

def criterion_10_gradient_check() -> CriterionResult:
    """Analytic gradient matches high-order central differences to 1e-5."""

    def check() -> tuple[bool, str]:
        rng = np.random.default_rng(7)
        n = 33
        dom = cylinder(n, n, 1.0)
        values = rng.normal(size=(n, n, 2))

        def energy_of(v: np.ndarray, p: float) -> float:
            return dirichlet_p_energy(
                GridMap(domain=dom, target=euclidean(2), values=v), p
            ).value

        worst_all = 0.0
        for p in (1.5, 2.0, 3.0):
            grad = dirichlet_gradient(
                GridMap(domain=dom, target=euclidean(2), values=values), p
            )
            worst = 0.0
            for _ in range(100):
                i = int(rng.integers(n))
                j = int(rng.integers(n))
                k = int(rng.integers(2))
                d = 1e-4
                samples = {}
                for mult in (-2, -1, 1, 2):
                    v = np.array(values)
                    v[i, j, k] += mult * d
                    samples[mult] = energy_of(v, p)
                fd = (
                    8.0 * (samples[1] - samples[-1]) - (samples[2] - samples[-2])
                ) / (12.0 * d)
                scale = max(abs(fd), abs(grad[i, j, k]), 1e-12)
                worst = max(worst, abs(fd - grad[i, j, k]) / scale)
            if worst > 1e-5:
                return False, f"p={p}: relative error {worst:.3g} exceeds 1e-5"
            worst_all = max(worst_all, worst)
        return True, f"worst_rel_err={worst_all:.3g}<=1e-5 over p in {{1.5,2,3}}"

    return _timed("10_gradient_check", check)


ALL_CRITERIA: tuple[Callable[[], CriterionResult], ...] = (
    criterion_01_pair_sum_exactness,
    criterion_02_fold_trace_contract,
    criterion_03_fold_energy_constant,
    criterion_04_cone_capture,
    criterion_05_circle_covering_glue,
    criterion_06_extension_closed_form,
    criterion_07_penalized_glue_constant,
    criterion_08_isobe_boundedness,
    criterion_09_trace_inequality_echo,
    criterion_10_gradient_check,
)


def run_primary_suite() -> list[CriterionResult]:
    return [criterion() for criterion in ALL_CRITERIA]
