"""Energy quadratures against independent oracles.

The fractional seminorm is cross-checked two ways: against a direct
dense double loop coded here from scratch, and against values exact by
construction (an affine map on the interval, where kernel and weights
collapse to the square of the total node weight).
"""

import numpy as np
import pytest

from sobolev_glue import domain as dom
from sobolev_glue import energy as en
from sobolev_glue import gridmap as gm
from sobolev_glue import target as tg
from sobolev_glue.errors import ParameterError


def _interval_trace(n, fn, nu=1):
    base = dom.interval(n)
    x = base.axes[0].coordinates()
    vals = np.asarray(fn(x))
    if vals.ndim == 1:
        vals = vals[:, None]
    return gm.TraceMap(base=base, target=tg.euclidean(nu), values=vals)


def _circle_trace(n, fn, target=None, tol=-1.0):
    base = dom.circle(n)
    t = base.axes[0].coordinates()
    vals = np.asarray(fn(t))
    return gm.TraceMap(
        base=base,
        target=target if target is not None else tg.euclidean(vals.shape[-1]),
        values=vals,
        constraint_tol=tol,
    )


def _dense_gagliardo(u, s, p):
    """Brute force pair sum, including the same-node completion cells.

    Written independently of the library internals: an explicit per-node
    loop with trapezoid weights and min-image distances, plus the
    documented same-node rule (one-sided difference quotient
    |du|^p / h^(sp+d) averaged over axes, reversed at interval ends,
    weighted by the squared node weight).
    """
    base = u.domain
    pts = gm.node_mesh(base)
    n = pts.shape[0]
    vals = u.values.reshape(n, -1)
    w = np.ones(n)
    for a, axis in enumerate(base.axes):
        wa = np.full(axis.count, axis.spacing)
        if not axis.periodic:
            wa[0] *= 0.5
            wa[-1] *= 0.5
        reps_before = int(np.prod([ax.count for ax in base.axes[:a]]) or 1)
        reps_after = int(np.prod([ax.count for ax in base.axes[a + 1 :]]) or 1)
        w *= np.tile(np.repeat(wa, reps_after), reps_before)
    d = pts.shape[1]
    expo = s * p + d
    total = 0.0
    for i in range(n):
        diff = pts - pts[i]
        for a, axis in enumerate(base.axes):
            if axis.periodic:
                diff[:, a] = (
                    np.mod(diff[:, a] + axis.length / 2.0, axis.length)
                    - axis.length / 2.0
                )
        dist = np.linalg.norm(diff, axis=1)
        dv = np.linalg.norm(vals - vals[i], axis=1)
        mask = dist > 0.0
        total += w[i] * np.sum(w[mask] * dv[mask] ** p / dist[mask] ** expo)
    shape = base.shape
    for flat in range(n):
        multi = np.unravel_index(flat, shape)
        quotients = []
        for a, axis in enumerate(base.axes):
            j = list(multi)
            if axis.periodic:
                j[a] = (multi[a] + 1) % axis.count
            elif multi[a] == axis.count - 1:
                j[a] = multi[a] - 1
            else:
                j[a] = multi[a] + 1
            jump = np.linalg.norm(u.values[tuple(j)] - u.values[multi])
            quotients.append(jump**p / axis.spacing**expo)
        total += w[flat] ** 2 * float(np.mean(quotients))
    return total


def test_affine_interval_map_is_exact():
    # u(x) = x with s = 1/2, p = 2 in one dimension: every pair kernel is
    # exactly one, so the energy is the squared total weight, which the
    # diagonal completion must reproduce without a hole at x = y.
    for n in (16, 64, 256):
        u = _interval_trace(n, lambda x: x)
        got = en.gagliardo_energy(u, 0.5, 2.0).value
        assert got == pytest.approx(1.0, abs=1e-12)


def test_dense_loop_oracle_agrees_with_blocked_sum():
    rng = np.random.default_rng(7)
    u1 = _interval_trace(13, lambda x: np.sin(2.0 * x) + 0.3 * x)
    u2 = _circle_trace(
        12, lambda t: np.stack([np.cos(t), np.sin(t)], -1), tg.circle(), 1e-9
    )
    vals = rng.normal(size=(9, 8, 2))
    u3 = gm.TraceMap(base=dom.torus(9, 8), target=tg.euclidean(2), values=vals)
    for u, s, p in ((u1, 0.5, 2.0), (u1, 0.3, 1.5), (u2, 0.5, 2.0), (u3, 0.4, 2.5)):
        got = en.gagliardo_energy(u, s, p).value
        want = _dense_gagliardo(u, s, p)
        assert got == pytest.approx(want, rel=1e-10)


def test_value_scaling_is_exactly_power_p():
    u = _interval_trace(24, lambda x: np.sin(3.0 * x))
    lam = 1.75
    v = gm.TraceMap(base=u.base, target=u.target, values=lam * u.values)
    for p in (1.0, 1.5, 2.0, 3.0):
        a = en.gagliardo_energy(u, 0.5, p).value
        b = en.gagliardo_energy(v, 0.5, p).value
        assert b == pytest.approx(lam**p * a, rel=1e-12)


def test_circle_symmetries_of_the_pair_sum():
    # Rotating or reflecting circle data permutes the node pairs and the
    # one-sided jumps, so both leave the quadrature value unchanged.
    rng = np.random.default_rng(9)
    vals = rng.normal(size=(30, 2))
    u = gm.TraceMap(base=dom.circle(30), target=tg.euclidean(2), values=vals)
    a = en.gagliardo_energy(u, 0.4, 2.0).value
    rot = gm.TraceMap(base=u.base, target=u.target, values=np.roll(vals, 7, axis=0))
    refl = gm.TraceMap(base=u.base, target=u.target, values=vals[::-1])
    assert en.gagliardo_energy(rot, 0.4, 2.0).value == pytest.approx(a, rel=1e-12)
    assert en.gagliardo_energy(refl, 0.4, 2.0).value == pytest.approx(a, rel=1e-12)


def test_refinement_converges_on_smooth_circle_data():
    def fn(t):
        return np.stack([np.cos(t), np.sin(t)], -1)

    es = [
        en.gagliardo_energy(_circle_trace(n, fn, tg.circle(), 1e-9), 0.5, 2.0).value
        for n in (32, 64, 128)
    ]
    d1 = abs(es[1] - es[0])
    d2 = abs(es[2] - es[1])
    assert d2 < d1  # successive refinements move the value less
    assert d2 < 0.05 * es[2]


def test_gagliardo_parameter_validation():
    u = _interval_trace(8, lambda x: x)
    en.gagliardo_energy(u, 0.5, 1.0)  # p = 1 is allowed
    for s in (0.0, 1.0, -0.2, 1.3):
        with pytest.raises(ParameterError):
            en.gagliardo_energy(u, s, 2.0)
    with pytest.raises(ParameterError):
        en.gagliardo_energy(u, 0.5, 0.8)


def test_dirichlet_identity_map_on_square():
    d = dom.square(33, 33)
    mesh = gm.node_mesh(d).reshape(33, 33, 2)
    m = gm.GridMap(domain=d, target=tg.euclidean(2), values=mesh)
    # gradient is the identity matrix on every cell, |D|^2 = 2
    assert en.dirichlet_p_energy(m, 2.0).value == pytest.approx(2.0, rel=1e-12)
    assert en.dirichlet_p_energy(m, 3.0).value == pytest.approx(
        2.0**1.5, rel=1e-12
    )


def test_dirichlet_rejects_p_not_above_one():
    d = dom.square(5, 5)
    m = gm.GridMap(domain=d, target=tg.euclidean(1), values=np.zeros((5, 5, 1)))
    with pytest.raises(ParameterError):
        en.dirichlet_p_energy(m, 1.0)


def test_node_weights_sum_to_the_volume():
    for d in (dom.square(9, 5), dom.cylinder(8, 5, depth=0.5), dom.torus(6, 7)):
        vols = en.node_volumes(d)
        assert vols.shape == d.shape
        assert float(np.sum(vols)) == pytest.approx(d.volume, rel=1e-12)


def test_penalty_vanishes_on_target_and_scales_with_eps():
    d = dom.cylinder(16, 5)
    t = d.axes[0].coordinates()
    on = np.stack([np.cos(t), np.sin(t)], -1)[:, None, :] * np.ones((1, 5, 1))
    m_on = gm.GridMap(domain=d, target=tg.euclidean(2), values=on)
    pen1 = en.distance_penalty(0.5, 2.0, tg.circle())
    assert en.penalty_total(m_on, pen1) == pytest.approx(0.0, abs=1e-26)
    off = on * 1.3
    m_off = gm.GridMap(domain=d, target=tg.euclidean(2), values=off)
    pen2 = en.distance_penalty(0.25, 2.0, tg.circle())
    a = en.penalty_total(m_off, pen1)
    b = en.penalty_total(m_off, pen2)
    assert a > 0.0
    assert b == pytest.approx(4.0 * a, rel=1e-12)  # (eps1/eps2)^power


def test_penalized_energy_requires_unconstrained_values():
    d = dom.cylinder(12, 4)
    t = d.axes[0].coordinates()
    circ = np.stack([np.cos(t), np.sin(t)], -1)[:, None, :] * np.ones((1, 4, 1))
    pen = en.distance_penalty(0.5, 2.0, tg.circle())
    constrained = gm.GridMap(domain=d, target=tg.circle(), values=circ, constraint_tol=1e-9)
    with pytest.raises(ParameterError):
        en.penalized_energy(constrained, 2.0, pen)
    free = gm.GridMap(domain=d, target=tg.euclidean(2), values=circ)
    rep = en.penalized_energy(free, 2.0, pen)
    assert rep.value == pytest.approx(en.dirichlet_p_energy(free, 2.0).value, rel=1e-12)


def test_energy_report_carries_the_run_parameters():
    u = _interval_trace(12, lambda x: x)
    rep = en.gagliardo_energy(u, 0.5, 2.0)
    assert rep.p == 2.0
    assert rep.s == 0.5
    assert rep.resolution == (12,)
