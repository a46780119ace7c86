"""Killing flows, geodesics, residual certification and period detection.

Curves are integrated in ambient coordinates with the adaptive RK 5(4)
stepper; embedded manifolds get a constraint projection after every
accepted step.  Periodicity is detected modulo the deck group: a return
is a time s and a deck word g with g.c(s) = c(0) and dg.c'(s) = c'(0)
within tolerance, refined by bisection on a Poincare-section crossing
function evaluated on the dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import (
    Array,
    DeckElement,
    ManifoldModel,
    MetricField,
    apply_christoffel,
    christoffel,
    metric_orthogonal_project,
    reduce_point,
)
from .integrate import DenseCurve, solve_rk45
from .killing import KillingField, KillingFamily

PERIOD_TOL = 1e-6
GEODESIC_TOL = 1e-5
SCAN_RESOLUTION = 1e-3
DIP_THRESHOLD = 1e-2
BISECTION_STEPS = 60


def _field_fn(K) -> Callable[[Array], Array]:
    return K.evaluator if isinstance(K, KillingField) else K


@dataclass(frozen=True, eq=False)
class CurveSample:
    """A time-stamped integrated curve with conservation diagnostics.

    ``dense`` interpolates the full ODE state: the point itself for flow
    curves, the stacked (point, velocity) pair for geodesics.
    """

    manifold: ManifoldModel
    kind: str                      # "flow" | "geodesic"
    times: Array
    points: Array
    velocities: Array
    accelerations: Optional[Array]
    energy_drift: float
    constraint_drift: float
    dense: DenseCurve
    field: Optional[Callable[[Array], Array]] = None

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def position_at(self, s):
        state = self.dense(s)
        n = self.manifold.ambient_dim
        return state[..., :n]

    def velocity_at(self, s):
        n = self.manifold.ambient_dim
        if self.kind == "geodesic":
            return self.dense(s)[..., n:]
        if self.field is not None:
            one = np.ndim(s) == 0
            pts = np.atleast_2d(self.position_at(s))
            vel = np.array([self.field(p) for p in pts])
            return vel[0] if one else vel
        return self.dense.derivative(s)


def _energy_values(g: MetricField, points: Array, velocities: Array) -> Array:
    vals = np.empty(len(points))
    for i, (p, v) in enumerate(zip(points, velocities)):
        vals[i] = float(v @ (g.matrix(p) @ v))
    return vals


def _constraint_drift(M: ManifoldModel, points: Array) -> float:
    if M.constraint is None:
        return 0.0
    return max(M.constraint_residual(p) for p in points)


def _field_accelerations(field, points: Array, h: float = 1e-5) -> Array:
    """d/ds of the field along its own integral curve, by central FD."""
    acc = np.empty_like(points)
    for i, p in enumerate(points):
        v = np.asarray(field(p), dtype=float)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            acc[i] = 0.0
            continue
        u = v / nv
        acc[i] = (np.asarray(field(p + h * u), float) - np.asarray(field(p - h * u), float)) / (2 * h) * nv
    return acc


def flow(
    M: ManifoldModel,
    K,
    p0,
    T: float,
    tol: float = 1e-10,
    metric: Optional[MetricField] = None,
) -> CurveSample:
    """Integrate the field flow c' = K(c), c(0) = p0 on [0, T].

    When ``metric`` is given, the drift of g(K, K) along the curve is
    recorded in ``energy_drift`` (it should vanish for Killing fields).
    """
    field = _field_fn(K)
    p0 = np.asarray(p0, dtype=float)

    def rhs(_t, y):
        return field(y)

    project = None
    if M.constraint is not None:
        project = lambda y: M.project_point(y)
    dense = solve_rk45(rhs, p0, float(T), tol=tol, project=project)
    points = dense.ys
    velocities = dense.fs
    accelerations = _field_accelerations(field, points)
    drift = math.nan
    if metric is not None:
        vals = _energy_values(metric, points, velocities)
        drift = float(np.max(np.abs(vals - vals[0])))
    return CurveSample(
        M, "flow", dense.ts, points, velocities, accelerations,
        drift, _constraint_drift(M, points), dense, field,
    )


def geodesic_rhs(g: MetricField) -> Callable[[float, Array], Array]:
    """Right-hand side of the geodesic equation in ambient coordinates.

    For constrained manifolds the ambient acceleration gets the Lagrange
    multiplier term that keeps the curve on the level set; this reproduces
    the Levi-Civita geodesics of the induced metric.
    """
    M = g.manifold
    n = M.ambient_dim

    def rhs(_t, y):
        x = y[:n]
        v = y[n:]
        gamma = christoffel(g, x)
        a = -apply_christoffel(gamma, v, v)
        if M.constraint is not None:
            grad = M.grad_constraint(x)
            hess = M.hess_constraint(x)
            ginv_grad = np.linalg.solve(g.matrix(x), grad)
            lam = -(float(grad @ a) + float(v @ (hess @ v))) / float(grad @ ginv_grad)
            a = a + lam * ginv_grad
        return np.concatenate([v, a])

    return rhs


def shoot_geodesic(g: MetricField, p0, v0, T: float, tol: float = 1e-11) -> CurveSample:
    """Integrate the geodesic with initial point p0 and velocity v0.

    The default local tolerance is tighter than the flow default: energy
    conservation over a full period must stay below 1e-9 absolute, which
    1e-10 only meets without margin.
    """
    M = g.manifold
    n = M.ambient_dim
    p0 = np.asarray(p0, dtype=float)
    v0 = M.tangent_project(p0, v0)
    project = None
    if M.constraint is not None:
        def project(y):
            x = M.project_point(y[:n])
            return np.concatenate([x, M.tangent_project(x, y[n:])])
    dense = solve_rk45(geodesic_rhs(g), np.concatenate([p0, v0]), float(T), tol=tol, project=project)
    points = dense.ys[:, :n]
    velocities = dense.ys[:, n:]
    accelerations = dense.fs[:, n:]
    vals = _energy_values(g, points, velocities)
    drift = float(np.max(np.abs(vals - vals[0])))
    return CurveSample(
        M, "geodesic", dense.ts, points, velocities, accelerations,
        drift, _constraint_drift(M, points), dense,
    )


def geodesic_residual(g: MetricField, c: CurveSample, max_samples: int = 2000) -> float:
    """Sup of the covariant acceleration norm over interior samples.

    The norm is the ambient Euclidean one: an indefinite norm could hide a
    nonzero null acceleration.  Values below GEODESIC_TOL certify the
    curve as a geodesic.
    """
    if c.accelerations is None:
        raise ValueError("curve carries no acceleration samples")
    if len(c.times) < 3:
        raise ValueError("need at least 3 samples")
    idx = range(1, len(c.times) - 1)
    if len(c.times) - 2 > max_samples:
        stride = (len(c.times) - 2) // max_samples + 1
        idx = range(1, len(c.times) - 1, stride)
    worst = 0.0
    for i in idx:
        p = c.points[i]
        v = c.velocities[i]
        gamma = christoffel(g, p)
        resid = c.accelerations[i] + apply_christoffel(gamma, v, v)
        resid = metric_orthogonal_project(g, p, resid)
        worst = max(worst, float(np.linalg.norm(resid)))
    return worst


@dataclass(frozen=True, eq=False)
class PeriodCertificate:
    """Certified return of a flow line modulo the deck group.

    ``deck_word`` carries the curve endpoint back to the start:
    deck_word.apply(c(period)) = c(0) within position_gap.
    """

    period: float
    deck_word: DeckElement
    position_gap: float
    velocity_gap: float


def detect_period(
    M: ManifoldModel,
    K,
    p0,
    horizon: float,
    tol: float = PERIOD_TOL,
    tol_ode: float = 1e-10,
    max_word_len: int = 6,
    resolution: float = SCAN_RESOLUTION,
    dip_threshold: float = DIP_THRESHOLD,
    curve: Optional[CurveSample] = None,
) -> Optional[PeriodCertificate]:
    """Find the minimal period of the integral curve of K through p0.

    Scans the quotient distance to p0 along the dense output, brackets
    candidate returns where the distance dips below ``dip_threshold``, and
    refines each by bisection on the signed crossing of the Poincare
    section through p0 normal to the initial velocity.  Returns None when
    no certified return exists within the horizon (including the case of
    a stationary point of the field).
    """
    p0 = np.asarray(p0, dtype=float)
    field = _field_fn(K)
    v0 = np.asarray(field(p0), dtype=float)
    speed = float(np.linalg.norm(v0))
    if speed < 1e-12:
        return None
    if curve is None:
        curve = flow(M, K, p0, horizon, tol=tol_ode)
    dense = curve.dense
    ss = np.arange(0.0, curve.t_end, resolution)
    pts = curve.position_at(ss)
    dist = M.quotient_distance(pts, p0)

    # require the orbit to leave the start before accepting returns
    escaped = np.nonzero(dist > dip_threshold)[0]
    if len(escaped) == 0:
        return None
    start = escaped[0]
    below = dist[start:] < dip_threshold
    runs = _contiguous_runs(below, offset=start)
    unit = v0 / speed
    for lo, hi in runs:
        seg = slice(lo, hi)
        best = lo + int(np.argmin(dist[seg]))
        cert = _refine_return(M, dense, curve, p0, v0, unit, ss, best, tol, max_word_len, dip_threshold)
        if cert is not None:
            return cert
    return None


def _contiguous_runs(mask: Array, offset: int = 0):
    runs = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            runs.append((offset + i, offset + j))
            i = j
        else:
            i += 1
    return runs


def _refine_return(M, dense, curve, p0, v0, unit, ss, best_idx, tol, max_word_len, dip_threshold):
    s_best = float(ss[best_idx])
    p_best = curve.position_at(s_best)
    word = reduce_point(M, p_best, p0, max_word_len=max_word_len, tol=3 * dip_threshold)
    if word is None:
        return None
    # word carries p_best to (近) p0; invert direction: we need g.c(s) = p0
    gamma = word

    def crossing(s):
        return float((gamma.apply(curve.position_at(float(s))) - p0) @ unit)

    # bracket the sign change nearest to the dip minimum
    step = float(ss[1] - ss[0]) if len(ss) > 1 else 1e-3
    lo = max(0.0, s_best - 5 * step)
    hi = min(curve.t_end, s_best + 5 * step)
    grid = np.linspace(lo, hi, 21)
    vals = [crossing(s) for s in grid]
    bracket = None
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            bracket = (grid[i], grid[i])
            break
        if vals[i] * vals[i + 1] < 0:
            bracket = (grid[i], grid[i + 1])
            break
    if bracket is None:
        return None
    a, b = bracket
    fa = crossing(a)
    for _ in range(BISECTION_STEPS):
        if a == b:
            break
        m = 0.5 * (a + b)
        fm = crossing(m)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
    s_star = 0.5 * (a + b)
    if s_star <= 1e-6:
        return None
    p_star = curve.position_at(s_star)
    pos_gap = float(np.linalg.norm(gamma.apply(p_star) - p0))
    if curve.field is not None:
        v_star = np.asarray(curve.field(p_star), dtype=float)
    else:
        v_star = curve.velocity_at(s_star)
    vel_gap = float(np.linalg.norm(gamma.apply_vector(v_star) - v0))
    if pos_gap <= tol and vel_gap <= tol:
        return PeriodCertificate(s_star, gamma, pos_gap, vel_gap)
    return None


def translate_geodesic(
    F: KillingFamily,
    l: int,
    gamma: CurveSample,
    t: float,
    tol: float = 1e-10,
) -> CurveSample:
    """Apply the time-t flow of family member l pointwise to a curve.

    The input must be an integral curve of a combined field of the family
    (it carries its generating field); since the family commutes, the
    image is again an integral curve of the same field, so velocities and
    accelerations are re-derived from the field rather than transported.
    """
    if gamma.field is None:
        raise ValueError("curve does not carry its generating field")
    M = gamma.manifold
    mover = _field_fn(F.members[l])
    if t < 0:
        orig = mover
        mover = lambda p: -orig(p)
    span = abs(float(t))
    new_points = np.empty_like(gamma.points)
    for i, p in enumerate(gamma.points):
        if span == 0.0:
            new_points[i] = p
        else:
            new_points[i] = flow(M, mover, p, span, tol=tol).points[-1]
    field = gamma.field
    new_velocities = np.array([field(p) for p in new_points])
    new_acc = _field_accelerations(field, new_points)
    dense = DenseCurve(gamma.times.copy(), new_points.copy(), new_velocities.copy())
    return CurveSample(
        M, "flow", gamma.times.copy(), new_points, new_velocities, new_acc,
        math.nan, _constraint_drift(M, new_points), dense, field,
    )


def min_distance_to_point(
    M: ManifoldModel, c: CurveSample, q, refine: bool = True, resolution: float = 5e-3
) -> float:
    """Minimal quotient distance from a curve image to a point.

    Scans the dense output at fixed resolution and refines every
    competitive local minimum: refining only the global coarse minimum
    can lock onto the wrong dip when true minima fall between samples.
    """
    q = np.asarray(q, dtype=float)
    if len(c.times) < 2 or c.t_end == 0.0:
        return float(np.min(M.quotient_distance(c.points, q)))
    ss = np.arange(0.0, c.t_end, resolution)
    d = M.quotient_distance(c.position_at(ss), q)
    best = float(np.min(d))
    if not refine:
        return best
    speed = float(np.linalg.norm(c.velocities[0]))
    margin = best + speed * resolution
    interior = (d[1:-1] <= d[:-2]) & (d[1:-1] <= d[2:])
    candidates = [j + 1 for j in np.nonzero(interior & (d[1:-1] <= margin))[0]]
    candidates += [0, len(ss) - 1]
    for j in candidates:
        if d[j] > margin:
            continue
        lo = float(ss[max(0, j - 1)])
        hi = float(ss[min(len(ss) - 1, j + 1)])
        for _ in range(3):
            grid = np.linspace(lo, hi, 60)
            dd = M.quotient_distance(c.position_at(grid), q)
            k = int(np.argmin(dd))
            best = min(best, float(dd[k]))
            width = (hi - lo) / 59.0
            lo = max(lo, float(grid[k]) - width)
            hi = min(hi, float(grid[k]) + width)
    return best


def hausdorff_distance(M: ManifoldModel, c1: CurveSample, c2: CurveSample, n_samples: int = 300) -> float:
    """Hausdorff distance between two curve images in the quotient."""
    s1 = np.linspace(0.0, c1.t_end, n_samples)
    s2 = np.linspace(0.0, c2.t_end, n_samples)
    pts1 = c1.position_at(s1)
    pts2 = c2.position_at(s2)
    d12 = max(float(np.min(M.quotient_distance(pts2, p))) for p in pts1)
    d21 = max(float(np.min(M.quotient_distance(pts1, q))) for q in pts2)
    return max(d12, d21)


def curve_to_csv(g: MetricField, c: CurveSample) -> str:
    """Serialize a curve as CSV with columns s, coordinates, velocities, f."""
    n = c.manifold.ambient_dim
    header = (
        ["s"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"v{i + 1}" for i in range(n)]
        + ["f"]
    )
    lines = [",".join(header)]
    fvals = _energy_values(g, c.points, c.velocities)
    for t, p, v, f in zip(c.times, c.points, c.velocities, fvals):
        row = [t, *p, *v, f]
        lines.append(",".join(format(x, ".17g") for x in row))
    return "\n".join(lines) + "\n"
