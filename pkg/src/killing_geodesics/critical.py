"""Critical orbits of the energy function and their certification.

The central mechanism: critical points of f(p) = g(K_p, K_p) generate
periodic geodesics through the identity grad f = -2 ∇_K K.  The search is
multi-start projected descent (on f and on -f) with Newton refinement on
the Hessian transverse to the flow direction, followed by orbit-aware
deduplication, classification, residual certification and period
detection.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateCriticalPointError, NotTimelikeError, SearchFailureError
from .flows import detect_period, flow, geodesic_residual, min_distance_to_point
from .geometry import FD_STEP_SECOND, Array, ManifoldModel, MetricField, metric_eval
from .killing import KillingField, energy, lorentz_to_riemann

GRAD_TOL = 1e-7
DEDUP_DISTANCE = 1e-4
DEGENERATE_VARIANCE = 1e-12
CLASSIFY_EIG_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class CriticalOrbit:
    """A certified critical orbit of the energy function."""

    representative: Array
    f_value: float
    grad_norm: float
    classification: str  # "min" | "max" | "saddle" | "degenerate" | "degenerate_constant"
    geodesic_residual: float
    period: Optional[float] = None
    degenerate: bool = False


def f_eval(g: MetricField, K, p) -> float:
    """Energy f(p) = g(K_p, K_p)."""
    return energy(g, K, p)


def _f_raw(g: MetricField, K):
    """Fast unchecked evaluator of f on the ambient extension."""
    field = K.evaluator if isinstance(K, KillingField) else K

    def f(p):
        v = np.asarray(field(p), dtype=float)
        return float(v @ (g.matrix(p) @ v))

    return f


def _tangent_df(f, M: ManifoldModel, p: Array, basis: Array, h: float = 1e-5) -> Array:
    """Directional derivatives of f along a tangent basis (central FD)."""
    return np.array([(f(p + h * b) - f(p - h * b)) / (2 * h) for b in basis])


def grad_f(g: MetricField, K, p) -> Array:
    """The g-gradient of f at p, via finite differences and g-duality.

    Solves g(grad f, e_i) = df(e_i) in a Euclidean-orthonormal tangent
    basis.  Independent of the connection; tests cross-check it against
    the identity grad f = -2 ∇_K K.
    """
    M = g.manifold
    p = np.asarray(p, dtype=float)
    basis = M.tangent_basis(p)
    df = _tangent_df(_f_raw(g, K), M, p, basis)
    gram = np.array([[metric_eval(g, p, bi, bj) for bj in basis] for bi in basis])
    coeffs = np.linalg.solve(gram, df)
    return coeffs @ basis


def _euclidean_grad(f, M: ManifoldModel, p: Array, basis: Array) -> Array:
    df = _tangent_df(f, M, p, basis)
    return df @ basis


def _descent_direction(g: MetricField, K, f, M, p, basis) -> Array:
    """Gradient with respect to a definite inner product.

    Uses the auxiliary Riemannian metric where K is timelike, otherwise
    the Euclidean tangential gradient; both share their zero set with the
    true differential of f.
    """
    df = _tangent_df(f, M, p, basis)
    if g.role == "lorentzian":
        try:
            g_r = lorentz_to_riemann(g, K)
            gram = np.array([[metric_eval(g_r, p, bi, bj) for bj in basis] for bi in basis])
            return np.linalg.solve(gram, df) @ basis
        except NotTimelikeError:
            pass
    return df @ basis


def _descend(g, K, M, f, p0, sign, basis_fn, max_iter=300, grad_stop=1e-9):
    """Projected gradient descent on sign*f with Armijo backtracking."""
    p = M.project_point(np.asarray(p0, dtype=float))
    step = 0.1
    for _ in range(max_iter):
        basis = basis_fn(p)
        d = sign * _descent_direction(g, K, f, M, p, basis)
        nd = float(np.linalg.norm(d))
        if nd <= grad_stop:
            break
        fp = sign * f(p)
        accepted = False
        trial = step
        for _ in range(40):
            q = M.project_point(p - trial * d)
            if sign * f(q) < fp - 1e-4 * trial * nd * nd:
                p = q
                step = min(trial * 1.5, 10.0)
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            break
    return p


def _transverse_hessian(f, M, p, basis, h: float = FD_STEP_SECOND) -> Array:
    """Second differences of f along constraint retractions.

    Displaced points are projected back onto the manifold before
    evaluating: the straight-line ambient Hessian differs from the
    intrinsic one by a curvature term that can even flip signs.
    """

    def fr(q):
        return f(M.project_point(q))

    n = len(basis)
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            pp = fr(p + h * basis[i] + h * basis[j])
            pm = fr(p + h * basis[i] - h * basis[j])
            mp = fr(p - h * basis[i] + h * basis[j])
            mm = fr(p - h * basis[i] - h * basis[j])
            H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return H


def _newton_refine(g, K, M, f, p, max_iter=20, trust=0.3):
    """Newton steps on the KKT system that quotients out the flow direction."""
    field = K.evaluator if isinstance(K, KillingField) else K
    for _ in range(max_iter):
        basis = M.tangent_basis(p)
        df = _tangent_df(f, M, p, basis)
        if float(np.linalg.norm(df)) <= 1e-12:
            break
        H = _transverse_hessian(f, M, p, basis)
        k = basis @ np.asarray(field(p), dtype=float)
        nk = float(np.linalg.norm(k))
        if nk > 1e-10:
            n = len(basis)
            kkt = np.zeros((n + 1, n + 1))
            kkt[:n, :n] = H
            kkt[:n, n] = k
            kkt[n, :n] = k
            rhs = np.concatenate([-df, [0.0]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol = np.concatenate([np.linalg.lstsq(H, -df, rcond=None)[0], [0.0]])
            delta = sol[:n]
        else:
            delta = np.linalg.lstsq(H, -df, rcond=None)[0]
        nd = float(np.linalg.norm(delta))
        if nd > trust:
            delta *= trust / nd
        p = M.project_point(p + delta @ basis)
        if nd < 1e-14:
            break
    return p


def classify_critical(g: MetricField, K, p, flow_tol: float = 1e-10):
    """Classify a critical point by the transverse Hessian of f.

    Returns ("min" | "max" | "saddle", eigenvalues).  Directions along the
    flow are projected out before the eigenvalue analysis.  Raises
    DegenerateCriticalPointError when some transverse eigenvalue sits
    within CLASSIFY_EIG_TOL of zero, and ValueError when the gradient
    precondition fails.
    """
    M = g.manifold
    p = np.asarray(p, dtype=float)
    f = _f_raw(g, K)
    basis = M.tangent_basis(p)
    df = _tangent_df(f, M, p, basis)
    if float(np.linalg.norm(df)) > GRAD_TOL * 10:
        raise ValueError("point is not critical (gradient precondition)")
    field = K.evaluator if isinstance(K, KillingField) else K
    k = basis @ np.asarray(field(p), dtype=float)
    nk = float(np.linalg.norm(k))
    vecs = basis
    if nk > 1e-10:
        k = k / nk
        # orthonormal complement of the flow direction inside the tangent space
        cols = []
        for i in range(len(basis)):
            v = np.eye(len(basis))[i] - k[i] * k
            for b in cols:
                v = v - (b @ v) * b
            nv = float(np.linalg.norm(v))
            if nv > 1e-8:
                cols.append(v / nv)
            if len(cols) == len(basis) - 1:
                break
        vecs = np.array(cols) @ basis
    H = _transverse_hessian(f, M, p, vecs)
    eig = np.linalg.eigvalsh(H)
    if np.any(np.abs(eig) <= CLASSIFY_EIG_TOL):
        raise DegenerateCriticalPointError(f"transverse eigenvalues {eig} too close to zero")
    if np.all(eig > 0):
        return "min", eig
    if np.all(eig < 0):
        return "max", eig
    return "saddle", eig


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("KG_THREADS", "1")))
    except ValueError:
        return 1


def find_critical_orbits(
    g: MetricField,
    K,
    M: Optional[ManifoldModel] = None,
    budget: int = 64,
    seed: int = 42,
    horizon: float = 50.0,
    tol_ode: float = 1e-10,
    probe_samples: int = 256,
) -> list:
    """Locate the critical orbits of f = g(K, K) on the manifold.

    Multi-start descent on f and -f from ``budget`` seeded samples (always
    including the sampled argmin and argmax), Newton refinement, orbit
    deduplication by flow reach, then classification, geodesic-residual
    certification and period detection per orbit.  A sampled f-variance
    below 1e-12 short-circuits into a single degenerate-constant marker
    meaning every point is critical.
    """
    if M is None:
        M = g.manifold
    rng = np.random.default_rng(seed)
    samples = M.sample_points(rng, probe_samples)
    f = _f_raw(g, K)
    fvals = np.array([f(p) for p in samples])
    if float(np.var(fvals)) < DEGENERATE_VARIANCE:
        rep = samples[0]
        cert = detect_period(M, K, rep, horizon, tol_ode=tol_ode)
        line = flow(M, K, rep, cert.period if cert else min(horizon, 10.0), tol=tol_ode)
        resid = geodesic_residual(g, line)
        return [
            CriticalOrbit(
                representative=rep,
                f_value=float(fvals[0]),
                grad_norm=float(np.linalg.norm(grad_f(g, K, rep))),
                classification="degenerate_constant",
                geodesic_residual=resid,
                period=cert.period if cert else None,
                degenerate=True,
            )
        ]

    order = [int(np.argmin(fvals)), int(np.argmax(fvals))]
    order += [i for i in range(len(samples)) if i not in order]
    starts = [samples[i] for i in order[:budget]]

    def run_start(p0):
        out = []
        for sign in (1.0, -1.0):
            p = _descend(g, K, M, f, p0, sign, M.tangent_basis)
            p = _newton_refine(g, K, M, f, p)
            gn = float(np.linalg.norm(grad_f(g, K, p)))
            if gn <= GRAD_TOL:
                out.append((p, float(f(p)), gn))
        return out

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_start, starts))
    else:
        results = [run_start(p0) for p0 in starts]
    candidates = [c for group in results for c in group]
    if not candidates:
        raise SearchFailureError("no start converged to a critical point")

    candidates.sort(key=lambda c: (c[1], tuple(np.round(c[0], 9))))
    orbits = []
    orbit_curves = []
    for p, fv, gn in candidates:
        duplicate = False
        for i, (q, fq, _) in enumerate(orbits):
            if abs(fv - fq) > 1e-6 * (1.0 + abs(fq)):
                continue
            if min_distance_to_point(M, orbit_curves[i], p) <= DEDUP_DISTANCE:
                duplicate = True
                break
        if duplicate:
            continue
        speed = float(np.linalg.norm(np.asarray((K.evaluator if isinstance(K, KillingField) else K)(p), float)))
        span = min(horizon, 4.0 * math.pi / max(speed, 0.1) + 1.0)
        orbit_curves.append(flow(M, K, p, span, tol=tol_ode))
        orbits.append((p, fv, gn))

    out = []
    for (p, fv, gn), line in zip(orbits, orbit_curves):
        degenerate = False
        try:
            label, _ = classify_critical(g, K, p)
        except DegenerateCriticalPointError:
            label, degenerate = "degenerate", True
        cert = detect_period(M, K, p, horizon, tol_ode=tol_ode)
        resid_curve = line
        if cert is not None and cert.period < line.t_end:
            resid_curve = flow(M, K, p, cert.period, tol=tol_ode)
        resid = geodesic_residual(g, resid_curve)
        out.append(
            CriticalOrbit(
                representative=p,
                f_value=fv,
                grad_norm=gn,
                classification=label,
                geodesic_residual=resid,
                period=cert.period if cert else None,
                degenerate=degenerate,
            )
        )
    out.sort(key=lambda o: o.f_value)
    return out
