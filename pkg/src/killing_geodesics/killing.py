"""Killing vector fields, residual certification, metric conversions.

A vector field is Killing when its flow preserves the metric, i.e. when
∇K is skew-symmetric.  The residual measured here is the largest entry of
the symmetric part of (v, w) -> g(∇_v K, w) over a tangent probe basis, so
it vanishes (up to discretization) exactly on Killing fields.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NotTimelikeError, VanishingFieldError
from .geometry import (
    Array,
    ManifoldModel,
    MetricField,
    covariant_derivative,
    metric_eval,
    _as_components,
)

KILLING_RESIDUAL_TOL = 1e-8
COMMUTE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class KillingField:
    """A vector field with optional torus-generator coordinates.

    ``generator`` holds the coordinates of the field in an explicit torus
    action whose fundamental fields are ``basis`` (set only for gallery
    entries built from such actions).  ``certified`` records whether the
    Killing residual stayed below tolerance on construction samples;
    perturbed non-Killing fields are legitimate objects with
    ``certified=False``.
    """

    evaluator: Callable[[Array], Array]
    label: str = "K"
    generator: Optional[tuple] = None
    basis: Optional[tuple] = None  # fundamental fields of the torus action
    certified: bool = False
    max_residual: float = math.inf
    jacobian: Optional[Callable[[Array], Array]] = None  # row m = ∂field/∂x_m

    def __call__(self, p: Array) -> Array:
        return np.asarray(self.evaluator(np.asarray(p, dtype=float)), dtype=float)


@dataclass(frozen=True, eq=False)
class KillingFamily:
    """A finite family of Killing fields, with the commutation flag
    verified on samples at construction."""

    members: tuple
    commuting: bool
    max_bracket: float = 0.0

    def __len__(self) -> int:
        return len(self.members)


def killing_residual(g: MetricField, K, p) -> float:
    """Largest symmetric part |g(∇_i K, e_j) + g(∇_j K, e_i)| at p.

    The probe basis is Euclidean-orthonormal in the ambient chart (not
    g-orthonormal), which avoids normalizing against null directions of an
    indefinite metric.
    """
    M = g.manifold
    p = np.asarray(p, dtype=float)
    field = K.evaluator if isinstance(K, KillingField) else K
    basis = M.tangent_basis(p)
    n = len(basis)
    nabla = [covariant_derivative(g, field, basis[i], p) for i in range(n)]
    worst = 0.0
    for i in range(n):
        for j in range(i, n):
            s = metric_eval(g, p, nabla[i], basis[j]) + metric_eval(g, p, nabla[j], basis[i])
            worst = max(worst, abs(s))
    return worst


def certify_killing_field(
    g: MetricField,
    K: KillingField,
    n_samples: int = 50,
    seed: int = 0,
    tol: float = KILLING_RESIDUAL_TOL,
) -> KillingField:
    """Return a copy of K with the certification flag and residual filled in."""
    rng = np.random.default_rng(seed)
    pts = g.manifold.sample_points(rng, n_samples)
    worst = max(killing_residual(g, K, p) for p in pts)
    return dataclasses.replace(K, certified=bool(worst <= tol), max_residual=float(worst))


def make_killing_field(
    g: MetricField,
    evaluator: Callable[[Array], Array],
    label: str = "K",
    generator: Optional[tuple] = None,
    basis: Optional[tuple] = None,
    certify_samples: int = 50,
    seed: int = 0,
    jacobian: Optional[Callable[[Array], Array]] = None,
) -> KillingField:
    K = KillingField(evaluator, label=label, generator=generator, basis=basis, jacobian=jacobian)
    return certify_killing_field(g, K, n_samples=certify_samples, seed=seed)


def lie_bracket(X, Y, p) -> Array:
    """Finite-difference Lie bracket [X, Y] at p.

    Exactly antisymmetric by construction; tangency is preserved up to
    discretization for fields tangent to the manifold.
    """
    p = np.asarray(p, dtype=float)
    fx = X.evaluator if isinstance(X, KillingField) else X
    fy = Y.evaluator if isinstance(Y, KillingField) else Y
    return _directional(fy, fx(p), p) - _directional(fx, fy(p), p)


def _directional(field, v, p, h: float = 1e-5) -> Array:
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return np.zeros_like(p)
    u = v / nv
    return (np.asarray(field(p + h * u), float) - np.asarray(field(p - h * u), float)) / (2 * h) * nv


def make_killing_family(
    g: MetricField,
    members,
    n_samples: int = 20,
    seed: int = 0,
    tol: float = COMMUTE_TOL,
) -> KillingFamily:
    """Bundle fields into a family, verifying pairwise commutation on samples."""
    rng = np.random.default_rng(seed)
    pts = g.manifold.sample_points(rng, n_samples)
    worst = 0.0
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            for p in pts:
                worst = max(worst, float(np.linalg.norm(lie_bracket(members[i], members[j], p))))
    return KillingFamily(tuple(members), commuting=bool(worst <= tol), max_bracket=worst)


def gram_matrix(g: MetricField, F: KillingFamily, q) -> Array:
    """The matrix A(q)_ij = g(K^i_q, K^j_q); exactly symmetric."""
    q = np.asarray(q, dtype=float)
    m = len(F.members)
    vals = [F.members[i](q) for i in range(m)]
    A = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            A[i, j] = A[j, i] = metric_eval(g, q, vals[i], vals[j])
    return A


def combine_family(F: KillingFamily, x) -> KillingField:
    """Pointwise linear combination sum_i x_i K^i of a commuting family.

    The generator coordinates of the result are the combination of the
    members' coordinates (which is x itself when the members are the
    fundamental torus directions).
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise ValueError("combination coefficients must be nonzero")
    if len(x) != len(F.members):
        raise ValueError("coefficient count does not match family size")
    members = F.members

    def evaluator(p, _members=members, _x=x):
        out = _x[0] * _members[0](p)
        for c, K in zip(_x[1:], _members[1:]):
            out = out + c * K(p)
        return out

    generator = None
    if all(K.generator is not None for K in members):
        gen = sum(c * np.asarray(K.generator, dtype=float) for c, K in zip(x, members))
        generator = tuple(float(v) for v in gen)
    jacobian = None
    if all(K.jacobian is not None for K in members):
        def jacobian(p, _members=members, _x=x):
            out = _x[0] * np.asarray(_members[0].jacobian(p), dtype=float)
            for c, K in zip(_x[1:], _members[1:]):
                out = out + c * np.asarray(K.jacobian(p), dtype=float)
            return out

    label = "+".join(f"{c:g}*{K.label}" for c, K in zip(x, members))
    return KillingField(evaluator, label=label, generator=generator, basis=members, jacobian=jacobian)


def lorentz_to_riemann(g: MetricField, K) -> MetricField:
    """Auxiliary Riemannian metric for a timelike Killing field.

    g_R(v, w) = g(v, w) - 2 g(v, K) g(w, K) / g(K, K); positive definite
    wherever K is timelike, with g_R(K, K) = -g(K, K).  The evaluator is
    lazy so that converting back reproduces the input to round-off.
    """
    if g.role != "lorentzian":
        raise ValueError("lorentz_to_riemann needs a Lorentzian metric")
    field = K.evaluator if isinstance(K, KillingField) else K
    field_jac = K.jacobian if isinstance(K, KillingField) else None

    def evaluator(p, _g=g, _field=field):
        G = _g.matrix(p)
        k = np.asarray(_field(p), dtype=float)
        gk = G @ k
        f = float(k @ gk)
        if f >= -1e-10:
            raise NotTimelikeError(f"field not timelike here: g(K,K) = {f:.3e}")
        return G - 2.0 * np.outer(gk, gk) / f

    n = g.manifold.intrinsic_dim
    jac = _conversion_jacobian(g, field, field_jac) if g.jacobian is not None else None
    return MetricField(g.manifold, evaluator, (n, 0), "riemannian", 0, jac)


def riemann_to_lorentz(g_R: MetricField, K) -> MetricField:
    """Lorentzian metric from a Riemannian one and a nonvanishing field.

    Same reflection formula with g_R in place of g; the field becomes
    timelike: g(K, K) = -g_R(K, K) < 0.
    """
    if g_R.role != "riemannian":
        raise ValueError("riemann_to_lorentz needs a Riemannian metric")
    field = K.evaluator if isinstance(K, KillingField) else K
    field_jac = K.jacobian if isinstance(K, KillingField) else None

    def evaluator(p, _g=g_R, _field=field):
        G = _g.matrix(p)
        k = np.asarray(_field(p), dtype=float)
        gk = G @ k
        f = float(k @ gk)
        if f < 1e-12:
            raise VanishingFieldError("field vanishes (or metric not positive) here")
        return G - 2.0 * np.outer(gk, gk) / f

    n = g_R.manifold.intrinsic_dim
    jac = _conversion_jacobian(g_R, field, field_jac) if g_R.jacobian is not None else None
    return MetricField(g_R.manifold, evaluator, (n - 1, 1), "lorentzian", 1, jac)


def _conversion_jacobian(g: MetricField, field, field_jac=None) -> Callable[[Array], Array]:
    """Analytic jacobian of G - 2 (GK)(GK)^T / (K^T G K).

    Requires an analytic jacobian on the input metric; the field
    derivative uses ``field_jac`` when supplied, else central differences.
    """

    def jac(p, _g=g, _field=field, _fj=field_jac):
        n = len(p)
        G = _g.matrix(p)
        dG = np.asarray(_g.jacobian(p), dtype=float)
        k = np.asarray(_field(p), dtype=float)
        if _fj is not None:
            dk = np.asarray(_fj(p), dtype=float)
        else:
            h = 1e-6
            dk = np.empty((n, n))
            for m in range(n):
                e = np.zeros(n)
                e[m] = h
                dk[m] = (np.asarray(_field(p + e), float) - np.asarray(_field(p - e), float)) / (2 * h)
        gk = G @ k
        f = float(k @ gk)
        out = np.empty((n, n, n))
        for m in range(n):
            dgk = dG[m] @ k + G @ dk[m]
            df = float(dk[m] @ gk + k @ dgk)
            outer = np.outer(gk, gk)
            douter = np.outer(dgk, gk) + np.outer(gk, dgk)
            out[m] = dG[m] - 2.0 * (douter * f - outer * df) / (f * f)
        return out

    return jac


def energy(g: MetricField, K, p) -> float:
    """The energy function g(K_p, K_p), constant along the Killing flow."""
    field = K.evaluator if isinstance(K, KillingField) else K
    v = np.asarray(field(np.asarray(p, dtype=float)), dtype=float)
    return metric_eval(g, p, v, v)
