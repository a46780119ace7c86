"""Closed-field approximation by rational torus directions.

A Killing field with torus-generator coordinates (1, alpha) and alpha
irrational generates a dense (non-closed) one-parameter subgroup.
Substituting the continued-fraction convergents p/q of alpha yields
closed Killing fields whose integral lines all close, converging to the
original field uniformly — the computational content of the density
argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import UnsupportedCapabilityError
from .geometry import ManifoldModel, MetricField
from .killing import KillingField, KillingFamily, combine_family, certify_killing_field

# Convergent denominators beyond this exceed what a double can resolve.
MAX_DENOMINATOR = 10_000_000
RATIONAL_DETECT_DENOMINATOR = 1_000_000


def continued_fraction_convergents(alpha: float, n: int, max_q: int = MAX_DENOMINATOR) -> list:
    """First n continued-fraction convergents of alpha, in lowest terms.

    Each convergent satisfies |alpha - p/q| < 1/q^2.  The expansion runs
    on the stored double and stops early when the remainder vanishes or
    the denominator exceeds ``max_q``, so rational inputs yield a
    terminating (possibly shorter) list.
    """
    if n < 1:
        return []
    if not math.isfinite(alpha):
        raise ValueError("alpha must be finite")
    x = float(alpha)
    p_prev, q_prev = 1, 0
    p_cur, q_cur = int(math.floor(x)), 1
    out = [Fraction(p_cur, q_cur)]
    frac = x - math.floor(x)
    for _ in range(n - 1):
        if frac < 1e-12:
            break
        x = 1.0 / frac
        a = int(math.floor(x))
        frac = x - a
        p_next = a * p_cur + p_prev
        q_next = a * q_cur + q_prev
        if q_next > max_q:
            break
        p_prev, q_prev, p_cur, q_cur = p_cur, q_cur, p_next, q_next
        out.append(Fraction(p_cur, q_cur))
    return out


def detect_rational(alpha: float, max_q: int = RATIONAL_DETECT_DENOMINATOR) -> Optional[Fraction]:
    """Return an exact fraction equal to alpha within double resolution.

    Rationality is certified only up to denominator ``max_q``, and only
    when the stored double coincides with p/q to a few ulps: a looser
    threshold would fire on genuine irrationals, whose convergents with
    q <= 1e6 already come within ~1/q^2 = 1e-12.
    """
    tol = 4.0 * np.finfo(float).eps * max(1.0, abs(alpha))
    convergents = continued_fraction_convergents(alpha, 64, max_q=max_q)
    for frac in convergents:
        if abs(alpha - frac.numerator / frac.denominator) <= tol:
            return frac
    return None


@dataclass(frozen=True, eq=False)
class TorusDirection:
    """Generator coordinates of a field in an explicit torus action."""

    coords: tuple
    rational: bool
    fractions: Optional[tuple] = None  # exact ratios coords[i]/coords[0] when rational

    @staticmethod
    def from_coords(coords) -> "TorusDirection":
        coords = tuple(float(c) for c in coords)
        if coords[0] == 0.0:
            raise ValueError("first torus coordinate must be nonzero")
        ratios = [detect_rational(c / coords[0]) for c in coords]
        if all(r is not None for r in ratios):
            return TorusDirection(coords, True, tuple(ratios))
        return TorusDirection(coords, False, None)


def approximate_closed(
    K: KillingField,
    n: int,
    metric: Optional[MetricField] = None,
    certify_samples: int = 30,
) -> list:
    """Closed Killing fields from the convergents of the generator slope.

    Returns a list of ``(field, fraction)`` pairs where the k-th field has
    generator (1, p_k/q_k).  On an angle-normalized torus action every
    integral line of such a field is periodic with period dividing
    ``angle_period * q_k``.  A rational input slope yields the single
    exact field, already closed.
    """
    if K.generator is None or K.basis is None:
        raise UnsupportedCapabilityError(
            "field carries no torus-generator coordinates (evaluator-only field)"
        )
    gen = np.asarray(K.generator, dtype=float)
    if len(gen) != 2 or gen[0] == 0.0:
        raise UnsupportedCapabilityError("generator must be of the form (a, b) with a != 0")
    alpha = float(gen[1] / gen[0])
    family = KillingFamily(tuple(K.basis), commuting=True)
    exact = detect_rational(alpha)
    if exact is not None:
        field = combine_family(family, (gen[0], gen[0] * exact.numerator / exact.denominator))
        if metric is not None:
            field = certify_killing_field(metric, field, n_samples=certify_samples)
        return [(field, exact)]
    out = []
    for frac in continued_fraction_convergents(alpha, n):
        coeff = (gen[0], gen[0] * frac.numerator / frac.denominator)
        field = combine_family(family, coeff)
        if metric is not None:
            field = certify_killing_field(metric, field, n_samples=certify_samples)
        out.append((field, frac))
    return out


@dataclass(frozen=True, eq=False)
class ApproximationCertificate:
    """Uniform-convergence evidence for a sequence of closed approximants."""

    convergents: tuple            # of Fraction
    gaps: tuple                   # |alpha - p/q|
    sup_field_gaps: tuple         # sampled sup_p |K^n_p - K_p|
    min_f_signs: tuple            # whether min sampled g(K^n, K^n) < 0 persists

    def as_dict(self) -> dict:
        return {
            "convergents": [{"p": f.numerator, "q": f.denominator} for f in self.convergents],
            "gaps": list(self.gaps),
            "sup_field_gaps": list(self.sup_field_gaps),
            "min_f_signs": list(self.min_f_signs),
        }


def certify_uniform_convergence(
    M: ManifoldModel,
    g: MetricField,
    K: KillingField,
    approximants: list,
    samples: int = 500,
    seed: int = 7,
) -> ApproximationCertificate:
    """Sample sup-norm gaps and timelike persistence for the approximants.

    Enforces the certificate invariants: strictly decreasing gaps, the
    best-approximation bound gap < 1/q^2, and non-increasing field gaps.
    """
    if K.generator is None:
        raise UnsupportedCapabilityError("field carries no torus-generator coordinates")
    alpha = float(K.generator[1] / K.generator[0])
    rng = np.random.default_rng(seed)
    pts = M.sample_points(rng, samples)
    base_vals = np.array([K(p) for p in pts])
    gaps = []
    sup_gaps = []
    signs = []
    fractions = []
    for field, frac in approximants:
        fractions.append(frac)
        gaps.append(abs(alpha - frac.numerator / frac.denominator))
        vals = np.array([field(p) for p in pts])
        sup_gaps.append(float(np.max(np.linalg.norm(vals - base_vals, axis=1))))
        fmin = min(float(v @ (g.matrix(p) @ v)) for p, v in zip(pts, vals))
        signs.append(bool(fmin < 0.0))
    for i in range(1, len(gaps)):
        if not gaps[i] < gaps[i - 1]:
            raise AssertionError("convergent gaps must strictly decrease")
        if sup_gaps[i] > sup_gaps[i - 1] + 1e-12:
            raise AssertionError("sup field gaps must not increase")
    for gap, frac in zip(gaps, fractions):
        if gap >= 1.0 / frac.denominator**2:
            raise AssertionError("best-approximation bound violated")
    return ApproximationCertificate(tuple(fractions), tuple(gaps), tuple(sup_gaps), tuple(signs))
