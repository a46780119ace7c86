"""Computational manifolds, metrics, connections and quotient identity.

Points live in ambient coordinates.  A manifold is either a flat quotient
(ambient chart modulo a deck group), an embedded codimension-one level set
``constraint(p) = 0``, or a product quotient carrying both a constraint and
a deck group.  Tangent vectors are stored in ambient coordinates and
projected onto the tangent space when needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import OffManifoldError, SingularMetricError

Array = np.ndarray

# Finite-difference steps: central differences at double precision.
FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-4

CONSTRAINT_TOL = 1e-8
IDENTIFY_TOL = 1e-6
DEFAULT_MAX_WORD_LEN = 6


def _as_components(v) -> Array:
    """Accept a plain array or a TangentVector and return ambient components."""
    if isinstance(v, TangentVector):
        return v.components
    return np.asarray(v, dtype=float)


@dataclass(frozen=True, eq=False)
class DeckElement:
    """An affine deck transformation ``p -> matrix @ p + offset``.

    ``word`` records the element as a product of generators: a tuple of
    ``(generator_index, exponent)`` pairs with exponent +1 or -1, leftmost
    factor applied last.
    """

    matrix: Array
    offset: Array
    word: tuple = ()

    def apply(self, p: Array) -> Array:
        return self.matrix @ np.asarray(p, dtype=float) + self.offset

    def apply_vector(self, v: Array) -> Array:
        return self.matrix @ _as_components(v)

    def compose(self, other: "DeckElement") -> "DeckElement":
        """Return self ∘ other."""
        return DeckElement(
            self.matrix @ other.matrix,
            self.matrix @ other.offset + self.offset,
            simplify_word(self.word + other.word),
        )

    def inverse(self) -> "DeckElement":
        inv = np.linalg.inv(self.matrix)
        word = tuple((i, -e) for (i, e) in reversed(self.word))
        return DeckElement(inv, -inv @ self.offset, word)

    def is_identity(self, tol: float = 1e-9) -> bool:
        n = self.matrix.shape[0]
        return (
            np.abs(self.matrix - np.eye(n)).max() <= tol
            and np.abs(self.offset).max() <= tol
        )

    def key(self) -> bytes:
        """Hashable fingerprint used to deduplicate group elements."""
        data = np.concatenate([self.matrix.ravel(), self.offset])
        return np.round(data, 9).tobytes()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"DeckElement(word={word_str(self.word)})"


def simplify_word(word: tuple) -> tuple:
    """Cancel adjacent inverse pairs in a generator word."""
    out: list = []
    for letter in word:
        if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def word_str(word: tuple) -> str:
    if not word:
        return "e"
    return ".".join(f"g{i}" if e > 0 else f"g{i}^-1" for i, e in word)


def identity_element(dim: int) -> DeckElement:
    return DeckElement(np.eye(dim), np.zeros(dim), ())


def make_deck_generator(index: int, matrix, offset) -> DeckElement:
    return DeckElement(
        np.asarray(matrix, dtype=float),
        np.asarray(offset, dtype=float),
        ((index, 1),),
    )


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """A computational manifold.

    Parameters
    ----------
    kind : str
        One of ``"flat_quotient"``, ``"embedded"``, ``"product_quotient"``.
    ambient_dim, intrinsic_dim : int
        Dimensions of the ambient chart space and the manifold itself.
    constraint : callable, optional
        Scalar function whose zero level set is the manifold (codimension
        one).  Required for embedded and product-quotient kinds.
    constraint_grad, constraint_hess : callable, optional
        Analytic gradient / Hessian of the constraint; finite differences
        are used when absent.
    deck_generators : tuple of DeckElement
        Generators of the deck group for quotient kinds.
    fundamental_box : array (ambient_dim, 2), optional
        Coordinate bounds of a fundamental region, used for sampling and
        for greedy reduction of faraway points.
    sampler : callable(rng) -> point, optional
        Draws one point on the manifold; default samples the box and
        projects onto the constraint set.
    quotient_distance_fn : callable(points, q) -> distances, optional
        Vectorized exact quotient distance; the generic path reduces
        points one by one and is much slower.
    """

    kind: str
    ambient_dim: int
    intrinsic_dim: int
    constraint: Optional[Callable[[Array], float]] = None
    constraint_grad: Optional[Callable[[Array], Array]] = None
    constraint_hess: Optional[Callable[[Array], Array]] = None
    deck_generators: tuple = ()
    fundamental_box: Optional[Array] = None
    sampler: Optional[Callable] = None
    quotient_distance_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.intrinsic_dim < 2:
            raise ValueError("manifolds here have dimension >= 2")
        if self.kind not in ("flat_quotient", "embedded", "product_quotient"):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.kind != "flat_quotient" and self.constraint is None:
            raise ValueError(f"{self.kind} manifolds need a constraint")

    # -- constraint handling -------------------------------------------------

    def constraint_residual(self, p: Array) -> float:
        if self.constraint is None:
            return 0.0
        return abs(float(self.constraint(np.asarray(p, dtype=float))))

    def check_on_manifold(self, p: Array, tol: float = CONSTRAINT_TOL) -> None:
        r = self.constraint_residual(p)
        if r > tol:
            raise OffManifoldError(f"constraint residual {r:.3e} exceeds {tol:.1e}")

    def grad_constraint(self, p: Array) -> Array:
        p = np.asarray(p, dtype=float)
        if self.constraint_grad is not None:
            return np.asarray(self.constraint_grad(p), dtype=float)
        g = np.empty(self.ambient_dim)
        for k in range(self.ambient_dim):
            e = np.zeros(self.ambient_dim)
            e[k] = FD_STEP_FIRST
            g[k] = (self.constraint(p + e) - self.constraint(p - e)) / (2 * FD_STEP_FIRST)
        return g

    def hess_constraint(self, p: Array) -> Array:
        p = np.asarray(p, dtype=float)
        if self.constraint_hess is not None:
            return np.asarray(self.constraint_hess(p), dtype=float)
        n = self.ambient_dim
        h = FD_STEP_SECOND
        H = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            H[k] = (self.grad_constraint(p + e) - self.grad_constraint(p - e)) / (2 * h)
        return 0.5 * (H + H.T)

    def project_point(self, p: Array, tol: float = 1e-13, max_iter: int = 20) -> Array:
        """Newton-project a nearby ambient point onto the constraint set."""
        p = np.asarray(p, dtype=float).copy()
        if self.constraint is None:
            return p
        for _ in range(max_iter):
            r = float(self.constraint(p))
            if abs(r) <= tol:
                break
            grad = self.grad_constraint(p)
            p -= r * grad / float(grad @ grad)
        return p

    def tangent_project(self, p: Array, v) -> Array:
        """Euclidean-orthogonal projection of ``v`` onto the tangent space."""
        v = _as_components(v)
        if self.constraint is None:
            return np.array(v, dtype=float)
        grad = self.grad_constraint(p)
        return v - (grad @ v) / (grad @ grad) * grad

    def tangent_basis(self, p: Array) -> Array:
        """Euclidean-orthonormal basis of T_pM, rows are basis vectors.

        Built by Gram-Schmidt from ambient coordinate directions projected
        onto the tangent space; deterministic in the coordinate order.
        """
        basis = []
        for k in range(self.ambient_dim):
            e = np.zeros(self.ambient_dim)
            e[k] = 1.0
            v = self.tangent_project(p, e)
            for b in basis:
                v = v - (b @ v) * b
            nrm = float(np.linalg.norm(v))
            if nrm > 1e-8:
                basis.append(v / nrm)
            if len(basis) == self.intrinsic_dim:
                break
        if len(basis) != self.intrinsic_dim:
            raise RuntimeError("failed to build a tangent basis")
        return np.array(basis)

    # -- sampling -------------------------------------------------------------

    def sample_point(self, rng: np.random.Generator) -> Array:
        if self.sampler is not None:
            return np.asarray(self.sampler(rng), dtype=float)
        if self.fundamental_box is None:
            raise ValueError("manifold has neither sampler nor fundamental box")
        lo = self.fundamental_box[:, 0]
        hi = self.fundamental_box[:, 1]
        for _ in range(100):
            p = rng.uniform(lo, hi)
            if self.constraint is None:
                return p
            q = self.project_point(p)
            if self.constraint_residual(q) <= CONSTRAINT_TOL:
                return q
        raise RuntimeError("sampling failed to project onto the constraint set")

    def sample_points(self, rng: np.random.Generator, n: int) -> Array:
        return np.array([self.sample_point(rng) for _ in range(n)])

    # -- deck group -----------------------------------------------------------

    def deck_moves(self) -> list:
        """Generators and their inverses."""
        moves = []
        for g in self.deck_generators:
            moves.append(g)
            moves.append(g.inverse())
        return moves

    def deck_ball(self, radius: int) -> list:
        """All distinct deck elements of word length <= radius (BFS)."""
        ident = identity_element(self.ambient_dim)
        ball = [ident]
        seen = {ident.key()}
        frontier = [ident]
        moves = self.deck_moves()
        for _ in range(radius):
            new_frontier = []
            for el in frontier:
                for m in moves:
                    cand = m.compose(el)
                    k = cand.key()
                    if k not in seen:
                        seen.add(k)
                        ball.append(cand)
                        new_frontier.append(cand)
            frontier = new_frontier
        return ball

    def reduce_to_fundamental(self, p: Array, max_iter: int = 100000):
        """Greedily move ``p`` into the fundamental box.

        Returns ``(reduced_point, element)`` with ``element.apply(p) ==
        reduced_point``.  Box intervals are treated as half-open so that a
        point sitting exactly on the upper face gets reduced.
        """
        p = np.asarray(p, dtype=float)
        ident = identity_element(self.ambient_dim)
        if self.fundamental_box is None or not self.deck_generators:
            return p.copy(), ident
        lo = self.fundamental_box[:, 0]
        hi = self.fundamental_box[:, 1]

        def score(q):
            excess = np.maximum(lo - q, 0.0).sum() + np.maximum(q - hi, 0.0).sum()
            outside = int(np.count_nonzero((q < lo) | (q >= hi)))
            return (excess, outside)

        moves = self.deck_moves()
        current = p.copy()
        element = ident
        cur_score = score(current)
        for _ in range(max_iter):
            if cur_score == (0.0, 0):
                break
            best = None
            for m in moves:
                cand = m.apply(current)
                s = score(cand)
                if s < cur_score and (best is None or s < best[0]):
                    best = (s, cand, m)
            if best is None:
                break
            cur_score, current, m = best
            element = m.compose(element)
        return current, element

    def quotient_distance(self, points, q) -> Array:
        """Distance in the quotient between each of ``points`` and ``q``."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        q = np.asarray(q, dtype=float)
        if self.quotient_distance_fn is not None:
            d = np.asarray(self.quotient_distance_fn(pts, q), dtype=float)
        elif not self.deck_generators:
            d = np.linalg.norm(pts - q, axis=1)
        else:
            q_red, _ = self.reduce_to_fundamental(q)
            ball = self.deck_ball(3)
            d = np.empty(len(pts))
            for i, p in enumerate(pts):
                p_red, _ = self.reduce_to_fundamental(p)
                d[i] = min(
                    float(np.linalg.norm(g.apply(p_red) - q_red)) for g in ball
                )
        return float(d[0]) if single else d


def reduce_point(
    M: ManifoldModel,
    p: Array,
    q: Array,
    max_word_len: int = DEFAULT_MAX_WORD_LEN,
    tol: float = IDENTIFY_TOL,
) -> Optional[DeckElement]:
    """Find a deck word carrying ``p`` to ``q``.

    Returns an element ``g`` with ``|g.apply(p) - q| <= tol``, or ``None``.
    Both points are first reduced into the fundamental box, so the returned
    word may be longer than ``max_word_len`` when the points are far apart;
    the bound applies to the residual search after reduction.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not M.deck_generators:
        if np.linalg.norm(p - q) <= tol:
            return identity_element(M.ambient_dim)
        return None
    p_red, wp = M.reduce_to_fundamental(p)
    q_red, wq = M.reduce_to_fundamental(q)
    for s in M.deck_ball(min(max_word_len, 3)):
        if np.linalg.norm(s.apply(p_red) - q_red) <= tol:
            return wq.inverse().compose(s).compose(wp)
    for s in M.deck_ball(max_word_len):
        if np.linalg.norm(s.apply(p) - q) <= tol:
            return s
    return None


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A tangent vector stored in ambient coordinates at a base point."""

    base: Array
    components: Array


def tangent_vector(M: ManifoldModel, p, v) -> TangentVector:
    """Construct a TangentVector, projecting ``v`` onto T_pM."""
    p = np.asarray(p, dtype=float)
    return TangentVector(p, M.tangent_project(p, v))


@dataclass(frozen=True, eq=False)
class MetricField:
    """A field of symmetric bilinear forms in ambient coordinates.

    ``evaluator(p)`` returns the ambient matrix of the form; restricted to
    tangent vectors it is the metric.  ``jacobian(p)``, when provided,
    returns the array ``d[k,i,j] = ∂_k g_ij`` and replaces finite
    differences in the connection coefficients.
    """

    manifold: ManifoldModel
    evaluator: Callable[[Array], Array]
    signature: tuple
    role: str = "lorentzian"  # "riemannian" | "lorentzian" | "semi_riemannian"
    index: int = 1
    jacobian: Optional[Callable[[Array], Array]] = None

    def matrix(self, p: Array) -> Array:
        return np.asarray(self.evaluator(np.asarray(p, dtype=float)), dtype=float)


def metric_eval(g: MetricField, p, v, w) -> float:
    """Evaluate g_p(v, w) for tangent vectors in ambient coordinates.

    Uses the polarization identity so that the result is exactly symmetric
    in (v, w) down to the last bit.
    """
    p = np.asarray(p, dtype=float)
    g.manifold.check_on_manifold(p)
    G = g.matrix(p)
    v = _as_components(v)
    w = _as_components(w)
    a = v + w
    b = v - w
    return 0.25 * (float(a @ (G @ a)) - float(b @ (G @ b)))


def metric_jacobian(g: MetricField, p: Array, step: float = FD_STEP_FIRST) -> Array:
    """d[k,i,j] = ∂_k g_ij, analytic when available, else central FD."""
    p = np.asarray(p, dtype=float)
    if g.jacobian is not None:
        return np.asarray(g.jacobian(p), dtype=float)
    n = g.manifold.ambient_dim
    d = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        d[k] = (g.matrix(p + e) - g.matrix(p - e)) / (2 * step)
    return d


def christoffel(g: MetricField, p, force_fd: bool = False) -> Array:
    """Connection coefficients Gamma[k,i,j] of the ambient metric at p.

    Torsion-free by construction (symmetric in i, j).  Raises
    SingularMetricError when the ambient matrix is numerically degenerate.
    """
    p = np.asarray(p, dtype=float)
    G = g.matrix(p)
    n = G.shape[0]
    if abs(float(np.linalg.det(G))) < 1e-12:
        raise SingularMetricError("metric degenerate at evaluation point")
    if force_fd:
        d = metric_jacobian(MetricField(g.manifold, g.evaluator, g.signature, g.role, g.index, None), p)
    else:
        d = metric_jacobian(g, p)
    # lowered coefficients: 0.5 * (d_i g_lj + d_j g_li - d_l g_ij)
    low = 0.5 * (
        np.einsum("ilj->lij", d) + np.einsum("jli->lij", d) - d
    )
    gamma = np.linalg.solve(G, low.reshape(n, n * n)).reshape(n, n, n)
    return gamma


def apply_christoffel(gamma: Array, v: Array, w: Array) -> Array:
    return np.einsum("kij,i,j->k", gamma, v, w)


def metric_orthogonal_project(g: MetricField, p: Array, u: Array) -> Array:
    """Project an ambient vector g-orthogonally onto the tangent space."""
    M = g.manifold
    if M.constraint is None:
        return np.array(u, dtype=float)
    grad = M.grad_constraint(p)
    G = g.matrix(p)
    ginv_grad = np.linalg.solve(G, grad)
    denom = float(grad @ ginv_grad)
    return u - (float(grad @ u) / denom) * ginv_grad


def covariant_derivative(g: MetricField, X: Callable[[Array], Array], v, p) -> Array:
    """Levi-Civita covariant derivative (∇_v X)(p) in ambient coordinates.

    ``X`` must be evaluable in a neighborhood of the manifold.  For
    constrained manifolds the ambient result is projected g-orthogonally
    onto the tangent space.
    """
    p = np.asarray(p, dtype=float)
    v = _as_components(v)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return np.zeros_like(p)
    h = FD_STEP_FIRST
    u = v / nv
    dX = (np.asarray(X(p + h * u), dtype=float) - np.asarray(X(p - h * u), dtype=float)) / (2 * h) * nv
    gamma = christoffel(g, p)
    amb = dX + apply_christoffel(gamma, v, np.asarray(X(p), dtype=float))
    return metric_orthogonal_project(g, p, amb)


def signature_of_gram(gram: Array, tol: float = 1e-10) -> tuple:
    """Count (positive, negative) eigenvalues of a symmetric Gram matrix."""
    eig = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    return (int(np.sum(eig > tol)), int(np.sum(eig < -tol)))


def tangent_gram(g: MetricField, p: Array) -> Array:
    """Matrix of the metric in a Euclidean-orthonormal tangent basis."""
    basis = g.manifold.tangent_basis(p)
    G = g.matrix(p)
    return basis @ G @ basis.T
