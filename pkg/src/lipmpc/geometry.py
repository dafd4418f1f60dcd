"""Exact and approximate computations on polytopes and ellipsoids.

Polytopes live in H-representation {x : H x <= h}; ellipsoids are
{z : (z - p)' Q (z - p) <= 1} with Q symmetric positive definite, plus a
degenerate "point" variant (Q = None) standing in for an infinitely tight
shape matrix.  All objects are immutable after construction and every
operation is a pure function, so concurrent use is safe.

Linear programs are solved with HiGHS at 1e-9 feasibility tolerances:
set computations compound, so LP slack has to stay well below the 1e-7
tolerance used for set equality.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from .errors import NotConverged, SingularMap, Unbounded

# Set-equality / inclusion tolerance; LPs are solved one decade tighter.
SET_TOL = 1e-7
REDUNDANCY_TOL = 1e-9
_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


def _lp(c, A_ub, b_ub):
    """Minimize c'x s.t. A_ub x <= b_ub, x free. Returns the scipy result."""
    nvar = len(c)
    if A_ub is None or A_ub.shape[0] == 0:
        A_ub, b_ub = None, None
    return linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * nvar,
        method="highs",
        options=_LP_OPTIONS,
    )


class Polytope:
    """Convex polytope {x : H x <= h}.  Zero rows represent the universe."""

    __slots__ = ("H", "h")

    def __init__(self, H, h):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        h = np.asarray(h, dtype=float).ravel()
        if H.size == 0:
            H = H.reshape(0, H.shape[1] if H.ndim == 2 and H.shape[1] else 0)
        if H.shape[0] != h.shape[0]:
            raise ValueError(
                f"row count mismatch: H has {H.shape[0]} rows, h has {h.shape[0]}"
            )
        if not (np.isfinite(H).all() and np.isfinite(h).all()):
            raise ValueError("polytope data must be finite")
        self.H = H
        self.h = h
        self.H.setflags(write=False)
        self.h.setflags(write=False)

    @classmethod
    def universe(cls, dim):
        """The whole of R^dim (no constraints)."""
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def from_bounds(cls, lower, upper):
        """Axis-aligned box {lower <= x <= upper}."""
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise ValueError("bound shape mismatch")
        n = lower.size
        H = np.vstack([np.eye(n), -np.eye(n)])
        h = np.concatenate([upper, -lower])
        return cls(H, h)

    @classmethod
    def singleton(cls, point):
        """The one-point set {point}."""
        return cls.from_bounds(point, point)

    @property
    def dim(self):
        return self.H.shape[1]

    @property
    def n_rows(self):
        return self.H.shape[0]

    @property
    def is_universe(self):
        return self.n_rows == 0

    def contains(self, points, tol=SET_TOL):
        """Membership of one point (1-d input) or many (rows of a matrix)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_universe:
            ok = np.ones(pts.shape[0], dtype=bool)
        else:
            ok = (pts @ self.H.T <= self.h + tol).all(axis=1)
        return bool(ok[0]) if np.asarray(points).ndim == 1 else ok

    def intersect(self, other):
        """Row-stack intersection (no redundancy removal)."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return Polytope(np.vstack([self.H, other.H]), np.concatenate([self.h, other.h]))

    def to_json_dict(self):
        return {"H": self.H.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_json_dict(cls, data):
        return cls(np.array(data["H"], dtype=float), np.array(data["h"], dtype=float))

    def __repr__(self):
        return f"Polytope(rows={self.n_rows}, dim={self.dim})"


class Ellipsoid:
    """Ellipsoid {z : (z - p)' Q (z - p) <= 1}; Q = None marks a point."""

    __slots__ = ("p", "Q", "regularized")

    def __init__(self, p, Q, regularized=False):
        p = np.asarray(p, dtype=float).ravel()
        if not np.isfinite(p).all():
            raise ValueError("ellipsoid center must be finite")
        if Q is not None:
            Q = np.asarray(Q, dtype=float)
            if Q.shape != (p.size, p.size):
                raise ValueError("shape matrix size mismatch")
            if np.max(np.abs(Q - Q.T)) > 1e-9:
                raise ValueError("shape matrix must be symmetric within 1e-9")
            Q = 0.5 * (Q + Q.T)
            if np.linalg.eigvalsh(Q).min() <= 0:
                raise ValueError("shape matrix must be positive definite")
            Q.setflags(write=False)
        self.p = p
        self.Q = Q
        self.regularized = regularized
        self.p.setflags(write=False)

    @classmethod
    def point(cls, p):
        """Degenerate radius-zero ellipsoid at p."""
        return cls(p, None)

    @classmethod
    def ball(cls, center, radius):
        center = np.asarray(center, dtype=float).ravel()
        if radius <= 0:
            return cls.point(center)
        return cls(center, np.eye(center.size) / radius**2)

    @property
    def dim(self):
        return self.p.size

    @property
    def is_point(self):
        return self.Q is None

    def contains(self, points, tol=SET_TOL):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_point:
            ok = np.linalg.norm(pts - self.p, axis=1) <= tol
        else:
            diff = pts - self.p
            ok = np.einsum("ij,jk,ik->i", diff, self.Q, diff) <= 1.0 + tol
        return bool(ok[0]) if np.asarray(points).ndim == 1 else ok

    def boundary_points(self, count, rng):
        """count points on the boundary, uniform in angle of the preimage sphere."""
        if self.is_point:
            return np.tile(self.p, (count, 1))
        z = rng.normal(size=(count, self.dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        # map unit sphere through Q^(-1/2)
        lam, V = np.linalg.eigh(self.Q)
        half = V @ np.diag(1.0 / np.sqrt(lam)) @ V.T
        return self.p + z @ half
    def sample(self, count, rng):
        """count points drawn inside the ellipsoid."""
        if self.is_point:
            return np.tile(self.p, (count, 1))
        pts = self.boundary_points(count, rng)
        r = rng.uniform(size=(count, 1)) ** (1.0 / self.dim)
        return self.p + (pts - self.p) * r

    def semi_axes(self):
        """Semi-axis lengths (1/sqrt of the shape eigenvalues)."""
        if self.is_point:
            return np.zeros(self.dim)
        return 1.0 / np.sqrt(np.linalg.eigvalsh(self.Q))

    def to_json_dict(self):
        return {"p": self.p.tolist(), "Q": None if self.is_point else self.Q.tolist()}

    @classmethod
    def from_json_dict(cls, data):
        Q = data["Q"]
        p = np.array(data["p"], dtype=float)
        return cls.point(p) if Q is None else cls(p, np.array(Q, dtype=float))

    def __repr__(self):
        kind = "point" if self.is_point else f"axes={np.round(self.semi_axes(), 4)}"
        return f"Ellipsoid(p={np.round(self.p, 4)}, {kind})"


# ---------------------------------------------------------------------------
# LP-backed polytope operations
# ---------------------------------------------------------------------------


def chebyshev_center(P):
    """Center and radius of the largest inscribed ball of P.

    The radius is negative exactly when P is empty (for structurally
    empty inputs -- a zero row with negative offset -- it is -inf).
    Raises Unbounded when no finite ball is maximal.
    """
    if P.n_rows == 0:
        raise Unbounded("universe polytope has no Chebyshev ball")
    norms = np.linalg.norm(P.H, axis=1)
    zero = norms <= 0.0
    if zero.any():
        if (P.h[zero] < 0).any():
            return np.full(P.dim, np.nan), -np.inf
        keep = ~zero
        if not keep.any():
            raise Unbounded("no effective constraints")
        P = Polytope(P.H[keep], P.h[keep])
        norms = norms[keep]
    c = np.zeros(P.dim + 1)
    c[-1] = -1.0
    A = np.hstack([P.H, norms[:, None]])
    res = _lp(c, A, P.h)
    if res.status == 3:
        raise Unbounded("polytope admits arbitrarily large inscribed balls")
    if res.status != 0:
        raise SolverFailureLP(res)
    return res.x[:-1], float(res.x[-1])


class SolverFailureLP(RuntimeError):
    """Unexpected LP solver status (not optimal/unbounded)."""

    def __init__(self, res):
        super().__init__(f"LP failed: status={res.status} message={res.message}")


def is_empty(P):
    """True when P contains no point (Chebyshev radius < 0)."""
    try:
        _, r = chebyshev_center(P)
    except Unbounded:
        return False
    return r < 0


def support_function(P, direction):
    """max over x in P of direction'x. Raises Unbounded if unbounded."""
    direction = np.asarray(direction, dtype=float).ravel()
    if P.is_universe:
        if np.linalg.norm(direction) == 0:
            return 0.0
        raise Unbounded("support of the universe polytope")
    res = _lp(-direction, P.H, P.h)
    if res.status == 3:
        raise Unbounded(f"unbounded in direction {direction}")
    if res.status == 2:
        raise ValueError("support function of an empty polytope")
    if res.status != 0:
        raise SolverFailureLP(res)
    return float(-res.fun)


def bounding_box(P):
    """Axis-aligned bounding box (lower, upper) via 2n support LPs."""
    lo = np.empty(P.dim)
    hi = np.empty(P.dim)
    for j in range(P.dim):
        e = np.zeros(P.dim)
        e[j] = 1.0
        hi[j] = support_function(P, e)
        lo[j] = -support_function(P, -e)
    return lo, hi


def box_vertices(P, tol=SET_TOL):
    """Vertices of a (possibly rotated) box polytope.

    Accepts polytopes whose rows pair up as +/- a common orthogonal frame,
    which covers axis-aligned boxes and the eigenbox output of
    ellipsoid_to_polytope.  Raises ValueError otherwise.
    """
    n = P.dim
    norms = np.linalg.norm(P.H, axis=1)
    if (norms <= 0).any():
        raise ValueError("zero rows are not box facets")
    U = P.H / norms[:, None]
    b = P.h / norms
    # pair rows into +/- directions
    dirs, offs = [], []
    used = np.zeros(P.n_rows, dtype=bool)
    for i in range(P.n_rows):
        if used[i]:
            continue
        mate = None
        for j in range(i + 1, P.n_rows):
            if not used[j] and np.allclose(U[i], -U[j], atol=1e-10):
                mate = j
                break
        if mate is None:
            raise ValueError("polytope rows do not pair into a box")
        used[i] = used[mate] = True
        dirs.append(U[i])
        offs.append((b[i], b[mate]))
    if len(dirs) != n:
        raise ValueError(f"expected {n} facet pairs, found {len(dirs)}")
    D = np.array(dirs)
    if np.max(np.abs(D @ D.T - np.eye(n))) > 1e-8:
        raise ValueError("facet directions are not orthogonal")
    verts = []
    for signs in itertools.product((0, 1), repeat=n):
        # coordinate along dir_j is +off_plus or -off_minus
        coord = np.array(
            [offs[j][0] if s == 0 else -offs[j][1] for j, s in enumerate(signs)]
        )
        verts.append(coord @ D)
    return np.array(verts)


def drop_redundant_rows(P, tol=REDUNDANCY_TOL):
    """Remove rows implied by the others (per-row LP test).

    Keeps empty polytopes untouched: redundancy is not meaningful there.
    """
    if P.n_rows <= 1:
        return P
    if is_empty(P):
        return P
    norms = np.linalg.norm(P.H, axis=1)
    keep = [i for i in range(P.n_rows) if norms[i] > 0 or P.h[i] < 0]
    # exact-duplicate cleanup first (cheap, keeps the tightest offset)
    U = np.hstack([P.H / np.where(norms > 0, norms, 1.0)[:, None], (P.h / np.where(norms > 0, norms, 1.0))[:, None]])
    dedup = []
    for i in keep:
        dup = False
        for j in dedup:
            if np.allclose(U[i, :-1], U[j, :-1], atol=1e-12) and U[i, -1] >= U[j, -1] - 1e-12:
                dup = True
                break
        if not dup:
            dedup.append(i)
    keep = dedup
    i = 0
    while i < len(keep) and len(keep) > 1:
        idx = keep[i]
        others = [j for j in keep if j != idx]
        sub = Polytope(P.H[others], P.h[others])
        try:
            val = support_function(sub, P.H[idx])
        except Unbounded:
            i += 1
            continue
        if val <= P.h[idx] + tol:
            keep.pop(i)
        else:
            i += 1
    return Polytope(P.H[keep], P.h[keep])


def poly_subset(P, Q, tol=SET_TOL):
    """True when P is contained in Q (support-function row test)."""
    if Q.is_universe:
        return True
    if is_empty(P):
        return True
    for eta, b in zip(Q.H, Q.h):
        try:
            if support_function(P, eta) > b + tol:
                return False
        except Unbounded:
            return False
    return True


def poly_equal(P, Q, tol=SET_TOL):
    """Set equality tested by mutual inclusion."""
    return poly_subset(P, Q, tol) and poly_subset(Q, P, tol)


# ---------------------------------------------------------------------------
# Ellipsoid calculus
# ---------------------------------------------------------------------------


def ellipsoid_to_polytope(E):
    """Circumscribing box aligned with E's principal axes (E is inside it)."""
    if E.is_point:
        return Polytope.singleton(E.p)
    lam, V = np.linalg.eigh(E.Q)
    rows, offs = [], []
    for j in range(E.dim):
        v = V[:, j]
        r = 1.0 / np.sqrt(lam[j])
        rows.append(v)
        offs.append(v @ E.p + r)
        rows.append(-v)
        offs.append(-(v @ E.p) + r)
    return Polytope(np.array(rows), np.array(offs))


def affine_image_ellipsoid(A, b, E):
    """Exact image {A z + b : z in E} for invertible A.

    Near-singular A is nudged by 1e-9 on the diagonal (the result is
    flagged `regularized`); beyond that, SingularMap is raised.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    n = E.dim
    if A.shape != (n, n):
        raise ValueError("map must be square and match the ellipsoid dimension")
    if E.is_point:
        return Ellipsoid.point(A @ E.p + b)
    regularized = False
    Awork = A
    if np.linalg.cond(A) > 1e12:
        Awork = A + 1e-9 * np.eye(n)
        regularized = True
        if np.linalg.cond(Awork) > 1e14:
            raise SingularMap("matrix is singular beyond 1e-9 regularization")
    Ainv = np.linalg.inv(Awork)
    Qnew = Ainv.T @ E.Q @ Ainv
    return Ellipsoid(Awork @ E.p + b, 0.5 * (Qnew + Qnew.T), regularized=regularized)


def minkowski_outer_ellipsoid(E1, E2):
    """Trace-parameterized outer bound of the Minkowski sum E1 + E2.

    Uses beta = sqrt(trace(Q1^-1)/trace(Q2^-1)), the minimizer of the
    trace of the combined inverse shape.  Point operands translate the
    other set.
    """
    if E1.is_point and E2.is_point:
        return Ellipsoid.point(E1.p + E2.p)
    if E1.is_point:
        return Ellipsoid(E2.p + E1.p, E2.Q)
    if E2.is_point:
        return Ellipsoid(E1.p + E2.p, E1.Q)
    Q1inv = np.linalg.inv(E1.Q)
    Q2inv = np.linalg.inv(E2.Q)
    beta = float(np.sqrt(np.trace(Q1inv) / np.trace(Q2inv)))
    Sinv = (1.0 + 1.0 / beta) * Q1inv + (1.0 + beta) * Q2inv
    Q = np.linalg.inv(Sinv)
    return Ellipsoid(E1.p + E2.p, 0.5 * (Q + Q.T))


def circumscribing_ball(P):
    """Ball centered at the Chebyshev center covering P (via its bounding box)."""
    c, r = chebyshev_center(P)
    if r < 0:
        raise ValueError("cannot circumscribe an empty polytope")
    lo, hi = bounding_box(P)
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    radius = float(np.max(np.linalg.norm(corners - c, axis=1)))
    return Ellipsoid.ball(c, radius)


def circumscribing_box_ellipsoid(P):
    """Axis-aligned ellipsoid through the corners of P's bounding box."""
    lo, hi = bounding_box(P)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    n = half.size
    if (half <= 0).any():
        # collapse along flat axes to a tiny positive width
        half = np.maximum(half, 1e-12)
    Q = np.diag(1.0 / (n * half**2))
    return Ellipsoid(center, Q)


# ---------------------------------------------------------------------------
# Invariant-set machinery
# ---------------------------------------------------------------------------


def pre_set(Acl, Omega, W, S):
    """{x in S : Acl x + w in Omega for all w in W}.

    Each Omega row is mapped through Acl and tightened by the support of W;
    the result is stacked with S and pruned of redundant rows.
    """
    Acl = np.asarray(Acl, dtype=float)
    try:
        sigma = np.array([support_function(W, eta) for eta in Omega.H])
    except Unbounded as exc:
        raise Unbounded("disturbance set W is unbounded") from exc
    pre = Polytope(Omega.H @ Acl, Omega.h - sigma)
    return drop_redundant_rows(pre.intersect(S))


def max_rpi_set(Acl, X, U, K, W, max_iter=100):
    """Maximal robust positive invariant set of x+ = Acl x + w, w in W.

    Fixed point of Omega <- pre_set(Acl, Omega, W, Omega0) starting from
    Omega0 = {H_x x <= h_x, H_u K x <= h_u}.  Returns a possibly-empty
    polytope; emptiness is detected by a negative Chebyshev radius.
    Raises NotConverged (carrying the last iterate) when the cap is hit.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    K = np.asarray(K, dtype=float)
    Omega0 = drop_redundant_rows(
        Polytope(np.vstack([X.H, U.H @ K]), np.concatenate([X.h, U.h]))
    )
    Omega = Omega0
    for _ in range(max_iter):
        nxt = pre_set(Acl, Omega, W, Omega0)
        if is_empty(nxt):
            return nxt
        if poly_subset(nxt, Omega) and poly_subset(Omega, nxt):
            return nxt
        Omega = nxt
    raise NotConverged(
        f"RPI fixed point not reached within {max_iter} iterations", last=Omega
    )
