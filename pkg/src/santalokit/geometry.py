"""Convex/star-shaped body representations and the fundamental metric operations.

Two concrete representations are used throughout:

* ``PolytopeV`` -- a vertex list; volumes, centroids and second moments are
  exact (triangulation from an interior point), intended for n <= 4.
* ``StarBody`` -- a radial function sampled on a ``SphereGrid``; volumes and
  centroids are quadrature sums over the grid.

``Ball`` is a convenience exact body.  Free functions ``support``, ``gauge``,
``volume_star``, ``volume_polytope``, ``centroid`` and ``certify_convex``
dispatch on the representation.

All types are immutable after construction and all operations are pure.
Quadrature sums run in node-index order, so results are bit-reproducible.
"""
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateBody, InputError
from .rng import stream
from .sphere import SphereGrid, ball_volume, sphere_grid

_DEDUP_TOL = 1e-12


class Ball:
    """Euclidean ball; support, gauge and volume are closed-form."""

    def __init__(self, dim: int, radius: float = 1.0, center=None):
        if radius <= 0:
            raise DegenerateBody("ball radius must be positive")
        self.dim = int(dim)
        self.radius = float(radius)
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, float)

    @property
    def volume(self) -> float:
        return ball_volume(self.dim) * self.radius**self.dim

    @property
    def centroid(self):
        return self.center.copy()

    def support(self, u):
        u = np.asarray(u, float)
        scalar = u.ndim == 1
        u2 = np.atleast_2d(u)
        h = u2 @ self.center + self.radius * np.linalg.norm(u2, axis=1)
        return float(h[0]) if scalar else h

    def gauge(self, x):
        # Only meaningful for center 0 (the gauge is taken about the origin).
        x = np.asarray(x, float)
        scalar = x.ndim == 1
        x2 = np.atleast_2d(x)
        if np.any(np.abs(self.center) > 0):
            raise InputError("gauge of a ball is only defined for center 0")
        g = np.linalg.norm(x2, axis=1) / self.radius
        return float(g[0]) if scalar else g

    def contains(self, x, tol: float = 0.0):
        x = np.atleast_2d(np.asarray(x, float))
        return np.linalg.norm(x - self.center, axis=1) <= self.radius * (1 + tol)

    def to_star(self, grid: SphereGrid | None = None) -> "StarBody":
        """StarBody of this ball translated so its star center is the origin.

        Requires the origin strictly inside the ball.
        """
        grid = grid if grid is not None else sphere_grid(self.dim)
        c, R = self.center, self.radius
        if np.linalg.norm(c) >= R:
            raise DegenerateBody("origin is not interior to the ball")
        dot = grid.nodes @ c
        r = dot + np.sqrt(dot * dot + R * R - c @ c)
        return StarBody(grid, r)

    def to_spec(self):
        return {"dim": self.dim, "kind": "ball",
                "radius": self.radius, "center": self.center.tolist()}


class PolytopeV:
    """Convex polytope given by its vertices (V-representation).

    Duplicate vertices (within 1e-12 of the coordinate scale) are merged on
    construction.  Exact volume/centroid/moment computations triangulate the
    hull facets against an interior point and require a full-dimensional
    vertex set; degenerate inputs raise ``DegenerateBody`` when those
    quantities are requested.
    """

    def __init__(self, vertices):
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if v.ndim != 2 or v.shape[0] < 1:
            raise InputError("vertices must be a nonempty (m, n) array")
        if not np.all(np.isfinite(v)):
            raise InputError("vertices must be finite")
        self.vertices = _dedup_rows(v)
        self.dim = v.shape[1]

    # -- exact metric quantities ------------------------------------------

    @cached_property
    def _hull(self):
        if self.dim == 1:
            return None
        try:
            return ConvexHull(self.vertices)
        except QhullError as exc:
            raise DegenerateBody(f"vertex set is not full-dimensional: {exc}") from exc

    @cached_property
    def _triangulation(self):
        """Simplices (k, n+1, n) fanned from the vertex mean, plus their volumes."""
        n = self.dim
        if n == 1:
            lo, hi = self.vertices.min(), self.vertices.max()
            if hi - lo <= 0:
                raise DegenerateBody("1D polytope has zero length")
            simplices = np.array([[[lo], [hi]]])
            vols = np.array([hi - lo])
            return simplices, vols
        hull = self._hull
        apex = self.vertices.mean(axis=0)
        facets = self.vertices[hull.simplices]               # (k, n, n)
        simplices = np.concatenate(
            [facets, np.broadcast_to(apex, (len(facets), 1, n))], axis=1)
        edges = facets - apex                                # (k, n, n)
        vols = np.abs(np.linalg.det(edges)) / _factorial(n)
        return simplices, vols

    @cached_property
    def volume(self) -> float:
        _, vols = self._triangulation
        total = float(vols.sum())
        if total <= 0:
            raise DegenerateBody("polytope has zero volume")
        return total

    @cached_property
    def centroid(self):
        simplices, vols = self._triangulation
        cents = simplices.mean(axis=1)
        return (vols[:, None] * cents).sum(axis=0) / self.volume

    @cached_property
    def second_moment(self):
        """Matrix of integrals over the body of x_i x_j dx (exact)."""
        simplices, vols = self._triangulation
        n = self.dim
        s = simplices.sum(axis=1)                            # (k, n)
        gram = np.einsum("kim,kil->kml", simplices, simplices)
        outer = np.einsum("km,kl->kml", s, s)
        factor = vols / ((n + 1.0) * (n + 2.0))
        return np.einsum("k,kml->ml", factor, gram + outer)

    # -- support & membership ---------------------------------------------

    def support(self, u):
        u = np.asarray(u, float)
        scalar = u.ndim == 1
        u2 = np.atleast_2d(u)
        h = (self.vertices @ u2.T).max(axis=0)
        return float(h[0]) if scalar else h

    def facet_inequalities(self):
        """(A, b) with the body equal to {x : A x <= b}."""
        if self.dim == 1:
            lo, hi = self.vertices.min(), self.vertices.max()
            return np.array([[1.0], [-1.0]]), np.array([hi, -lo])
        eq = self._hull.equations
        return eq[:, :-1], -eq[:, -1]

    def contains(self, x, tol: float = 1e-9):
        A, b = self.facet_inequalities()
        x2 = np.atleast_2d(np.asarray(x, float))
        scale = max(1.0, np.abs(self.vertices).max())
        return (x2 @ A.T - b[None, :]).max(axis=1) <= tol * scale

    # -- transforms ----------------------------------------------------------

    def translate(self, a) -> "PolytopeV":
        return PolytopeV(self.vertices + np.asarray(a, float))

    def linear_image(self, T) -> "PolytopeV":
        return PolytopeV(self.vertices @ np.asarray(T, float).T)

    def to_star(self, grid: SphereGrid | None = None, center=None) -> "StarBody":
        """Radial-sample encoding of the polytope translated by -center.

        ``center`` defaults to the centroid and must be strictly interior.
        """
        grid = grid if grid is not None else sphere_grid(self.dim)
        c = self.centroid if center is None else np.asarray(center, float)
        A, b = self.facet_inequalities()
        bc = b - A @ c
        if np.min(bc) <= 0:
            raise DegenerateBody("center is not strictly interior")
        au = A @ grid.nodes.T                                # (facets, N)
        with np.errstate(divide="ignore"):
            t = np.where(au > 0, bc[:, None] / au, np.inf)
        r = t.min(axis=0)
        if not np.all(np.isfinite(r)):
            raise DegenerateBody("polytope is unbounded in some direction")
        return StarBody(grid, r)

    def to_spec(self):
        return {"dim": self.dim, "kind": "polytopeV",
                "vertices": self.vertices.tolist()}


class StarBody:
    """Star-shaped body about the origin, sampled radially on a sphere grid.

    ``radial[i]`` is the boundary distance along ``grid.nodes[i]``.  The
    gauge between nodes is interpolated linearly in angle for n = 2 and by
    nearest node for n >= 3; the induced error is absorbed by the grid-size
    tolerances of downstream checks.
    """

    def __init__(self, grid: SphereGrid, radial):
        radial = np.asarray(radial, dtype=float)
        if radial.shape != (grid.size,):
            raise InputError("radial must have one value per grid node")
        if np.any(~np.isfinite(radial)) or np.any(radial <= 0):
            raise DegenerateBody("radial function must be finite and positive")
        self.grid = grid
        self.radial = radial

    @property
    def dim(self) -> int:
        return self.grid.dim

    @cached_property
    def boundary_points(self):
        return self.radial[:, None] * self.grid.nodes

    @cached_property
    def volume(self) -> float:
        n = self.dim
        return ball_volume(n) * float(self.grid.weights @ self.radial**n)

    @cached_property
    def centroid(self):
        n = self.dim
        coeff = ball_volume(n) * n / ((n + 1.0) * self.volume)
        return coeff * ((self.grid.weights * self.radial**(n + 1)) @ self.grid.nodes)

    @cached_property
    def second_moment(self):
        n = self.dim
        w = self.grid.weights * self.radial**(n + 2)
        M = np.einsum("i,im,il->ml", w, self.grid.nodes, self.grid.nodes)
        return ball_volume(n) * n / (n + 2.0) * M

    def radial_at(self, units):
        """Radial function at arbitrary unit directions (interpolated)."""
        units = np.asarray(units, float)
        scalar = units.ndim == 1
        u2 = np.atleast_2d(units)
        n = self.dim
        if n == 1:
            r = np.where(u2[:, 0] > 0, self.radial[0], self.radial[1])
        elif n == 2:
            theta = np.mod(np.arctan2(u2[:, 1], u2[:, 0]), 2.0 * np.pi)
            N = self.grid.size
            pos = theta * N / (2.0 * np.pi)
            i0 = np.floor(pos).astype(int) % N
            frac = pos - np.floor(pos)
            i1 = (i0 + 1) % N
            r = (1.0 - frac) * self.radial[i0] + frac * self.radial[i1]
        else:
            idx = self.grid.nearest_index(u2)
            r = self.radial[idx]
        return float(r[0]) if scalar else r

    def gauge(self, x):
        """Minkowski functional: smallest t > 0 with x in t*K (0 at x = 0)."""
        x = np.asarray(x, float)
        scalar = x.ndim == 1
        x2 = np.atleast_2d(x)
        norms = np.linalg.norm(x2, axis=1)
        out = np.zeros(len(x2))
        nz = norms > 0
        if np.any(nz):
            units = x2[nz] / norms[nz, None]
            out[nz] = norms[nz] / self.radial_at(units)
        return float(out[0]) if scalar else out

    def support(self, u):
        """Support function from the boundary samples: max_i r_i <nodes_i, u>."""
        u = np.asarray(u, float)
        scalar = u.ndim == 1
        u2 = np.atleast_2d(u)
        pts = self.boundary_points
        out = np.empty(len(u2))
        block = max(1, int(2**22 // max(1, pts.shape[0])))
        for s in range(0, len(u2), block):
            out[s:s + block] = (pts @ u2[s:s + block].T).max(axis=0)
        return float(out[0]) if scalar else out

    def scale(self, t: float) -> "StarBody":
        return StarBody(self.grid, t * self.radial)

    def linear_image(self, T) -> "StarBody":
        """Image body T(K), resampled on the same grid via the gauge identity
        r_{TK}(u) = 1 / gauge_K(T^{-1} u)."""
        Tinv = np.linalg.inv(np.asarray(T, float))
        pre = self.grid.nodes @ Tinv.T
        return StarBody(self.grid, 1.0 / self.gauge(pre))

    def is_centrally_symmetric(self, tol: float = 1e-9) -> bool:
        half = self.grid.size // 2
        r, s = self.radial[:half], self.radial[half:]
        return bool(np.max(np.abs(r - s)) <= tol * max(1.0, np.max(self.radial)))

    def to_spec(self):
        return {"dim": self.dim, "kind": "starbody",
                "grid_size": self.grid.size, "radial": self.radial.tolist()}


# ---------------------------------------------------------------------------
# free-function front ends


def support(K, u):
    """Support function h_K(u) = max_{x in K} <x, u>."""
    _check_nonzero(u)
    return K.support(u)


def gauge(K, x):
    """Gauge (Minkowski functional) of a star body; 0 at the origin by convention."""
    return K.gauge(x)


def volume_star(K: StarBody) -> float:
    """Volume by polar-coordinates quadrature: v_n * sum_i w_i r_i^n."""
    return K.volume


def volume_polytope(K: PolytopeV) -> float:
    """Exact polytope volume (triangulation from an interior point), n <= 4."""
    if K.dim > 4:
        raise InputError("exact polytope volume is limited to n <= 4")
    return K.volume


def centroid(K):
    """Center of mass of the body."""
    return K.centroid


def certify_convex(K: StarBody, tol: float = 1e-6, pairs: int = 4096,
                   min_angle: float | None = None, seed: int = 0) -> bool:
    """Sampled convexity certificate for a star body.

    Draws boundary-point pairs (a, b) whose directions are at least
    ``min_angle`` apart and checks gauge((a+b)/2) <= 1 + tol.  The angular
    separation keeps genuinely convex bodies from failing on radial
    interpolation noise; macroscopic non-convexity (what the certificate is
    for) produces violations on well-separated chords.
    """
    n = K.dim
    if n == 1:
        return True
    if min_angle is None:
        min_angle = 0.35 if n == 2 else 0.8
    N = K.grid.size
    rng = stream(seed, 9101)
    i = rng.integers(0, N, size=3 * pairs)
    j = rng.integers(0, N, size=3 * pairs)
    cosang = np.einsum("ij,ij->i", K.grid.nodes[i], K.grid.nodes[j])
    keep = cosang <= np.cos(min_angle)
    i, j = i[keep][:pairs], j[keep][:pairs]
    if n == 2:
        # Structured sweep: every node against rotations by fixed fractions.
        for step in (N // 8, N // 4, 3 * N // 8, N // 2 - N // 16):
            k = np.arange(N)
            i = np.concatenate([i, k])
            j = np.concatenate([j, (k + step) % N])
    a = K.boundary_points[i]
    b = K.boundary_points[j]
    mids = 0.5 * (a + b)
    g = K.gauge(mids)
    return bool(np.max(g) <= 1.0 + tol)


# ---------------------------------------------------------------------------
# serialization


def body_from_spec(spec: dict):
    """Rebuild a body from its JSON-compatible record."""
    try:
        kind = spec["kind"]
        dim = int(spec["dim"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"body spec missing kind/dim: {exc}") from exc
    if kind == "polytopeV":
        return PolytopeV(np.asarray(spec["vertices"], float))
    if kind == "starbody":
        grid = sphere_grid(dim, int(spec["grid_size"]))
        return StarBody(grid, np.asarray(spec["radial"], float))
    if kind == "ball":
        return Ball(dim, float(spec.get("radius", 1.0)),
                    np.asarray(spec.get("center", np.zeros(dim)), float))
    raise InputError(f"unknown body kind {kind!r}")


# ---------------------------------------------------------------------------
# helpers


def _check_nonzero(u):
    u = np.asarray(u, float)
    norms = np.linalg.norm(np.atleast_2d(u), axis=1)
    if np.any(norms == 0):
        raise InputError("direction must be nonzero")


def _factorial(n: int) -> float:
    out = 1.0
    for k in range(2, n + 1):
        out *= k
    return out


def _dedup_rows(v: np.ndarray) -> np.ndarray:
    scale = max(1.0, np.abs(v).max())
    kept: list[np.ndarray] = []
    for row in v:
        if not any(np.max(np.abs(row - q)) <= _DEDUP_TOL * scale for q in kept):
            kept.append(row)
    return np.array(kept)
