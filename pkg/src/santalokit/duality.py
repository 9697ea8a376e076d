"""Polar duality, Santalo points, volume products and measure-theoretic
volume-product inequalities.

The polar of K with respect to a center z is

    K^{*z} = { y : <y - z, x - z> <= 1 for all x in K } = z + (K - z)^o .

``polar_wrt`` returns the recentered polar (K - z)^o, which is star-shaped
about the origin; its volume equals |K^{*z}|.  The Santalo point s(K)
minimizes z -> |K^{*z}| and is characterized by centroid(K^{*z}) = z,
i.e. centroid((K - z)^o) = 0.
"""
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from .errors import CenterOutside, DegenerateBody, HypothesisFail, InputError, SolverFail
from .geometry import Ball, PolytopeV, StarBody
from .kernels import RhoKernel
from .reports import Check, Report
from .rng import stream
from .sphere import ball_volume, sphere_grid


@dataclass(frozen=True)
class PolarResult:
    """Polar body (recentered to the origin), the center used, and its volume."""
    body: object
    center: np.ndarray
    volume: float


# ---------------------------------------------------------------------------
# polar bodies


def polar_wrt(K, z=None) -> PolarResult:
    """Polar of K with respect to an interior point z (default 0).

    Returns the recentered polar (K - z)^o.  Raises ``CenterOutside`` when z
    is not strictly inside K (the polar would be unbounded).
    """
    z = _as_center(K, z)
    if isinstance(K, Ball):
        return _polar_ball(K, z)
    if isinstance(K, PolytopeV):
        return _polar_polytope(K, z)
    if isinstance(K, StarBody):
        return _polar_star(K, z)
    raise InputError(f"unsupported body type {type(K).__name__}")


def _as_center(K, z):
    n = K.dim
    if z is None:
        return np.zeros(n)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (n,):
        raise InputError("center has wrong dimension")
    return z


def _polar_ball(K: Ball, z) -> PolarResult:
    c = K.center - z
    if np.linalg.norm(c) >= K.radius:
        raise CenterOutside("center outside the ball")
    if np.linalg.norm(c) == 0:
        body = Ball(K.dim, 1.0 / K.radius)
        return PolarResult(body, z, body.volume)
    grid = sphere_grid(K.dim)
    h = grid.nodes @ c + K.radius          # exact support of the shifted ball
    body = StarBody(grid, 1.0 / h)
    return PolarResult(body, z, body.volume)


def _polar_polytope(K: PolytopeV, z) -> PolarResult:
    W = K.vertices - z
    n = K.dim
    if n == 1:
        lo, hi = W.min(), W.max()
        if not (lo < 0 < hi):
            raise CenterOutside("center outside the segment")
        body = PolytopeV(np.array([[1.0 / lo], [1.0 / hi]]))
        return PolarResult(body, z, body.volume)
    if not K.contains(z, tol=-1e-12)[0]:
        raise CenterOutside("center outside the polytope")
    if n == 2:
        verts = _polar_polygon(W[K._hull.vertices])
        body = PolytopeV(verts)
        return PolarResult(body, z, abs(_shoelace_area(verts)))
    halfspaces = np.hstack([W, -np.ones((len(W), 1))])   # <y, w_i> - 1 <= 0
    try:
        hs = HalfspaceIntersection(halfspaces, np.zeros(n))
    except QhullError as exc:
        raise CenterOutside(f"polar is unbounded or degenerate: {exc}") from exc
    body = PolytopeV(hs.intersections)
    return PolarResult(body, z, body.volume)


def _polar_star(K: StarBody, z) -> PolarResult:
    if K.gauge(z) >= 1.0 - 1e-12:
        raise CenterOutside("center outside the star body")
    h = _support_minus(K, z, K.grid.nodes)
    if np.min(h) <= 0:
        raise CenterOutside("center outside the body (nonpositive support)")
    body = StarBody(K.grid, 1.0 / h)
    return PolarResult(body, z, body.volume)


def _support_minus(K: StarBody, z, directions):
    """Support function of K - z at the given directions, from the samples."""
    pts = K.boundary_points - z
    out = np.empty(len(directions))
    block = max(1, int(2**22 // max(1, len(pts))))
    for s in range(0, len(directions), block):
        out[s:s + block] = (pts @ directions[s:s + block].T).max(axis=0)
    return out


# exact polygon polar: vertices of (K)^o are consecutive-edge intersections
def _polar_polygon(W):
    """Polar polygon of a ccw-ordered convex polygon W containing the origin."""
    W2 = np.roll(W, -1, axis=0)
    det = W[:, 0] * W2[:, 1] - W[:, 1] * W2[:, 0]
    if np.any(det <= 0):
        raise CenterOutside("origin not strictly inside the polygon")
    return np.column_stack([(W2[:, 1] - W[:, 1]) / det,
                            (W[:, 0] - W2[:, 0]) / det])


def _shoelace_area(V):
    V2 = np.roll(V, -1, axis=0)
    return 0.5 * float(np.sum(V[:, 0] * V2[:, 1] - V[:, 1] * V2[:, 0]))


def _polygon_centroid(V):
    V2 = np.roll(V, -1, axis=0)
    cross = V[:, 0] * V2[:, 1] - V[:, 1] * V2[:, 0]
    A = 0.5 * cross.sum()
    cx = np.sum((V[:, 0] + V2[:, 0]) * cross) / (6.0 * A)
    cy = np.sum((V[:, 1] + V2[:, 1]) * cross) / (6.0 * A)
    return np.array([cx, cy])


# ---------------------------------------------------------------------------
# volume product and the Santalo point


def volume_product(K, z=None) -> float:
    """Mahler-type product |K| * |K^{*z}|."""
    pol = polar_wrt(K, z)
    return K.volume * pol.volume


def _polar_volume_centroid(K, z):
    """(|K^{*z}|, centroid of (K - z)^o); fast exact path for polygons."""
    if isinstance(K, PolytopeV) and K.dim == 2:
        W = K.vertices[K._hull.vertices] - z
        det = _edge_dets(W)
        if np.any(det <= 0):
            raise CenterOutside("center outside the polygon")
        P = _polar_polygon(W)
        return abs(_shoelace_area(P)), _polygon_centroid(P)
    pol = polar_wrt(K, z)
    return pol.volume, pol.body.centroid


def _edge_dets(W):
    W2 = np.roll(W, -1, axis=0)
    return W[:, 0] * W2[:, 1] - W[:, 1] * W2[:, 0]


def santalo_point(K, tol: float = 1e-6, max_iter: int = 200,
                  kappa: float = 0.5, probe_scale: float = 1e-3):
    """Solve for the Santalo point of a bounded convex body.

    Damped iteration on the fixed-point residual c(z) = centroid((K-z)^o):
    since c(z) is parallel to the gradient of z -> |K^{*z}| (ascent
    direction), the update steps along -c(z) with backtracking, falling back
    to derivative-free minimization of the polar volume on stall.  The
    result is post-verified against 2n axis probes.

    Raises ``SolverFail`` (carrying the best iterate) on non-convergence.
    """
    n = K.dim
    diam = _diameter_estimate(K)
    atol = tol * diam
    starts = [np.asarray(K.centroid, float)]
    delta0 = 0.05 * diam
    for d in range(n):
        for sgn in (+1.0, -1.0):
            starts.append(starts[0] + sgn * delta0 * _unit(n, d))

    best_z, best_v, best_res = None, np.inf, np.inf
    for z0 in starts:
        try:
            z, res = _santalo_iterate(K, z0, atol, max_iter, kappa)
        except CenterOutside:
            continue
        v, _ = _polar_volume_centroid(K, z)
        if res <= atol and v < best_v:
            best_z, best_v, best_res = z, v, res
        elif best_z is None or (res < best_res and best_v == np.inf):
            if v < best_v or best_z is None:
                best_z, best_res = z, res
                best_v = v if res <= atol else np.inf

    if best_z is None or best_res > atol:
        raise SolverFail("santalo point iteration did not converge",
                         best=best_z, residual=best_res)

    # post-verification: no axis probe may beat the solution
    delta = max(probe_scale * diam, 10 * atol)
    for d in range(n):
        for sgn in (+1.0, -1.0):
            zp = best_z + sgn * delta * _unit(n, d)
            try:
                vp, _ = _polar_volume_centroid(K, zp)
            except (CenterOutside, DegenerateBody):
                continue
            if vp < best_v * (1.0 - 1e-9):
                raise SolverFail("probe point beats the solved Santalo point",
                                 best=best_z, residual=best_res)
    return best_z


def _santalo_iterate(K, z0, atol, max_iter, kappa0):
    z = z0.copy()
    _, c = _polar_volume_centroid(K, z)
    res = np.linalg.norm(c)
    kappa = kappa0
    stall = 0
    for _ in range(max_iter):
        if res <= atol:
            return z, res
        step_ok = False
        for _ in range(30):
            z_new = z - kappa * c
            try:
                _, c_new = _polar_volume_centroid(K, z_new)
            except (CenterOutside, DegenerateBody):
                kappa *= 0.5
                continue
            res_new = np.linalg.norm(c_new)
            if res_new < res:
                z, c, res = z_new, c_new, res_new
                kappa = min(kappa * 1.25, kappa0)
                step_ok = True
                break
            kappa *= 0.5
        if not step_ok:
            stall += 1
            if stall >= 2:
                break
    if res <= atol:
        return z, res
    # derivative-free fallback on the polar volume itself
    def vol(zz):
        try:
            v, _ = _polar_volume_centroid(K, zz)
            return v
        except (CenterOutside, DegenerateBody):
            return np.inf

    opt = optimize.minimize(vol, z, method="Nelder-Mead",
                            options={"xatol": atol * 1e-2, "fatol": 0.0,
                                     "maxiter": 4000, "adaptive": True})
    z = opt.x
    _, c = _polar_volume_centroid(K, z)
    return z, float(np.linalg.norm(c))


def _diameter_estimate(K) -> float:
    if isinstance(K, Ball):
        return 2.0 * K.radius
    if isinstance(K, PolytopeV):
        v = K.vertices
        lo, hi = v.min(axis=0), v.max(axis=0)
        return float(np.linalg.norm(hi - lo))
    return 2.0 * float(np.max(K.radial))


def _unit(n, d):
    e = np.zeros(n)
    e[d] = 1.0
    return e


def bs_check(K, tol_eq: float = 1e-3, santalo_tol: float = 1e-6) -> Report:
    """Volume product at the Santalo point against the ball bound v_n^2.

    Near-equality (|relative margin| < tol_eq) flags the body as an
    ellipsoid candidate and cross-checks with the second-moment ellipsoid
    test on the recentered body.
    """
    n = K.dim
    vn2 = ball_volume(n) ** 2
    z = santalo_point(K, tol=santalo_tol)
    vol_polar, c = _polar_volume_centroid(K, z)
    vp = K.volume * vol_polar
    margin = (vn2 - vp) / vn2
    rep = Report(scenario="bs-check")
    rep.values.update(volume=K.volume, polar_volume=vol_polar, volume_product=vp,
                      ball_bound=vn2, margin_rel=margin,
                      santalo_point=z.tolist(),
                      fixed_point_residual=float(np.linalg.norm(c)))
    rep.add_check(Check(name="volume product below ball bound",
                        tag="blaschke-santalo", observed=vp,
                        bound=vn2 * (1.0 + tol_eq), tol=tol_eq,
                        passed=vp <= vn2 * (1.0 + tol_eq)))
    if abs(margin) < tol_eq:
        rep.values["ellipsoid_candidate"] = True
        from .symmetrization import ellipsoid_test
        try:
            K0 = K.translate(-z) if isinstance(K, PolytopeV) else K
            sub = ellipsoid_test(K0)
            rep.values["ellipsoid_defect"] = sub.values["defect"]
            rep.warnings.extend(sub.warnings)
        except (InputError, HypothesisFail) as exc:
            rep.warnings.append(f"ellipsoid cross-check skipped: {exc}")
    else:
        rep.values["ellipsoid_candidate"] = False
    return rep


# ---------------------------------------------------------------------------
# measures


class DensityMeasure:
    """Borel measure with density against Lebesgue, in one of two classes.

    ``unconditional-logconcave``: density e^{-W} with W unconditional and
    convex.  ``rotation-invariant``: density h(|x|) with h non-increasing
    and t -> h(e^t) log-concave.  ``validate`` spot-checks the class
    structure by sampling and raises ``HypothesisFail`` on violation.
    """

    UNCONDITIONAL = "unconditional-logconcave"
    ROTATION = "rotation-invariant"

    def __init__(self, kind: str, dim: int, *, W: Callable | None = None,
                 h: Callable | None = None, effective_radius: float = 8.0,
                 name: str = "custom"):
        if kind not in (self.UNCONDITIONAL, self.ROTATION):
            raise InputError(f"unknown measure kind {kind!r}")
        if kind == self.UNCONDITIONAL and W is None:
            raise InputError("unconditional measure needs a potential W")
        if kind == self.ROTATION and h is None:
            raise InputError("rotation-invariant measure needs a profile h")
        self.kind = kind
        self.dim = int(dim)
        self.W = W
        self.h = h
        self.effective_radius = float(effective_radius)
        self.name = name

    def density(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        if self.kind == self.UNCONDITIONAL:
            return np.exp(-np.asarray(self.W(x), float))
        return np.asarray(self.h(np.linalg.norm(x, axis=1)), float)

    @classmethod
    def gaussian(cls, dim: int, sigma: float = 1.0,
                 kind: str | None = None) -> "DensityMeasure":
        """Standard Gaussian density e^{-|x|^2 / (2 sigma^2)} (both classes)."""
        kind = kind or cls.ROTATION
        s2 = 2.0 * sigma * sigma
        if kind == cls.UNCONDITIONAL:
            return cls(kind, dim, W=lambda x: np.sum(x * x, axis=-1) / s2,
                       effective_radius=8.0 * sigma, name="gaussian")
        return cls(kind, dim, h=lambda r: np.exp(-r * r / s2),
                   effective_radius=8.0 * sigma, name="gaussian")

    @classmethod
    def lebesgue_truncated(cls, dim: int, radius: float = 50.0) -> "DensityMeasure":
        """h = 1 on [0, radius], 0 beyond: Lebesgue on a large ball."""
        return cls(cls.ROTATION, dim, h=lambda r: (r <= radius).astype(float),
                   effective_radius=radius, name="lebesgue-truncated")

    def validate(self, seed: int = 0, samples: int = 10_000, slack: float = 1e-9):
        rng = stream(seed, 5301)
        R = self.effective_radius
        x = rng.uniform(-R, R, size=(samples, self.dim))
        y = rng.uniform(-R, R, size=(samples, self.dim))
        if self.kind == self.UNCONDITIONAL:
            dm = self.density(0.5 * (x + y))
            dx, dy = self.density(x), self.density(y)
            bad = dm * dm < dx * dy * (1.0 - slack)
            if np.any(bad):
                k = int(np.argmax(bad))
                raise HypothesisFail("density is not log-concave",
                                     witness=(x[k].tolist(), y[k].tolist()))
            signs = rng.choice([-1.0, 1.0], size=x.shape)
            d1, d2 = self.density(x), self.density(signs * x)
            denom = np.maximum(np.maximum(d1, d2), 1e-300)
            if np.max(np.abs(d1 - d2) / denom) > 1e-12:
                raise HypothesisFail("density is not unconditional")
        else:
            r = np.sort(rng.uniform(0.0, R, size=samples))
            hv = np.asarray(self.h(r), float)
            if np.any(hv[1:] > hv[:-1] * (1.0 + slack) + slack):
                raise HypothesisFail("radial profile is not non-increasing")
            t = rng.uniform(np.log(1e-6 * R + 1e-12), np.log(R), size=(samples, 2))
            hm = np.asarray(self.h(np.exp(t.mean(axis=1))), float)
            h1 = np.asarray(self.h(np.exp(t[:, 0])), float)
            h2 = np.asarray(self.h(np.exp(t[:, 1])), float)
            bad = hm * hm < h1 * h2 * (1.0 - slack)
            if np.any(bad):
                k = int(np.argmax(bad))
                raise HypothesisFail("h(e^t) is not log-concave",
                                     witness=tuple(t[k].tolist()))


def measure_of_star(mu: DensityMeasure, K: StarBody, n_radial: int = 64) -> float:
    """mu(K) by polar-coordinates quadrature with Gauss-Legendre radii."""
    n = K.dim
    xg, wg = np.polynomial.legendre.leggauss(n_radial)
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    r = K.radial[:, None] * xg[None, :]                     # (N, q)
    pts = r[:, :, None] * K.grid.nodes[:, None, :]
    dens = mu.density(pts.reshape(-1, n)).reshape(r.shape)
    ray = (wg[None, :] * r ** (n - 1) * dens).sum(axis=1) * K.radial
    return n * ball_volume(n) * float(K.grid.weights @ ray)


def measure_of_ball(mu: DensityMeasure, dim: int, radius: float = 1.0) -> float:
    if mu.kind == DensityMeasure.ROTATION:
        val, _ = integrate.quad(
            lambda s: s ** (dim - 1) * float(np.asarray(mu.h(np.array([s])))[0]),
            0.0, radius, limit=200)
        return dim * ball_volume(dim) * val
    grid = sphere_grid(dim)
    return measure_of_star(mu, StarBody(grid, np.full(grid.size, radius)))


def measure_product_check(mu: DensityMeasure, K, tol: float = 1e-2,
                          eq_tol: float = 1e-3, seed: int = 0,
                          n_radial: int = 64, validate: bool = True) -> Report:
    """Check mu(K) mu(K^o) <= mu(B_2^n)^2 for the two admissible classes.

    The unconditional class requires K unconditional; the rotation-invariant
    class requires K centrally symmetric.  Violated preconditions raise
    ``HypothesisFail`` naming the failed check.
    """
    n = K.dim
    if mu.dim != n:
        raise InputError("measure and body dimensions differ")
    if validate:
        mu.validate(seed=seed)
    if mu.kind == DensityMeasure.UNCONDITIONAL:
        if not _is_unconditional(K):
            raise HypothesisFail("body is not unconditional")
    else:
        if not _is_centrally_symmetric(K):
            raise HypothesisFail("body is not centrally symmetric")

    grid = sphere_grid(n)
    K_star = K.to_star(grid, center=np.zeros(n)) if isinstance(K, PolytopeV) \
        else (K.to_star(grid) if isinstance(K, Ball) else K)
    polar = polar_wrt(K, np.zeros(n)).body
    if isinstance(polar, Ball):
        polar = polar.to_star(grid)
    elif isinstance(polar, PolytopeV):
        polar = polar.to_star(grid, center=np.zeros(n))

    mK = measure_of_star(mu, K_star, n_radial)
    mP = measure_of_star(mu, polar, n_radial)
    mB = measure_of_ball(mu, n)
    margin = (mB * mB - mK * mP) / (mB * mB)

    rep = Report(scenario="measure-check")
    rep.values.update(mu_K=mK, mu_polar=mP, mu_ball=mB,
                      product=mK * mP, bound=mB * mB, margin_rel=margin,
                      measure_kind=mu.kind)
    rep.add_check(Check(name="measure volume product below ball bound",
                        tag="measure-santalo", observed=mK * mP,
                        bound=mB * mB * (1.0 + tol), tol=tol,
                        passed=mK * mP <= mB * mB * (1.0 + tol)))
    rep.values["equality_within"] = bool(abs(margin) <= eq_tol)
    return rep


def _is_unconditional(K, tol: float = 1e-9) -> bool:
    n = K.dim
    if isinstance(K, Ball):
        return np.linalg.norm(K.center) <= tol
    if isinstance(K, PolytopeV):
        scale = max(1.0, np.abs(K.vertices).max())
        tree = cKDTree(K.vertices)
        for mask in range(1, 2**n):
            signs = np.array([(-1.0 if (mask >> d) & 1 else 1.0) for d in range(n)])
            d, _ = tree.query(K.vertices * signs)
            if np.max(d) > tol * scale:
                return False
        return True
    if isinstance(K, StarBody) and n == 2:
        N = K.grid.size
        idx = np.arange(N)
        r = K.radial
        scale = np.max(r)
        flip_x = r[(N // 2 - idx) % N]      # theta -> pi - theta
        flip_y = r[(N - idx) % N]           # theta -> -theta
        return bool(max(np.max(np.abs(r - flip_x)),
                        np.max(np.abs(r - flip_y))) <= tol * scale)
    if isinstance(K, StarBody):
        # sampled check with grid-level tolerance (nearest-node interpolation)
        rng = stream(0, 5401)
        x = rng.normal(size=(2000, n))
        signs = rng.choice([-1.0, 1.0], size=x.shape)
        g1, g2 = K.gauge(x), K.gauge(signs * x)
        return bool(np.max(np.abs(g1 - g2) / np.maximum(g1, 1e-12)) <= 5e-2)
    raise InputError(f"unsupported body type {type(K).__name__}")


def _is_centrally_symmetric(K, tol: float = 1e-9) -> bool:
    if isinstance(K, Ball):
        return np.linalg.norm(K.center) <= tol
    if isinstance(K, PolytopeV):
        scale = max(1.0, np.abs(K.vertices).max())
        tree = cKDTree(K.vertices)
        d, _ = tree.query(-K.vertices)
        return bool(np.max(d) <= tol * scale)
    if isinstance(K, StarBody):
        return K.is_centrally_symmetric(tol)
    raise InputError(f"unsupported body type {type(K).__name__}")
