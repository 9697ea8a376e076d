"""Log-concave function machinery: level bodies, centering, dual functions.

To a nonnegative function f and a center z we attach the level body

    K_z = { x : int_0^inf f(z + r x) r^{n-1} dr >= 1 },

whose radial function is r_z(u) = (int_0^inf r^{n-1} f(z + r u) dr)^{1/n}.
For log-concave f the set K_z is a convex body, the map z -> centroid(K_z)
has a zero z0 (``find_center`` solves for it), and integrating in polar
coordinates gives the exact identity  int f(z + x) dx = n |K_z|.

``polar_function`` builds the largest admissible partner g of f under the
pointwise duality constraint  f(x) g(y) <= rho^2(<x-z, y-z>),  and
``functional_santalo_verify`` checks the resulting integral inequality

    int f * int g <= ( int rho(|x|^2) dx )^2 .
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateBody, HypothesisFail, InputError, QuadFail, SolverFail
from .geometry import Ball, PolytopeV, StarBody, certify_convex
from .kernels import RhoKernel, c_n_rho
from .reports import Check, Report
from .rng import stream
from .sphere import SphereGrid, ball_volume, sphere_grid

_RADIAL_FLOOR = 1e-300


@lru_cache(maxsize=16)
def _gauss(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w            # mapped to [0, 1]


# ---------------------------------------------------------------------------
# function families


class LogConcaveFn:
    """A log-concave density f = e^{-phi} with evaluation and decay bounds.

    Subclasses provide the evaluator, an effective-support box used to
    truncate quadrature, and a sampler covering that support.  ``ray_integrals``
    computes int_0^inf s^{n-1} f(z + s u) ds for a batch of unit directions,
    which is the single quadrature primitive behind the level body, the
    centering solver and all the integral checks.
    """

    def __init__(self, dim: int, name: str = "custom"):
        self.dim = int(dim)
        self.name = name

    # -- required surface -------------------------------------------------

    def __call__(self, x):
        raise NotImplementedError

    def support_box(self):
        """(lo, hi) arrays bounding the effective support of f."""
        raise NotImplementedError

    def sample_support(self, rng, m: int):
        lo, hi = self.support_box()
        return rng.uniform(lo, hi, size=(m, self.dim))

    def potential(self, x):
        """phi = -log f, +inf where f vanishes."""
        v = np.asarray(self(x), float)
        with np.errstate(divide="ignore"):
            return np.where(v > 0, -np.log(np.maximum(v, _RADIAL_FLOOR)), np.inf)

    def decay_certificate(self):
        """(a, b, c, d) with a*chi_{bB} <= f <= d e^{-c|x|}, anchored at the
        origin; None when f has no mass near the origin."""
        return None

    # -- quadrature primitive ----------------------------------------------

    def ray_integrals(self, z, units, target_rtol: float = 1e-9,
                      max_points: int = 8192):
        """int_0^inf s^{n-1} f(z + s u) ds for each unit row of ``units``.

        Composite Gauss-Legendre on the ray's intersection with the support
        box, panel-doubled until the relative change per ray drops below
        ``target_rtol``.  Raises ``QuadFail`` if still above 1e-5 at the
        point budget.
        """
        z = np.asarray(z, float)
        units = np.atleast_2d(np.asarray(units, float))
        t0, t1 = self._ray_window(z, units)
        prev = None
        pts = 256
        while True:
            vals = self._gl_on_windows(z, units, t0, t1, pts)
            if prev is not None:
                scale = np.maximum(np.max(np.abs(vals)), _RADIAL_FLOOR)
                delta = np.max(np.abs(vals - prev)) / scale
                if delta <= target_rtol:
                    return vals
                if pts >= max_points:
                    if delta <= 1e-5:
                        return vals
                    raise QuadFail(
                        f"ray quadrature stuck at relative change {delta:.2e}")
            prev = vals
            pts *= 2

    def _ray_window(self, z, units):
        """Parameter window [t0, t1] of each ray inside the support box."""
        lo, hi = self.support_box()
        m = len(units)
        t0 = np.zeros(m)
        t1 = np.full(m, np.inf)
        for d in range(self.dim):
            u = units[:, d]
            with np.errstate(divide="ignore", invalid="ignore"):
                a = (lo[d] - z[d]) / u
                b = (hi[d] - z[d]) / u
            lo_t = np.where(u > 0, a, np.where(u < 0, b, -np.inf))
            hi_t = np.where(u > 0, b, np.where(u < 0, a, np.inf))
            inside = (z[d] >= lo[d]) & (z[d] <= hi[d])
            lo_t = np.where(u == 0, np.where(inside, -np.inf, np.inf), lo_t)
            hi_t = np.where(u == 0, np.where(inside, np.inf, -np.inf), hi_t)
            t0 = np.maximum(t0, lo_t)
            t1 = np.minimum(t1, hi_t)
        t1 = np.maximum(t1, t0)                    # empty window -> zero length
        bound = np.linalg.norm(hi - lo) + np.linalg.norm(z) + 1.0
        return t0, np.minimum(t1, bound)

    def _gl_on_windows(self, z, units, t0, t1, pts):
        n = self.dim
        panels = max(4, pts // 16)
        xg, wg = _gauss(16)
        edges = np.linspace(0.0, 1.0, panels + 1)
        offs = (edges[:-1, None] + xg[None, :] / panels).ravel()   # (panels*16,)
        wts = np.tile(wg / panels, panels)
        length = t1 - t0                                           # (m,)
        s = t0[:, None] + length[:, None] * offs[None, :]          # (m, k)
        pts_xyz = z[None, None, :] + s[:, :, None] * units[:, None, :]
        fv = np.asarray(self(pts_xyz.reshape(-1, n)), float).reshape(s.shape)
        integ = (wts[None, :] * s ** (n - 1) * fv).sum(axis=1) * length
        return integ

    # -- convenience integrals ----------------------------------------------

    def integral(self, z=None, grid: SphereGrid | None = None, **quad) -> float:
        """int_{R^n} f by polar-coordinates quadrature about z."""
        grid = grid if grid is not None else sphere_grid(self.dim)
        z = np.zeros(self.dim) if z is None else np.asarray(z, float)
        rays = self.ray_integrals(z, grid.nodes, **quad)
        return self.dim * ball_volume(self.dim) * float(grid.weights @ rays)

    def integral_bruteforce(self, q_per_axis: int = 128) -> float:
        """Tensor-product quadrature over the support box (test oracle)."""
        lo, hi = self.support_box()
        xg, wg = _gauss(q_per_axis)
        axes = [lo[d] + (hi[d] - lo[d]) * xg for d in range(self.dim)]
        wts = [(hi[d] - lo[d]) * wg for d in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*wts, indexing="ij")
        w = np.ones(len(pts))
        for m in wmesh:
            w *= m.ravel()
        return float(w @ np.asarray(self(pts), float))

    def validate(self, seed: int = 0, samples: int = 10_000, slack: float = 1e-9):
        """Sampled midpoint log-concavity check plus mass positivity."""
        rng = stream(seed, 6101)
        x = self.sample_support(rng, samples)
        y = self.sample_support(rng, samples)
        fx, fy = np.asarray(self(x), float), np.asarray(self(y), float)
        fm = np.asarray(self(0.5 * (x + y)), float)
        bad = fm * fm < fx * fy * (1.0 - slack)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise HypothesisFail("function is not log-concave",
                                 witness=(x[k].tolist(), y[k].tolist()))
        total = self.integral()
        if not (0.0 < total < np.inf):
            raise HypothesisFail(f"integral of f is {total}, not in (0, inf)")


class GaussianFn(LogConcaveFn):
    """f(x) = scale * exp(-|T (x - shift)|^2)."""

    def __init__(self, T=None, shift=None, scale: float = 1.0, dim: int | None = None):
        if T is None and dim is None:
            raise InputError("need T or dim")
        T = np.eye(dim) if T is None else np.atleast_2d(np.asarray(T, float))
        super().__init__(T.shape[0], name="gaussian")
        self.T = T
        self.shift = np.zeros(self.dim) if shift is None else np.asarray(shift, float)
        self.scale = float(scale)
        self.sigma_min = float(np.linalg.svd(T, compute_uv=False).min())
        if self.sigma_min <= 0:
            raise InputError("T must be invertible")

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        q = np.einsum("ij,ij->i", x @ self.T.T - self.shift @ self.T.T,
                      x @ self.T.T - self.shift @ self.T.T)
        return self.scale * np.exp(-q)

    def potential(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        y = (x - self.shift) @ self.T.T
        return np.einsum("ij,ij->i", y, y) - np.log(self.scale)

    def support_box(self):
        half = 9.0 / self.sigma_min
        return self.shift - half, self.shift + half

    def sample_support(self, rng, m: int):
        g = rng.normal(size=(m, self.dim)) / np.sqrt(2.0)
        core = self.shift + np.linalg.solve(self.T, g.T).T
        # widen the tails a little so the sampler covers low-density regions
        stretch = rng.choice([1.0, 1.0, 1.0, 2.0, 3.0], size=(m, 1))
        return self.shift + (core - self.shift) * stretch

    def exact_integral(self) -> float:
        return self.scale * np.pi ** (self.dim / 2.0) / abs(np.linalg.det(self.T))

    def decay_certificate(self):
        smax = float(np.linalg.svd(self.T, compute_uv=False).max())
        p = float(np.linalg.norm(self.shift))
        b = max(0.25 / smax, 1e-6)
        a = self.scale * np.exp(-(smax * (b + p)) ** 2)
        c = self.sigma_min
        d = self.scale * np.exp(0.25 + c * p)
        return a, b, c, d


class IndicatorFn(LogConcaveFn):
    """f = scale * indicator of a convex body; ray integrals are exact."""

    def __init__(self, body, scale: float = 1.0):
        super().__init__(body.dim, name="indicator")
        self.body = body
        self.scale = float(scale)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        if isinstance(self.body, StarBody):
            inside = self.body.gauge(x) <= 1.0
        else:
            inside = self.body.contains(x, tol=0.0)
        return self.scale * np.asarray(inside, float)

    def support_box(self):
        b = self.body
        if isinstance(b, Ball):
            return b.center - b.radius, b.center + b.radius
        if isinstance(b, PolytopeV):
            return b.vertices.min(axis=0), b.vertices.max(axis=0)
        r = float(np.max(b.radial))
        return -r * np.ones(self.dim), r * np.ones(self.dim)

    def sample_support(self, rng, m: int):
        lo, hi = self.support_box()
        out = np.empty((0, self.dim))
        for _ in range(64):
            cand = rng.uniform(lo, hi, size=(2 * m, self.dim))
            keep = np.asarray(self(cand), float) > 0
            out = np.vstack([out, cand[keep]])
            if len(out) >= m:
                return out[:m]
        return np.vstack([out, rng.uniform(lo, hi, size=(m - len(out), self.dim))])

    def ray_integrals(self, z, units, **_):
        z = np.asarray(z, float)
        units = np.atleast_2d(np.asarray(units, float))
        t0, t1 = _convex_ray_bounds(self.body, z, units)
        n = self.dim
        return self.scale * np.clip(t1**n - t0**n, 0.0, None) / n

    def decay_certificate(self):
        if isinstance(self.body, StarBody):
            b = 0.99 * float(np.min(self.body.radial))
        elif isinstance(self.body, Ball):
            b = self.body.radius - np.linalg.norm(self.body.center)
            if b <= 0:
                return None
        else:
            A, bb = self.body.facet_inequalities()
            b = float(np.min(bb / np.linalg.norm(A, axis=1)))
            if b <= 0:
                return None
        lo, hi = self.support_box()
        R = max(np.linalg.norm(lo), np.linalg.norm(hi))
        return self.scale, b, 1.0, self.scale * np.exp(R)


class ExpGaugeFn(LogConcaveFn):
    """f(x) = scale * exp(-gauge_B(x)) for a star-shaped body B about 0."""

    def __init__(self, body, scale: float = 1.0):
        super().__init__(body.dim, name="exp-gauge")
        self.body = body
        self.scale = float(scale)
        if isinstance(body, Ball):
            self._rmax = body.radius
        elif isinstance(body, PolytopeV):
            self._rmax = float(np.linalg.norm(body.vertices, axis=1).max())
        else:
            self._rmax = float(np.max(body.radial))

    def _gauge(self, x):
        if isinstance(self.body, PolytopeV):
            A, b = self.body.facet_inequalities()
            x2 = np.atleast_2d(np.asarray(x, float))
            return np.clip((x2 @ A.T) / b[None, :], 0.0, None).max(axis=1)
        return self.body.gauge(x)

    def __call__(self, x):
        return self.scale * np.exp(-self._gauge(x))

    def potential(self, x):
        return self._gauge(x) - np.log(self.scale)

    def support_box(self):
        half = 50.0 * self._rmax
        return -half * np.ones(self.dim), half * np.ones(self.dim)

    def sample_support(self, rng, m: int):
        g = rng.gamma(self.dim + 1.0, 1.0, size=m)
        u = rng.normal(size=(m, self.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = 1.0 / np.maximum(self._gauge(u), 1e-12)
        return (g * r)[:, None] * u

    def decay_certificate(self):
        rmin = 1.0 / max(float(self._gauge(np.eye(self.dim))[0]), 1e-12)
        return self.scale * np.exp(-1.0), min(self._rmax, rmin), 1.0 / self._rmax, self.scale


@dataclass
class Profile1D:
    """One-dimensional log-concave factor with its effective support."""
    fn: Callable
    lo: float
    hi: float

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "Profile1D":
        return cls(lambda s: np.where(s >= 0, np.exp(-rate * np.maximum(s, 0.0)), 0.0),
                   0.0, 45.0 / rate)

    @classmethod
    def gaussian(cls, center: float = 0.0, width: float = 1.0) -> "Profile1D":
        return cls(lambda s: np.exp(-((s - center) / width) ** 2),
                   center - 9.0 * width, center + 9.0 * width)


class Product1DFn(LogConcaveFn):
    """f(x) = prod_d p_d(x_d) for log-concave 1D profiles p_d."""

    def __init__(self, profiles):
        super().__init__(len(profiles), name="product")
        self.profiles = list(profiles)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.ones(len(x))
        for d, p in enumerate(self.profiles):
            out *= np.asarray(p.fn(x[:, d]), float)
        return out

    def support_box(self):
        lo = np.array([p.lo for p in self.profiles])
        hi = np.array([p.hi for p in self.profiles])
        return lo, hi


class CustomLogConcave(LogConcaveFn):
    """Wrap an arbitrary evaluator with an explicit support box."""

    def __init__(self, fn: Callable, dim: int, lo, hi, name: str = "custom"):
        super().__init__(dim, name=name)
        self._fn = fn
        self._lo = np.asarray(lo, float)
        self._hi = np.asarray(hi, float)

    def __call__(self, x):
        return np.asarray(self._fn(np.atleast_2d(np.asarray(x, float))), float)

    def support_box(self):
        return self._lo, self._hi


def _convex_ray_bounds(body, z, units):
    """Intersection parameters [t0, t1] of rays z + t u (t >= 0) with a convex body."""
    m = len(units)
    if isinstance(body, Ball):
        w = z - body.center
        b = np.einsum("ij,j->i", units, w)
        c = w @ w - body.radius**2
        disc = b * b - c
        hit = disc > 0
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = np.where(hit, np.maximum(-b - sq, 0.0), 0.0)
        t1 = np.where(hit, np.maximum(-b + sq, 0.0), 0.0)
        return t0, np.maximum(t1, t0)
    if isinstance(body, PolytopeV):
        A, bb = body.facet_inequalities()
        num = bb[None, :] - (A @ z)[None, :]            # (1, F)
        den = units @ A.T                               # (m, F)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / den
        t_hi = np.where(den > 0, ratio, np.inf).min(axis=1)
        t_lo = np.where(den < 0, ratio, -np.inf).max(axis=1)
        feasible = np.all((den != 0) | (num >= 0), axis=1)
        t_lo = np.maximum(t_lo, 0.0)
        t_hi = np.where(feasible, np.maximum(t_hi, t_lo), t_lo)
        return t_lo, t_hi
    if isinstance(body, StarBody):
        # convex star body about the origin: gauge is convex along the ray
        g0 = body.gauge(z[None, :])[0]
        rmax = float(np.max(body.radial))
        hi = np.full(m, np.linalg.norm(z) + 2.0 * rmax)
        if g0 <= 1.0:
            lo = np.zeros(m)
            t1 = _bisect_gauge_crossing(body, z, units, lo, hi)
            return lo, t1
        # z outside: locate the gauge minimum along each ray, then bracket
        tmin = _ternary_gauge_min(body, z, units, np.zeros(m), hi)
        gmin = body.gauge(z[None, :] + tmin[:, None] * units)
        inside = gmin <= 1.0
        t0 = np.where(inside, _bisect_gauge_crossing(body, z, units,
                                                     np.zeros(m), tmin,
                                                     descending=True), 0.0)
        t1 = np.where(inside, _bisect_gauge_crossing(body, z, units, tmin, hi), 0.0)
        return t0, np.maximum(t1, t0)
    raise InputError(f"unsupported body type {type(body).__name__}")


def _bisect_gauge_crossing(body, z, units, lo, hi, descending=False, iters=60):
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = body.gauge(z[None, :] + mid[:, None] * units)
        if descending:
            outside = g > 1.0
            lo = np.where(outside, mid, lo)
            hi = np.where(outside, hi, mid)
        else:
            inside = g <= 1.0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _ternary_gauge_min(body, z, units, lo, hi, iters=80):
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        g1 = body.gauge(z[None, :] + m1[:, None] * units)
        g2 = body.gauge(z[None, :] + m2[:, None] * units)
        take_lo = g1 <= g2
        hi = np.where(take_lo, m2, hi)
        lo = np.where(take_lo, lo, m1)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# level bodies and centering


@dataclass
class CenteredPair:
    """Solved center z0 with the level body K_{z0} and its centroid residual."""
    z0: np.ndarray
    body: StarBody
    centroid_residual: float


def radial_moment(f: LogConcaveFn, z, u, **quad) -> float:
    """r_z(u) = (int_0^inf r^{n-1} f(z + r u) dr)^{1/n} for a unit direction."""
    u = np.asarray(u, float)
    vals = f.ray_integrals(np.asarray(z, float), u[None, :], **quad)
    return float(vals[0]) ** (1.0 / f.dim)


def body_Kz(f: LogConcaveFn, z, grid: SphereGrid | None = None,
            certify: bool = False, allow_degenerate: bool = False,
            **quad) -> StarBody:
    """Level body K_z of f as a StarBody on the grid.

    With ``certify=True`` the convexity certificate is run on the result and
    a failure raises ``DegenerateBody`` (for log-concave f the level body is
    a convex body, so a failure indicates bad inputs or quadrature).
    """
    grid = grid if grid is not None else sphere_grid(f.dim)
    z = np.asarray(z, float)
    rays = f.ray_integrals(z, grid.nodes, **quad)
    if np.any(rays <= 0):
        if not allow_degenerate:
            raise DegenerateBody(
                "level body has empty rays; is z inside the support of f?")
        rays = np.maximum(rays, _RADIAL_FLOOR)
    body = StarBody(grid, rays ** (1.0 / f.dim))
    if certify and not certify_convex(body):
        raise DegenerateBody("level body failed the convexity certificate")
    return body


def find_center(f: LogConcaveFn, grid: SphereGrid | None = None,
                tol: float | None = None, max_iter: int = 500,
                kappa0: float = 0.25, **quad) -> CenteredPair:
    """Solve for z0 with centroid(K_{z0}) = 0.

    n = 1 uses bisection for the mass-splitting point.  n >= 2 runs a damped
    iteration z <- z + kappa * centroid(K_z) with backtracking (the centroid
    field points from z toward the mass, so the iteration is attracting),
    falling back to derivative-free minimization of |centroid|^2 on stall.
    Raises ``SolverFail`` carrying the best iterate.
    """
    n = f.dim
    lo, hi = f.support_box()
    scale = float(np.max(hi - lo)) / 2.0
    atol = (1e-6 if tol is None else tol) * scale
    if n == 1:
        return _find_center_1d(f, lo[0], hi[0], atol)
    grid = grid if grid is not None else sphere_grid(n)

    def G(z):
        return body_Kz(f, z, grid, allow_degenerate=True, **quad).centroid

    z = _weighted_median(f, lo, hi)
    c = G(z)
    res = np.linalg.norm(c)
    kappa = kappa0
    for _ in range(max_iter):
        if res <= atol:
            break
        moved = False
        for _ in range(40):
            z_new = z + kappa * c
            c_new = G(z_new)
            res_new = np.linalg.norm(c_new)
            if res_new < res:
                z, c, res = z_new, c_new, res_new
                kappa = min(kappa * 1.3, 0.5)
                moved = True
                break
            kappa *= 0.5
        if not moved:
            break
    if res > atol:
        opt = optimize.minimize(lambda zz: float(np.sum(G(zz) ** 2)), z,
                                method="Nelder-Mead",
                                options={"xatol": atol * 1e-2, "fatol": 0.0,
                                         "maxiter": 2000, "adaptive": True})
        z = opt.x
        res = float(np.linalg.norm(G(z)))
    if res > atol:
        raise SolverFail("centering iteration did not converge",
                         best=z, residual=res)
    body = body_Kz(f, z, grid, **quad)
    return CenteredPair(z0=z, body=body, centroid_residual=res)


def _find_center_1d(f: LogConcaveFn, lo, hi, atol) -> CenteredPair:
    def f1(s):
        return float(np.asarray(f(np.array([[s]])), float)[0])

    total, _ = integrate.quad(f1, lo, hi, limit=200)
    if total <= 0:
        raise SolverFail("function has no mass", best=None, residual=np.inf)

    def half_gap(zz):
        left, _ = integrate.quad(f1, lo, zz, limit=200)
        return left - total / 2.0

    z0 = float(optimize.brentq(half_gap, lo, hi, xtol=1e-14))
    grid = sphere_grid(1)
    body = body_Kz(f, np.array([z0]), grid)
    return CenteredPair(z0=np.array([z0]), body=body,
                        centroid_residual=abs(float(body.centroid[0])))


def _weighted_median(f: LogConcaveFn, lo, hi, q: int = 33):
    axes = [np.linspace(lo[d], hi[d], q) for d in range(f.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.asarray(f(pts), float)
    if w.sum() <= 0:
        return 0.5 * (lo + hi)
    z = np.empty(f.dim)
    for d in range(f.dim):
        order = np.argsort(pts[:, d])
        cw = np.cumsum(w[order])
        k = int(np.searchsorted(cw, 0.5 * cw[-1]))
        z[d] = pts[order, d][min(k, len(order) - 1)]
    return z


# ---------------------------------------------------------------------------
# pointwise duality hypothesis and the dual function


def _as_fn(f, support, dim):
    if isinstance(f, LogConcaveFn):
        return f
    if support is None:
        raise InputError("plain evaluators need an explicit support box")
    lo, hi = support
    return CustomLogConcave(f, dim, lo, hi)


def hypothesis_check(f1, f2, rho: RhoKernel, z=None, samples: int = 100_000,
                     seed: int = 0, support1=None, support2=None,
                     dim: int | None = None, slack: float = 1e-9) -> Report:
    """Sampled check of f1(x) f2(y) <= rho^2(<x-z, y-z>) on <x-z, y-z> > 0.

    Stratified pairs over both effective supports plus adversarial pairs
    (x = y and boundary-scaled points).  Report-only: carries the maximum
    violation ratio and the witness pair; pass iff ratio <= 1 + slack.
    """
    if dim is None:
        dim = f1.dim if isinstance(f1, LogConcaveFn) else len(np.atleast_1d(z))
    z = np.zeros(dim) if z is None else np.asarray(z, float)
    F1 = _as_fn(f1, support1, dim)
    F2 = _as_fn(f2, support2, dim)
    rng = stream(seed, 6201)
    m = max(64, samples)
    x = F1.sample_support(rng, m)
    y = F2.sample_support(rng, m)
    # adversarial block: matched points and boundary-scaled points
    k = max(16, m // 8)
    xa = F1.sample_support(rng, k)
    x = np.vstack([x, xa, xa * 0.5 + z * 0.5, z + (xa - z) * 2.0])
    y = np.vstack([y, xa, xa, z + (y[:k] - z) * 2.0])
    ip = np.einsum("ij,ij->i", x - z, y - z)
    keep = ip > 0
    x, y, ip = x[keep], y[keep], ip[keep]
    num = np.asarray(F1(x), float) * np.asarray(F2(y), float)
    den = np.asarray(rho(ip), float) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num > 0, num / den, 0.0)
    worst = int(np.argmax(ratio)) if len(ratio) else 0
    max_ratio = float(ratio[worst]) if len(ratio) else 0.0
    rep = Report(scenario="hypothesis-check")
    rep.seeds["sampler"] = seed
    rep.values.update(max_ratio=max_ratio, pairs_tested=int(len(ratio)))
    if len(ratio):
        rep.values["witness_x"] = x[worst].tolist()
        rep.values["witness_y"] = y[worst].tolist()
    rep.add_check(Check(name="pointwise duality bound",
                        tag="pointwise-duality", observed=max_ratio,
                        bound=1.0 + slack, tol=slack,
                        passed=max_ratio <= 1.0 + slack))
    return rep


class PolarFunctionEvaluator:
    """Largest admissible dual function of f under a kernel rho.

    g(y) = (1 - shrink) * inf over x with <x-z, y-z> > 0 of
    rho^2(<x-z, y-z>) / f(x).  The infimum is taken by a candidate scan over
    a stratified sample of f's support followed by per-query coordinate
    polishing; the multiplicative shrink absorbs the residual optimizer gap
    so the duality hypothesis holds by construction.
    """

    def __init__(self, f: LogConcaveFn, rho: RhoKernel, z,
                 candidates: int = 1024, polish_rounds: int = 10,
                 shrink: float = 1e-6, seed: int = 0):
        self.f = f
        self.rho = rho
        self.z = np.asarray(z, float)
        self.shrink = float(shrink)
        self.polish_rounds = int(polish_rounds)
        rng = stream(seed, 6301)
        X = f.sample_support(rng, candidates)
        fX = np.asarray(f(X), float)
        keep = fX > 0
        if not np.any(keep):
            raise InputError("no candidate points with f > 0")
        self._X = X[keep]
        self._phiX = -np.log(fX[keep])
        lo, hi = f.support_box()
        self._h0 = float(np.max(hi - lo)) / 48.0

    def _log_rho2(self, s):
        le = getattr(self.rho, "log_eval", None)
        if le is not None:
            return 2.0 * le(s)
        r = np.asarray(self.rho(s), float)
        with np.errstate(divide="ignore"):
            return 2.0 * np.where(r > 0, np.log(np.maximum(r, _RADIAL_FLOOR)), -np.inf)

    def _objective(self, x, y):
        """log(rho^2/f) rowwise for paired (Q, n) arrays; +inf when invalid."""
        s = np.einsum("ij,ij->i", x - self.z, y - self.z)
        fv = np.asarray(self.f(x), float)
        out = np.full(len(x), np.inf)
        ok = (s > 0) & (fv > 0)
        out[ok] = self._log_rho2(s[ok]) - np.log(fv[ok])
        return out

    # log-values below this are zeroed instead of polished; shrinking the
    # dual function is always admissible and e^-300 is beyond any tolerance
    _LAM_FLOOR = -300.0

    def __call__(self, Y):
        Y = np.asarray(Y, float)
        scalar = Y.ndim == 1
        Y2 = np.atleast_2d(Y)
        out = np.empty(len(Y2))
        block = max(1, int(2**24 // max(1, len(self._X))))
        for s0 in range(0, len(Y2), block):
            out[s0:s0 + block] = self._eval_block(Y2[s0:s0 + block])
        return float(out[0]) if scalar else out

    def _eval_block(self, Y):
        lam, x = self._scan(Y)
        live = np.isfinite(lam) & (lam > self._LAM_FLOOR)
        if np.any(live):
            lam_l, _ = self._polish(x[live], Y[live], lam[live])
            lam[live] = lam_l
        g = np.zeros(len(Y))
        keep = live & (lam > self._LAM_FLOOR)
        with np.errstate(over="ignore"):
            g[keep] = np.exp(lam[keep])
        return (1.0 - self.shrink) * g

    def _scan(self, Y):
        """Best candidate per query; in-place fused path for smooth kernels."""
        S = (self._X - self.z) @ (Y - self.z).T          # (M, q)
        pos = S > 0
        if self.rho.name == "exp":
            # log objective = -2 s + phi; reuse S to avoid large temporaries
            np.multiply(S, -2.0, out=S)
            S += self._phiX[:, None]
            val = S
        else:
            with np.errstate(invalid="ignore"):
                val = self._log_rho2(S) + self._phiX[:, None]
        val[~pos] = np.inf
        arg = val.argmin(axis=0)
        lam = val[arg, np.arange(val.shape[1])]
        return lam, self._X[arg].copy()

    def _polish(self, x, Y, lam):
        n = self.f.dim
        q = len(Y)
        # Travel phase: parabolic steps along the query direction and the
        # axes, growing the step while full-length moves keep succeeding
        # (the scanned candidate can sit far from the true minimizer).
        h = np.full(q, self._h0)
        for _ in range(max(8, self.polish_rounds // 2)):
            grew = np.zeros(q, dtype=bool)
            dirs = [Y - x] + [_axis(n, d, q) for d in range(n)]
            for D in dirs:
                norm = np.linalg.norm(D, axis=1)
                D = np.where(norm[:, None] > 0,
                             D / np.maximum(norm, 1e-300)[:, None],
                             _axis(n, 0, q))
                lam, x, big = self._line_step(x, Y, lam, h, D)
                grew |= big
            h = np.where(grew, h * 2.0, h * 0.7)
        # Refine phase: pure halving around the located basin.
        h = np.minimum(h, self._h0)
        for _ in range(self.polish_rounds):
            for d in range(n):
                lam, x, _ = self._line_step(x, Y, lam, h, _axis(n, d, q))
            h *= 0.5
        return lam, x

    def _line_step(self, x, Y, lam, h, D):
        """One parabolic line-search step along unit directions D (per query)."""
        step = h[:, None] * D
        lp = self._objective(x + step, Y)
        lm = self._objective(x - step, Y)
        denom = lp - 2.0 * lam + lm
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = 0.5 * h * (lm - lp) / denom
        delta = np.where(np.isfinite(delta) & (denom > 0),
                         np.clip(delta, -4.0 * h, 4.0 * h), 0.0)
        xv = x + delta[:, None] * D
        lv = self._objective(xv, Y)
        lam_new = lam.copy()
        x_new = x.copy()
        for c, v in ((xv, lv), (x + step, lp), (x - step, lm)):
            better = v < lam_new
            lam_new = np.where(better, v, lam_new)
            x_new = np.where(better[:, None], c, x_new)
        moved = np.linalg.norm(x_new - x, axis=1)
        return lam_new, x_new, moved >= 1.9 * h

    def support_box(self):
        """Probed effective support of g (for samplers and truncation)."""
        if not hasattr(self, "_box"):
            radius = self._probe_radius()
            self._box = (self.z - radius, self.z + radius)
        return self._box

    def _probe_radius(self):
        n = self.f.dim
        dirs = np.vstack([np.eye(n), -np.eye(n)])
        lo, hi = self.f.support_box()
        base = float(np.max(hi - lo))
        radii = base * np.logspace(-3, 3, 44)
        R = np.zeros(n * 2)
        for k, u in enumerate(dirs):
            vals = self(self.z[None, :] + radii[:, None] * u[None, :])
            vals = np.where(np.isfinite(vals), vals, 0.0)
            peak = vals.max()
            nz = radii[vals > 1e-16 * max(peak, 1e-300)]
            R[k] = nz.max() * 2.0 if len(nz) else base
        return float(np.max(R))


def _axis(n, d, q):
    e = np.zeros((q, n))
    e[:, d] = 1.0
    return e


def polar_function(f: LogConcaveFn, rho: RhoKernel, z, **kw) -> PolarFunctionEvaluator:
    """Largest admissible dual of f under rho about center z (see evaluator)."""
    return PolarFunctionEvaluator(f, rho, z, **kw)


# ---------------------------------------------------------------------------
# integral verifications


def integrate_radial_callable(fn, z, grid: SphereGrid, r_max: float, n,
                              points: int = 512) -> float:
    """int_{R^n} fn by polar quadrature with per-ray probed cutoffs."""
    z = np.asarray(z, float)
    r_max = float(r_max)
    probes = r_max * np.logspace(-3, 0, 24)
    cut = np.full(grid.size, r_max)
    vals = np.empty((grid.size, len(probes)))
    for j, r in enumerate(probes):
        pts = z[None, :] + r * grid.nodes
        vals[:, j] = np.asarray(fn(pts), float) * r ** (n - 1)
    finite = np.where(np.isfinite(vals), vals, 0.0)
    peak = max(float(finite.max()), _RADIAL_FLOOR)
    for i in range(grid.size):
        nz = np.nonzero(finite[i] > 1e-15 * peak)[0]
        if len(nz):
            cut[i] = probes[min(nz[-1] + 1, len(probes) - 1)]
    xg, wg = _gauss(16)
    panels = max(4, points // 16)
    edges = np.linspace(0.0, 1.0, panels + 1)
    offs = (edges[:-1, None] + xg[None, :] / panels).ravel()
    wts = np.tile(wg / panels, panels)
    s = cut[:, None] * offs[None, :]
    pts = z[None, None, :] + s[:, :, None] * grid.nodes[:, None, :]
    fv = np.asarray(fn(pts.reshape(-1, n)), float).reshape(s.shape)
    fv = np.where(np.isfinite(fv), fv, 0.0)
    rays = (wts[None, :] * s ** (n - 1) * fv).sum(axis=1) * cut
    return n * ball_volume(n) * float(grid.weights @ rays)


def functional_santalo_verify(f: LogConcaveFn, rho: RhoKernel, g=None,
                              z="auto", grid: SphereGrid | None = None,
                              tol: float = 1e-2, eq_tol: float = 1e-3,
                              hyp_samples: int = 50_000, seed: int = 0,
                              int_grid_size: int | None = None) -> Report:
    """Verify  int f * int g <= (int rho(|x|^2) dx)^2  at a solved center.

    ``z='auto'`` solves the centering problem; ``g=None`` constructs the
    largest admissible dual of f.  The pointwise hypothesis is checked
    first and a failure raises ``HypothesisFail``.
    """
    n = f.dim
    if isinstance(z, str) and z == "auto":
        pair = find_center(f)
        z0 = pair.z0
        residual = pair.centroid_residual
    else:
        z0 = np.asarray(z, float)
        residual = None
    if g is None:
        g = polar_function(f, rho, z0, seed=seed)

    support2 = g.support_box() if hasattr(g, "support_box") else None
    hyp = hypothesis_check(f, g, rho, z0, samples=hyp_samples, seed=seed,
                           support2=support2, dim=n)
    if not hyp.passed:
        raise HypothesisFail(
            f"duality hypothesis fails with ratio {hyp.values['max_ratio']:.6g}",
            witness=(hyp.values.get("witness_x"), hyp.values.get("witness_y")))

    int_grid = sphere_grid(n, int_grid_size) if int_grid_size else \
        (grid if grid is not None else sphere_grid(n, _default_int_size(n)))
    I_f = f.integral(z0, int_grid)
    if isinstance(g, LogConcaveFn):
        I_g = g.integral(z0, int_grid)
    else:
        lo, hi = support2 if support2 is not None else f.support_box()
        r_max = float(np.max(hi - lo))
        g_grid = sphere_grid(n, {1: 2, 2: 512, 3: 1024}.get(n, 2048))
        I_g = integrate_radial_callable(g, z0, g_grid, r_max, n)
    rhs = c_n_rho(rho, n).full_space ** 2
    lhs = I_f * I_g
    margin = (rhs - lhs) / rhs

    rep = Report(scenario="functional-check")
    rep.seeds["sampler"] = seed
    rep.values.update(int_f=I_f, int_g=I_g, lhs=lhs, rhs=rhs,
                      margin_rel=margin, z0=z0.tolist(),
                      max_hypothesis_ratio=hyp.values["max_ratio"],
                      near_equality=bool(abs(margin) <= eq_tol))
    if residual is not None:
        rep.values["center_residual"] = residual
    rep.add_check(Check(name="functional volume-product bound",
                        tag="functional-santalo", observed=lhs,
                        bound=rhs * (1.0 + tol), tol=tol,
                        passed=lhs <= rhs * (1.0 + tol)))
    return rep


def _default_int_size(n):
    return {1: 2, 2: 1024, 3: 2048}.get(n, 4096)


def inclusion_check(f1: LogConcaveFn, f2: LogConcaveFn, rho: RhoKernel,
                    grid: SphereGrid | None = None, tol: float = 1e-6) -> Report:
    """Check the polar inclusion K_2 subset c_n(rho) K_1^o on every grid direction.

    Equivalently r_{K_2}(u) * h_{K_1}(u) <= c_n(rho) * (1 + tol); the report
    carries the worst slack max_u (r h / c_n - 1).
    """
    n = f1.dim
    grid = grid if grid is not None else sphere_grid(n)
    K1 = body_Kz(f1, np.zeros(n), grid)
    K2 = body_Kz(f2, np.zeros(n), grid)
    c = c_n_rho(rho, n).c
    h1 = K1.support(grid.nodes)
    slack = K2.radial * h1 / c - 1.0
    worst = float(np.max(slack))
    rep = Report(scenario="inclusion-check")
    rep.values.update(c_n=c, worst_slack=worst,
                      tightest=float(np.min(np.abs(slack))))
    rep.add_check(Check(name="level-body polar inclusion",
                        tag="polar-inclusion", observed=worst,
                        bound=tol, tol=tol, passed=worst <= tol))
    return rep


def prekopa_geometric_check(f1, f2, f3, n: int = 1, support_radius: float = 45.0,
                            samples: int = 20_000, seed: int = 0,
                            tol: float = 1e-3, slack: float = 1e-9,
                            unconditional: bool = True) -> Report:
    """Geometric-mean multiplicative convolution inequality on R_+^n.

    Checks the pointwise hypothesis f1(x) f2(y) <= f3(sqrt(x*y))^2 on
    sampled pairs (raising ``HypothesisFail`` with a witness), computes the
    three integrals (functions are unconditional, so full-space integrals
    are 2^n times the first-octant ones), asserts the conclusion
    int f1 * int f2 <= (int f3)^2, and cross-checks the first-octant
    integrals against the exponential substitution
    g_j(t) = f_j(e^{t_1}, ..., e^{t_n}) e^{sum t_i}.
    """
    if not unconditional:
        raise InputError("the geometric-mean inequality needs unconditional inputs")
    fns = [f1, f2, f3]
    R = float(support_radius)
    rng = stream(seed, 6401)
    m = max(64, samples)
    # stratified positive-octant pairs plus matched-scaling probes
    x = np.vstack([rng.uniform(0, R, size=(m // 2, n)),
                   -np.log(rng.uniform(1e-12, 1.0, size=(m // 2, n))) * R / 30.0])
    y = np.vstack([rng.uniform(0, R, size=(m // 2, n)),
                   x[: m // 2] * rng.uniform(0.25, 4.0, size=(m // 2, 1)) ** 2])
    x, y = np.clip(x, 0, R), np.clip(y, 0, R)
    v1 = np.asarray(f1(x), float)
    v2 = np.asarray(f2(y), float)
    v3 = np.asarray(f3(np.sqrt(x * y)), float)
    num = v1 * v2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num > 0, num / v3**2, 0.0)
    worst = int(np.argmax(ratio)) if len(ratio) else 0
    max_ratio = float(ratio[worst])
    if max_ratio > 1.0 + slack:
        raise HypothesisFail(
            f"geometric-mean hypothesis fails with ratio {max_ratio:.6g}",
            witness=(x[worst].tolist(), y[worst].tolist()))

    ints = [_octant_integral(fn, n, R) for fn in fns]
    subs = [_octant_integral_exponential(fn, n, R) for fn in fns]
    full = [(2.0**n) * v for v in ints]
    lhs, rhs = full[0] * full[1], full[2] ** 2
    margin = (rhs - lhs) / rhs if rhs > 0 else np.inf

    rep = Report(scenario="prekopa-check")
    rep.seeds["sampler"] = seed
    rep.values.update(int_f1=full[0], int_f2=full[1], int_f3=full[2],
                      lhs=lhs, rhs=rhs, margin_rel=margin,
                      max_hypothesis_ratio=max_ratio)
    rep.add_check(Check(name="geometric-mean product bound",
                        tag="prekopa-geometric", observed=lhs,
                        bound=rhs * (1.0 + tol), tol=tol,
                        passed=lhs <= rhs * (1.0 + tol)))
    for j, (a, b) in enumerate(zip(ints, subs), start=1):
        rel = abs(a - b) / max(abs(a), _RADIAL_FLOOR)
        rep.add_check(Check(name=f"exponential substitution consistency f{j}",
                            tag="exp-substitution", observed=rel,
                            bound=1e-3, tol=1e-3, passed=rel <= 1e-3))
    return rep


def _octant_integral(fn, n, R, q: int = 160) -> float:
    xg, wg = _gauss(q)
    axes = [R * xg] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.ones(len(pts))
    for m in np.meshgrid(*([R * wg] * n), indexing="ij"):
        w *= m.ravel()
    return float(w @ np.asarray(fn(pts), float))


def _octant_integral_exponential(fn, n, R, q: int = 192, t_lo: float = -45.0) -> float:
    xg, wg = _gauss(q)
    t_hi = np.log(R)
    t = t_lo + (t_hi - t_lo) * xg
    mesh = np.meshgrid(*([t] * n), indexing="ij")
    pts_t = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.ones(len(pts_t))
    for m in np.meshgrid(*([(t_hi - t_lo) * wg] * n), indexing="ij"):
        w *= m.ravel()
    vals = np.asarray(fn(np.exp(pts_t)), float) * np.exp(pts_t.sum(axis=1))
    return float(w @ vals)
