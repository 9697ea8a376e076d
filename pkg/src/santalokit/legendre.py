"""Discrete Legendre-Fenchel transforms with arbitrary centers.

The transform about a center z,

    (L_z phi)(y) = sup_x ( <x - z, y - z> - phi(x) ),

is computed exactly over the grid nodes.  The inner product separates
coordinates, so the supremum factorizes into successive one-dimensional
transforms (one pass per axis); each pass runs in linear time in the grid
size via the monotone-argmax property of the discrete conjugate.  A general
center reduces to z = 0 through L_z phi(y) = L_0 phi~(y - z) with
phi~(x) = phi(x + z).

Dual nodes whose winning primal node sits on the grid boundary are flagged
``untrusted``: the discrete sup is then a truncation artifact, and integral
checks exclude those nodes while reporting the excluded mass.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import EmptyDomain, InputError, SolverFail
from .kernels import RhoKernel, kernel_radial_integral
from .reports import Check, Report
from .sphere import ball_volume


class GridFn:
    """Extended-real function sampled on a rectangular grid.

    ``axes`` are strictly increasing per-dimension node arrays; ``values``
    has shape ``tuple(len(a) for a in axes)`` and may contain +inf (but at
    least one finite entry, and no -inf).
    """

    def __init__(self, axes, values, untrusted=None):
        self.axes = tuple(np.asarray(a, float) for a in axes)
        self.values = np.asarray(values, float)
        if self.values.shape != tuple(len(a) for a in self.axes):
            raise InputError("values shape does not match axes")
        for a in self.axes:
            if len(a) < 2 or np.any(np.diff(a) <= 0):
                raise InputError("axes must be strictly increasing with >= 2 nodes")
        if np.any(np.isneginf(self.values)):
            raise InputError("values must be bounded below")
        if not np.any(np.isfinite(self.values)):
            raise EmptyDomain("grid function has no finite values")
        self.untrusted = untrusted      # bool mask on the grid, or None

    @property
    def dim(self) -> int:
        return len(self.axes)

    @classmethod
    def from_callable(cls, fn, axes) -> "GridFn":
        axes = tuple(np.asarray(a, float) for a in axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.asarray(fn(pts), float).reshape([len(a) for a in axes])
        return cls(axes, vals)

    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_volume(self) -> float:
        out = 1.0
        for a in self.axes:
            out *= (a[-1] - a[0]) / (len(a) - 1)
        return out

    def integral_of(self, transform=None, exclude_untrusted: bool = True):
        """Rectangle-rule integral of ``transform(values)`` (default identity).

        Returns (integral, excluded_bound): the second term bounds the mass
        dropped at untrusted or infinite nodes.
        """
        v = self.values if transform is None else transform(self.values)
        cell = self.cell_volume()
        good = np.isfinite(v)
        excluded = 0.0
        if exclude_untrusted and self.untrusted is not None:
            bad = self.untrusted & good
            excluded = float(np.abs(v[bad]).sum() * cell)
            good = good & ~self.untrusted
        return float(v[good].sum() * cell), excluded

    def to_spec(self):
        vals = np.where(np.isfinite(self.values), self.values, np.nan)
        flat = ["inf" if not np.isfinite(x) else float(x)
                for x in self.values.ravel()]
        del vals
        return {"axes": [a.tolist() for a in self.axes], "values": flat}

    @classmethod
    def from_spec(cls, spec) -> "GridFn":
        axes = [np.asarray(a, float) for a in spec["axes"]]
        shape = [len(a) for a in axes]
        flat = np.array([np.inf if v == "inf" else float(v)
                         for v in spec["values"]])
        return cls(axes, flat.reshape(shape))


# ---------------------------------------------------------------------------
# the transform


def _llt_1d(x, v, y):
    """1D discrete conjugate sup_i (x_i * t - v_i) at sorted slopes y.

    Builds the concave majorant of (x_i, -v_i) -- only its vertices can win
    -- then sweeps the sorted queries with a monotone pointer, so the pass
    is O(len(x) + len(y)).  Returns (values, argmax indices into x).
    """
    finite = np.isfinite(v)
    if not np.any(finite):
        return np.full(len(y), -np.inf), np.zeros(len(y), dtype=int)
    idx = np.nonzero(finite)[0]
    xs, vs = x[idx], -v[idx]
    # upper concave hull, keeping collinear points (cheap insurance that
    # float-level ties keep every potential winner available to the sweep)
    hull = []
    for k in range(len(xs)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            if (vs[k] - vs[j]) * (xs[j] - xs[i]) > (vs[j] - vs[i]) * (xs[k] - xs[j]):
                hull.pop()
            else:
                break
        hull.append(k)
    hx = xs[hull]
    hv = vs[hull]
    out = np.empty(len(y))
    arg = np.empty(len(y), dtype=int)
    p = 0
    m = len(hull)
    for q in range(len(y)):
        t = y[q]
        best = hx[p] * t + hv[p]
        bestp = p
        r = p
        # values along the hull are concave in exact arithmetic; the slack
        # tolerates float wobble across exact ties so the float max is kept
        while r + 1 < m:
            nxt = hx[r + 1] * t + hv[r + 1]
            slack = 4e-16 * (abs(best) + abs(nxt)) + 5e-324
            if nxt >= best - slack:
                r += 1
                if nxt > best:
                    best = nxt
                    bestp = r
            else:
                break
        out[q] = best
        arg[q] = bestp
        p = bestp
    return out, idx[np.asarray(hull)[arg]]


def legendre_transform(phi: GridFn, z=None, dual_axes=None) -> GridFn:
    """Discrete Legendre transform of phi about z, sampled on dual_axes.

    The result carries an ``untrusted`` mask marking dual nodes whose
    supremum was attained on the primal grid boundary.
    """
    n = phi.dim
    z = np.zeros(n) if z is None else np.asarray(z, float)
    if dual_axes is None:
        dual_axes = default_dual_axes(phi)
    dual_axes = tuple(np.asarray(a, float) for a in dual_axes)
    if len(dual_axes) != n:
        raise InputError("dual axes must match the dimension")
    prim = [a - z[d] for d, a in enumerate(phi.axes)]
    dual = [a - z[d] for d, a in enumerate(dual_axes)]

    vals = -phi.values
    args = []
    # process axes last-to-first so axis d sees shape (x_0..x_{d-1}, y_d, ...)
    for d in range(n - 1, -1, -1):
        moved = np.moveaxis(vals, d, -1)
        lead = moved.shape[:-1]
        flat = moved.reshape(-1, moved.shape[-1])
        out = np.empty((flat.shape[0], len(dual[d])))
        arg = np.empty_like(out, dtype=int)
        for r in range(flat.shape[0]):
            out[r], arg[r] = _llt_1d(prim[d], -flat[r], dual[d])
        vals = np.moveaxis(out.reshape(lead + (len(dual[d]),)), -1, d)
        args.append((d, np.moveaxis(arg.reshape(lead + (len(dual[d]),)), -1, d)))

    untrusted = _boundary_argmax_mask(args, [len(a) for a in phi.axes],
                                      [len(a) for a in dual_axes])
    return GridFn(dual_axes, vals, untrusted=untrusted)


def _boundary_argmax_mask(args, prim_shape, dual_shape):
    """Reconstruct winning primal indices and flag boundary hits.

    ``args`` holds per-pass argmax tables, recorded from axis n-1 down to 0;
    table for axis d has shape (x_0..x_{d-1}, y_d..y_{n-1}).
    """
    n = len(prim_shape)
    mesh = np.meshgrid(*[np.arange(s) for s in dual_shape], indexing="ij")
    winners = [None] * n
    for d, table in reversed(args):      # axis 0 first (its table is pure-dual)
        index = tuple(winners[k] for k in range(d)) + tuple(mesh[k] for k in range(d, n))
        winners[d] = table[index]
    mask = np.zeros(dual_shape, dtype=bool)
    for d in range(n):
        mask |= (winners[d] == 0) | (winners[d] == prim_shape[d] - 1)
    return mask


def legendre_transform_brute(phi: GridFn, z=None, dual_axes=None) -> GridFn:
    """Reference double-loop transform (identical float associations)."""
    n = phi.dim
    z = np.zeros(n) if z is None else np.asarray(z, float)
    if dual_axes is None:
        dual_axes = default_dual_axes(phi)
    dual_axes = tuple(np.asarray(a, float) for a in dual_axes)
    prim = [a - z[d] for d, a in enumerate(phi.axes)]
    dual = [a - z[d] for d, a in enumerate(dual_axes)]
    acc = -phi.values                                  # shape prim
    acc = np.broadcast_to(acc, tuple(len(a) for a in dual) + acc.shape).copy()
    for d in range(n - 1, -1, -1):
        prod = np.multiply.outer(dual[d], prim[d])     # (Yd, Xd)
        shape = [1] * (2 * n)
        shape[d] = len(dual[d])
        shape[n + d] = len(prim[d])
        acc = acc + prod.reshape(shape)
    flat = acc.reshape(tuple(len(a) for a in dual) + (-1,))
    with np.errstate(invalid="ignore"):
        vals = np.max(np.where(np.isnan(flat), -np.inf, flat), axis=-1)
    return GridFn(dual_axes, vals)


def default_dual_axes(phi: GridFn, pad: float = 0.1, size: int | None = None):
    """Dual grids covering the finite-difference slope range of phi."""
    out = []
    for d in range(phi.dim):
        v = np.moveaxis(phi.values, d, -1)
        a = phi.axes[d]
        dv = np.diff(v, axis=-1) / np.diff(a)
        dv = dv[np.isfinite(dv)]
        if len(dv) == 0:
            lo, hi = -1.0, 1.0
        else:
            lo, hi = float(dv.min()), float(dv.max())
        span = max(hi - lo, 1e-6)
        lo -= pad * span
        hi += pad * span
        m = size if size is not None else max(len(a), 65)
        out.append(np.linspace(lo, hi, m))
    return tuple(out)


# ---------------------------------------------------------------------------
# checks built on the transform


def biconjugate_check(phi: GridFn, z=None, dual_size: int | None = None,
                      slack: float | None = None) -> Report:
    """Check L_z(L_z phi) <= phi, with equality on the convex envelope.

    The grid slack defaults to a second-order estimate from the axis
    spacings and the observed curvature scale.
    """
    n = phi.dim
    z = np.zeros(n) if z is None else np.asarray(z, float)
    dual_axes = default_dual_axes(phi, size=dual_size)
    psi = legendre_transform(phi, z, dual_axes)
    back = legendre_transform(psi, z, phi.axes)
    finite = np.isfinite(phi.values)
    over = back.values - phi.values
    over_max = float(np.max(over[finite])) if np.any(finite) else 0.0
    if slack is None:
        slack = _grid_slack(phi, dual_axes)
    rep = Report(scenario="biconjugate-check")
    rep.values.update(max_overshoot=over_max, slack=slack)
    rep.add_check(Check(name="biconjugate below original",
                        tag="legendre-involution", observed=over_max,
                        bound=slack, tol=slack, passed=over_max <= slack))
    if n == 1:
        env = _convex_envelope_1d(phi.axes[0], phi.values)
        on_env = finite & (np.abs(phi.values - env) <= 1e-12 * (1 + np.abs(env)))
        defect = float(np.max(np.abs(back.values - phi.values)[on_env])) \
            if np.any(on_env) else 0.0
        rep.values["envelope_defect"] = defect
        rep.add_check(Check(name="equality on the convex envelope",
                            tag="legendre-involution", observed=defect,
                            bound=slack, tol=slack, passed=defect <= slack))
        notch = finite & ~on_env
        if np.any(notch):
            rep.values["max_envelope_gap"] = float(np.max((phi.values - back.values)[notch]))
    else:
        defect = float(np.max(np.abs(back.values - phi.values)[finite]))
        rep.values["max_abs_defect"] = defect
    return rep


def _grid_slack(phi: GridFn, dual_axes) -> float:
    """Second-order involution slack: dual spacing squared over the
    (data-estimated) curvature floor, summed per axis."""
    total = 0.0
    for d in range(phi.dim):
        delta = (dual_axes[d][-1] - dual_axes[d][0]) / (len(dual_axes[d]) - 1)
        v = np.moveaxis(phi.values, d, -1)
        h = (phi.axes[d][-1] - phi.axes[d][0]) / (len(phi.axes[d]) - 1)
        d2 = np.diff(v, n=2, axis=-1) / (h * h)
        d2 = d2[np.isfinite(d2) & (d2 > 0)]
        curv = float(np.median(d2)) if len(d2) else 1.0
        total += delta * delta / (2.0 * max(curv, 1e-9))
    return max(total, 1e-12)


def _convex_envelope_1d(x, v):
    """Greatest convex minorant of the finite samples, +inf elsewhere kept."""
    finite = np.isfinite(v)
    xs, vs = x[finite], v[finite]
    hull = []
    for k in range(len(xs)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            if (vs[k] - vs[j]) * (xs[j] - xs[i]) <= (vs[j] - vs[i]) * (xs[k] - xs[j]):
                hull.pop()
            else:
                break
        hull.append(k)
    env = np.interp(x, xs[hull], vs[hull])
    out = np.where(finite, env, v)
    return out


@dataclass
class CenterSolveResult:
    """Optimal center of the transform-side integral with its diagnostics."""
    z0: np.ndarray
    objective: float
    residual: float
    nonunique_possible: bool = False


def optimal_center(phi: GridFn, rho: RhoKernel, dual_size: int = 129,
                   tol: float = 1e-6) -> CenterSolveResult:
    """Minimize z -> int rho(L_z phi) via the slope-shift identity.

    Since L_z phi(y) = (L phi)(y - z) - <z, y - z>, substituting w = y - z
    turns the objective into int rho(psi(w) - <z, w>) dw with psi = L phi
    computed once.  For strictly convex differentiable rho the minimizer is
    unique and satisfies the first-moment fixed-point identity, whose
    residual is reported; otherwise ``nonunique_possible`` is set and the
    residual falls back to a finite-difference gradient norm.
    """
    dual_axes = default_dual_axes(phi, pad=0.35, size=dual_size)
    psi = legendre_transform(phi, None, dual_axes)
    pts = psi.points()
    vals = psi.values.ravel()
    cell = psi.cell_volume()
    good = np.isfinite(vals)
    if psi.untrusted is not None:
        good &= ~psi.untrusted.ravel()
    W = pts[good]
    V = vals[good]

    def objective(z):
        return float(np.sum(np.asarray(rho(V - W @ z), float)) * cell)

    n = phi.dim
    opt = optimize.minimize(objective, np.zeros(n), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 0.0,
                                     "maxiter": 4000, "adaptive": True})
    if not np.all(np.isfinite(opt.x)):
        raise SolverFail("center solve diverged", best=opt.x, residual=np.inf)
    z0 = np.asarray(opt.x, float)
    obj = objective(z0)

    nonunique = not (rho.strictly_convex and rho.non_increasing)
    residual = np.nan
    if not nonunique:
        # first-moment fixed point: z0 = int y rho'(L_{z0}phi(y)) / int rho'
        # with y = w + z0 after the substitution w = y - z0
        t = V - W @ z0
        dr = np.asarray(rho.derivative(t), float)
        denom = float(np.sum(dr) * cell)
        if abs(denom) > 1e-300:
            z_fp = (dr @ (W + z0[None, :])) * cell / denom
            residual = float(np.linalg.norm(z0 - z_fp))
        else:
            nonunique = True
    if nonunique:
        h = 1e-5
        gr = np.zeros(n)
        for d in range(n):
            e = np.zeros(n)
            e[d] = h
            gr[d] = (objective(z0 + e) - objective(z0 - e)) / (2 * h)
        residual = float(np.linalg.norm(gr)) / max(obj, 1e-300)
    if residual > max(tol, 1e-4) and not nonunique:
        raise SolverFail("fixed-point residual above tolerance",
                         best=z0, residual=residual)
    return CenterSolveResult(z0=z0, objective=obj, residual=residual,
                             nonunique_possible=nonunique)


def legendre_santalo_verify(phi: GridFn, rho: RhoKernel, z="auto",
                            tol: float = 1e-2, eq_tol: float = 1e-3,
                            dual_size: int | None = None) -> Report:
    """Verify  int rho(phi) * int rho(L_z phi) <= (int rho(|x|^2/2) dx)^2.

    ``z='auto'`` solves for the optimal center.  Near-equality triggers the
    quadratic-fit equality diagnostics.  Requires rho log-concave and
    non-increasing (``HypothesisFail`` otherwise -- reported via the kernel
    flag check).
    """
    from .errors import HypothesisFail
    n = phi.dim
    if not (rho.log_concave and rho.non_increasing):
        raise HypothesisFail("kernel must be log-concave and non-increasing")
    if isinstance(z, str) and z == "auto":
        sol = optimal_center(phi, rho)
        z0 = sol.z0
    else:
        z0 = np.asarray(z, float)
        sol = None

    # primal side, rectangle rule with a coarse Richardson consistency check
    lhs1, _ = phi.integral_of(lambda v: _rho_of(rho, v))
    lhs1_coarse = _coarse_integral(phi, rho)
    dual_axes = default_dual_axes(phi, pad=0.35, size=dual_size)
    psi = legendre_transform(phi, z0, dual_axes)
    lhs2, excluded = psi.integral_of(lambda v: _rho_of(rho, v))
    rhs = (n * ball_volume(n) * kernel_radial_integral(rho, n, scale=0.5)) ** 2
    lhs = lhs1 * lhs2
    margin = (rhs - lhs) / rhs

    rep = Report(scenario="legendre-check")
    rep.values.update(int_rho_phi=lhs1, int_rho_dual=lhs2, lhs=lhs, rhs=rhs,
                      margin_rel=margin, z0=z0.tolist(),
                      untrusted_excluded_bound=excluded,
                      refinement_delta=abs(lhs1 - lhs1_coarse) / max(lhs1, 1e-300),
                      near_equality=bool(abs(margin) <= eq_tol))
    if sol is not None:
        rep.values["center_objective"] = sol.objective
        rep.values["center_residual"] = sol.residual
        if sol.nonunique_possible:
            rep.warnings.append("nonunique_possible: kernel not strictly convex")
    rep.add_check(Check(name="transform volume-product bound",
                        tag="legendre-santalo", observed=lhs,
                        bound=rhs * (1.0 + tol), tol=tol,
                        passed=lhs <= rhs * (1.0 + tol)))
    if abs(margin) <= eq_tol * 10:
        diag = equality_diagnostics(phi, rho, z0)
        rep.values["equality_fit_residual"] = diag.values["fit_residual"]
        rep.values["equality_diagnosed"] = diag.values["diagnosed"]
    return rep


def _rho_of(rho, v):
    # transform values can be negative; kernels evaluate there by their
    # natural formula extension (e^{-t}, (1-t)^m, indicator of t <= 1)
    out = np.zeros_like(v)
    finite = np.isfinite(v)
    out[finite] = np.asarray(rho(v[finite]), float)
    return out


def _coarse_integral(phi: GridFn, rho) -> float:
    sl = tuple(slice(None, None, 2) for _ in range(phi.dim))
    axes = [a[::2] for a in phi.axes]
    coarse = GridFn(axes, phi.values[sl])
    val, _ = coarse.integral_of(lambda v: _rho_of(rho, v))
    return val


def equality_diagnostics(phi: GridFn, rho: RhoKernel, z=None,
                         fit_tol: float = 1e-4) -> Report:
    """Weighted least-squares fit phi(x) ~ |T(x+z)|^2/2 + c.

    Fits the symmetric positive matrix Q = T^t T and the constant c with
    weights rho(phi(x)) (the fit should hold where the measure lives), and
    reports whether log rho is affine on the sampled range when c != 0.
    """
    n = phi.dim
    z = np.zeros(n) if z is None else np.asarray(z, float)
    pts = phi.points()
    vals = phi.values.ravel()
    finite = np.isfinite(vals)
    X = pts[finite] + z
    y = vals[finite]
    w = np.asarray(rho(np.maximum(y, 0.0)), float) * (y >= 0) + 1e-12
    cols = []
    for i in range(n):
        for j in range(i, n):
            fac = 0.5 if i == j else 1.0
            cols.append(fac * X[:, i] * X[:, j])
    cols.append(np.ones(len(X)))
    A = np.stack(cols, axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    Q = np.zeros((n, n))
    k = 0
    for i in range(n):
        for j in range(i, n):
            Q[i, j] = Q[j, i] = coef[k]
            k += 1
    c = float(coef[-1])
    resid = (A @ coef - y) * sw
    rel = float(np.sqrt(np.sum(resid**2) / max(np.sum((y * sw) ** 2), 1e-300)))
    eigs = np.linalg.eigvalsh(Q)
    pd = bool(eigs.min() > 0)

    rho_exponential = True
    if abs(c) > 1e-9:
        t = np.linspace(0.0, max(float(np.percentile(y, 95)), 1.0), 64)
        r = np.asarray(rho(t), float)
        pos = r > 0
        if np.sum(pos) >= 3:
            lr = np.log(r[pos])
            fit = np.polyfit(t[pos], lr, 1)
            rho_exponential = bool(np.max(np.abs(np.polyval(fit, t[pos]) - lr)) <= 1e-8)
        else:
            rho_exponential = False

    diagnosed = pd and rel <= fit_tol and (abs(c) <= 1e-9 or rho_exponential)
    rep = Report(scenario="equality-diagnostics")
    rep.values.update(fit_residual=rel, quadratic_form=Q.tolist(), offset=c,
                      positive_definite=pd, rho_exponential=rho_exponential,
                      diagnosed=bool(diagnosed))
    rep.add_check(Check(name="quadratic equality profile fit",
                        tag="legendre-equality", observed=rel,
                        bound=fit_tol, tol=fit_tol, passed=bool(diagnosed)))
    return rep
