"""Radial weight kernels rho: R+ -> R+ and their dimensional constants.

The scaling constant

    c_n(rho) = ( int_0^inf r^{n-1} rho(r^2) dr )^(2/n)

links the level bodies of a dual pair of functions to a polar inclusion, and

    int_{R^n} rho(|x|^2) dx = n * v_n * c_n(rho)^(n/2)

is the full-space companion integral used by every verifier.
"""
import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import DivergentKernel, HypothesisFail
from .rng import stream
from .sphere import ball_volume


class RhoKernel:
    """A nonnegative weight on R+ with declared structural flags.

    Flags are declarations; ``verify_flags`` spot-checks them on sampled
    points and raises ``HypothesisFail`` naming the first failed check.
    ``support_hint`` is a radius in t beyond which rho(t) < 1e-16, used to
    truncate quadrature (np.inf for kernels with unbounded support).
    Only piecewise-continuous kernels with finitely many jumps are supported;
    ``jump_points`` lists them so quadrature can split there.
    """

    def __init__(self, fn: Callable, *, log_concave: bool = False,
                 non_increasing: bool = False,
                 geometric_mean_dominant: bool = False,
                 strictly_convex: bool = False,
                 support_hint: float = np.inf,
                 derivative: Callable | None = None,
                 log_eval: Callable | None = None,
                 jump_points: tuple = (),
                 name: str = "custom"):
        self._fn = fn
        self.log_concave = log_concave
        self.non_increasing = non_increasing
        self.geometric_mean_dominant = geometric_mean_dominant
        self.strictly_convex = strictly_convex
        self.support_hint = float(support_hint)
        self._derivative = derivative
        self.log_eval = log_eval              # log rho, -inf where rho = 0
        self.jump_points = tuple(float(j) for j in jump_points)
        self.name = name

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._fn(t), dtype=float)
        return out

    def derivative(self, t):
        if self._derivative is not None:
            return np.asarray(self._derivative(np.asarray(t, float)), float)
        t = np.asarray(t, float)
        h = 1e-6 * np.maximum(1.0, np.abs(t))
        return (self(t + h) - self(np.maximum(t - h, 0.0))) / (h + np.minimum(t, h))

    # -- families -----------------------------------------------------------

    @classmethod
    def exp(cls) -> "RhoKernel":
        """rho(t) = e^{-t}: log-concave, decreasing, strictly convex, GM-dominant."""
        return cls(lambda t: np.exp(-t), log_concave=True, non_increasing=True,
                   geometric_mean_dominant=True, strictly_convex=True,
                   support_hint=40.0, derivative=lambda t: -np.exp(-t),
                   log_eval=lambda t: -np.asarray(t, float), name="exp")

    @classmethod
    def power(cls, m: float) -> "RhoKernel":
        """rho(t) = (1 - t)_+^m for m >= 1."""
        def fn(t):
            return np.clip(1.0 - t, 0.0, None) ** m

        def deriv(t):
            return -m * np.clip(1.0 - t, 0.0, None) ** (m - 1.0)

        def log_eval(t):
            w = 1.0 - np.asarray(t, float)
            with np.errstate(divide="ignore"):
                return np.where(w > 0, m * np.log(np.maximum(w, 1e-300)), -np.inf)

        return cls(fn, log_concave=True, non_increasing=True,
                   geometric_mean_dominant=True, support_hint=1.0,
                   derivative=deriv, log_eval=log_eval,
                   jump_points=(1.0,), name=f"power{m:g}")

    @classmethod
    def indicator(cls, radius: float = 1.0) -> "RhoKernel":
        """rho = indicator of [0, radius]."""
        def fn(t):
            return (np.asarray(t, float) <= radius).astype(float)

        def log_eval(t):
            return np.where(np.asarray(t, float) <= radius, 0.0, -np.inf)

        return cls(fn, log_concave=True, non_increasing=True,
                   geometric_mean_dominant=True, support_hint=radius,
                   log_eval=log_eval, jump_points=(radius,), name="indicator")

    @classmethod
    def from_profile(cls, h: Callable, *, support_hint=np.inf,
                     jump_points=(), name="profile") -> "RhoKernel":
        """Kernel rho(t) = h(sqrt(t)) * chi_{[0,1]}(t) built from a radial
        measure profile h (the reduction used for rotation-invariant measures)."""
        def fn(t):
            t = np.asarray(t, float)
            return np.where(t <= 1.0, h(np.sqrt(np.maximum(t, 0.0))), 0.0)

        return cls(fn, log_concave=True, non_increasing=True,
                   geometric_mean_dominant=True,
                   support_hint=min(1.0, support_hint),
                   jump_points=tuple(jump_points) + (1.0,), name=name)

    # -- declared-flag verification ------------------------------------------

    def verify_flags(self, seed: int = 0, samples: int = 10_000,
                     slack: float = 1e-9):
        """Spot-check the declared flags on sampled points.

        Raises ``HypothesisFail`` naming the first violated flag.
        """
        rng = stream(seed, 7001)
        hi = self.support_hint if np.isfinite(self.support_hint) else 50.0
        s = rng.uniform(0.0, hi, size=samples)
        t = rng.uniform(0.0, hi, size=samples)
        rs, rt = self(s), self(t)
        if np.any(rs < 0):
            raise HypothesisFail("kernel is negative at a sampled point",
                                 witness=float(s[np.argmin(rs)]))
        if self.log_concave:
            rmid = self((s + t) / 2.0)
            bad = rmid**2 < rs * rt * (1.0 - slack)
            if np.any(bad):
                k = np.argmax(bad)
                raise HypothesisFail("log_concave flag fails",
                                     witness=(float(s[k]), float(t[k])))
        if self.non_increasing:
            lo, hi2 = np.minimum(s, t), np.maximum(s, t)
            bad = self(hi2) > self(lo) * (1.0 + slack) + slack
            if np.any(bad):
                k = np.argmax(bad)
                raise HypothesisFail("non_increasing flag fails",
                                     witness=(float(lo[k]), float(hi2[k])))
        if self.geometric_mean_dominant:
            gm = self(np.sqrt(s * t))
            bad = np.sqrt(rs * rt) > gm * (1.0 + slack) + slack
            if np.any(bad):
                k = np.argmax(bad)
                raise HypothesisFail("geometric_mean_dominant flag fails",
                                     witness=(float(s[k]), float(t[k])))
        if self.strictly_convex:
            # Check on a moderate range where values are not denormal-small.
            a = rng.uniform(0.0, min(hi, 5.0), size=samples)
            b = rng.uniform(0.0, min(hi, 5.0), size=samples)
            sep = np.abs(a - b) > 1e-2
            mid = self((a + b) / 2.0)
            avg = 0.5 * (self(a) + self(b))
            bad = sep & (mid >= avg - slack * np.maximum(avg, 1e-30)) & (avg > 1e-12)
            if np.any(bad):
                k = np.argmax(bad)
                raise HypothesisFail("strictly_convex flag fails",
                                     witness=(float(a[k]), float(b[k])))


class KernelConstants(NamedTuple):
    c: float            # c_n(rho)
    radial: float       # int_0^inf r^{n-1} rho(r^2) dr
    full_space: float   # int_{R^n} rho(|x|^2) dx


def kernel_radial_integral(rho: RhoKernel, n: int, scale: float = 1.0) -> float:
    """int_0^inf r^{n-1} rho(scale * r^2) dr with divergence detection."""
    def integrand(r):
        return r ** (n - 1) * float(rho(np.array([scale * r * r]))[0])

    breaks = sorted(math.sqrt(j / scale) for j in rho.jump_points if j > 0)
    if np.isfinite(rho.support_hint):
        hi = math.sqrt(rho.support_hint / scale)
        pts = [0.0] + [b for b in breaks if b < hi] + [hi]
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(integrand, a, b, limit=200)
            total += val
        return total
    total, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    prev_seg = np.inf
    a = 1.0
    for _ in range(60):
        b = 2.0 * a
        seg, _ = integrate.quad(integrand, a, b, limit=200)
        total += seg
        if seg <= 1e-14 * max(total, 1e-300):
            return total
        if seg >= prev_seg and a > 1e6:
            raise DivergentKernel(f"radial integral of {rho.name} does not converge")
        prev_seg = seg
        a = b
    raise DivergentKernel(f"radial integral of {rho.name} did not converge by r = {a:g}")


def c_n_rho(rho: RhoKernel, n: int) -> KernelConstants:
    """The constant c_n(rho) plus its companion full-space integral."""
    radial = kernel_radial_integral(rho, n)
    if radial <= 0:
        raise DivergentKernel("kernel radial integral is zero; constant undefined")
    c = radial ** (2.0 / n)
    full = n * ball_volume(n) * radial
    return KernelConstants(c=c, radial=radial, full_space=full)
