"""Deterministic, antipodally symmetric quadrature grids on the unit sphere.

The grid carries unit nodes and positive weights summing to one, i.e. it
discretizes the rotation-invariant probability measure on S^{n-1}.  Nodes
are stored as ``[P; -P]`` so the antipode of node ``i`` is node
``(i + N/2) % N`` exactly.

Construction per dimension:

* n = 1: the two-point set {+1, -1}.
* n = 2: uniform angular grid (size divisible by 4), sorted by angle.
* n = 3: spiral (golden-angle) points on the open upper hemisphere,
  mirrored through the origin.
* n >= 4: Halton points pushed through the normal quantile and projected
  to the sphere, mirrored through the origin.
"""
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln, ndtri
from scipy.stats import qmc

from .errors import InputError

DEFAULT_SIZES = {1: 2, 2: 4096, 3: 8192, 4: 32768}


def ball_volume(n: int) -> float:
    """Volume of the Euclidean unit ball in dimension n."""
    return float(np.exp(n / 2.0 * np.log(np.pi) - gammaln(n / 2.0 + 1.0)))


class SphereGrid:
    """Unit-sphere quadrature nodes with antipodal symmetry.

    Attributes
    ----------
    nodes : (N, n) array of unit vectors
    weights : (N,) positive weights summing to 1
    """

    def __init__(self, nodes, weights):
        nodes = np.asarray(nodes, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if nodes.ndim != 2 or len(weights) != len(nodes):
            raise InputError("nodes must be (N, n) with matching weights")
        self.nodes = nodes
        self.weights = weights
        self._kdtree = None
        self._angles = None

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def antipode_index(self, i):
        """Index of -nodes[i]; exact by construction."""
        return (i + self.size // 2) % self.size

    def assert_valid(self, tol: float = 1e-12):
        norms = np.linalg.norm(self.nodes, axis=1)
        if np.max(np.abs(norms - 1.0)) > tol:
            raise InputError("grid nodes are not unit vectors")
        if abs(self.weights.sum() - 1.0) > tol:
            raise InputError("grid weights do not sum to 1")
        if np.any(self.weights <= 0):
            raise InputError("grid weights must be positive")
        half = self.size // 2
        if not np.allclose(self.nodes[:half], -self.nodes[half:], atol=tol):
            raise InputError("grid is not antipodally symmetric")

    @property
    def kdtree(self):
        if self._kdtree is None:
            self._kdtree = cKDTree(self.nodes)
        return self._kdtree

    @property
    def angles(self):
        """Node angles in [0, 2pi), only defined for n = 2 grids."""
        if self.dim != 2:
            raise InputError("angles only defined for n = 2")
        if self._angles is None:
            a = np.arctan2(self.nodes[:, 1], self.nodes[:, 0])
            self._angles = np.mod(a, 2.0 * np.pi)
        return self._angles

    def nearest_index(self, units):
        """Index of the node closest to each unit vector in ``units``."""
        units = np.atleast_2d(units)
        _, idx = self.kdtree.query(units, k=1)
        return idx


def _grid_1d():
    return SphereGrid(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]))


def _grid_2d(size):
    if size % 4 != 0:
        raise InputError("n=2 grid size must be divisible by 4")
    half = size // 2
    theta = 2.0 * np.pi * np.arange(half) / size
    upper = np.column_stack([np.cos(theta), np.sin(theta)])
    nodes = np.vstack([upper, -upper])
    return SphereGrid(nodes, np.full(size, 1.0 / size))


def _grid_3d(size):
    if size % 2 != 0:
        raise InputError("grid size must be even")
    half = size // 2
    k = np.arange(half)
    z = (k + 0.5) / half                      # open upper hemisphere
    phi = 2.0 * np.pi * k * 0.6180339887498949
    rho = np.sqrt(1.0 - z * z)
    upper = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    nodes = np.vstack([upper, -upper])
    return SphereGrid(nodes, np.full(size, 1.0 / size))


def _grid_nd(dim, size):
    if size % 2 != 0:
        raise InputError("grid size must be even")
    half = size // 2
    halton = qmc.Halton(d=dim, scramble=False)
    halton.fast_forward(1)                    # first Halton point is the origin
    u = halton.random(half)
    g = ndtri(u)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    nodes = np.vstack([g, -g])
    return SphereGrid(nodes, np.full(size, 1.0 / size))


@lru_cache(maxsize=32)
def sphere_grid(dim: int, size: int | None = None) -> SphereGrid:
    """Build (and cache) the default grid for a dimension.

    ``size`` overrides the per-dimension default; it must keep the
    construction's symmetry (divisible by 4 in n=2, even otherwise).
    """
    if dim < 1:
        raise InputError("dimension must be >= 1")
    if size is None:
        size = DEFAULT_SIZES.get(dim, 65536)
    if dim == 1:
        grid = _grid_1d()
    elif dim == 2:
        grid = _grid_2d(size)
    elif dim == 3:
        grid = _grid_3d(size)
    else:
        grid = _grid_nd(dim, size)
    grid.assert_valid()
    return grid
