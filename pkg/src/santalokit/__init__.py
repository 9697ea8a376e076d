"""Numerical toolkit for volume-product (Blaschke-Santalo type) inequalities.

Core layers:

* ``geometry`` -- bodies (vertex polytopes, radially sampled star bodies,
  balls) with support/gauge/volume/centroid and a convexity certificate.
* ``duality`` -- polars about arbitrary centers, Santalo points, volume
  products, and measure-theoretic volume-product checks.
* ``logconcave`` -- level bodies of log-concave functions, the centering
  solver, dual-function construction and the functional inequality checks.
* ``legendre`` -- discrete Legendre transforms, optimal centers, and the
  transform-based inequality with its equality diagnostics.
* ``symmetrization`` -- Steiner symmetrization and the second-moment
  ellipsoid characterization.
* ``cli`` / ``fuzz`` -- scenario runner and property fuzzer.
"""
from .errors import (CenterOutside, DegenerateBody, DivergentKernel,
                     EmptyDomain, HypothesisFail, InputError, QuadFail,
                     SantaloKitError, SolverFail)
from .geometry import (Ball, PolytopeV, StarBody, body_from_spec, centroid,
                       certify_convex, gauge, support, volume_polytope,
                       volume_star)
from .sphere import SphereGrid, ball_volume, sphere_grid
from .kernels import KernelConstants, RhoKernel, c_n_rho
from .duality import (DensityMeasure, PolarResult, bs_check,
                      measure_product_check, polar_wrt, santalo_point,
                      volume_product)
from .logconcave import (CenteredPair, ExpGaugeFn, GaussianFn, IndicatorFn,
                         LogConcaveFn, Product1DFn, body_Kz, find_center,
                         functional_santalo_verify, hypothesis_check,
                         inclusion_check, polar_function,
                         prekopa_geometric_check, radial_moment)
from .legendre import (CenterSolveResult, GridFn, biconjugate_check,
                       equality_diagnostics, legendre_santalo_verify,
                       legendre_transform, legendre_transform_brute,
                       optimal_center)
from .symmetrization import (SteinerResult, ellipsoid_test,
                             steiner_symmetrize, volume_product_monotonicity)
from .reports import Check, Report

__version__ = "0.1.0"
