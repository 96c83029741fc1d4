"""Cross-sample dispersion of a fitted HAPT.

For a new sample's density q*(x) the variance given the common measure is
averaged over the posterior:

    V(x) = E[ Var(q*(x) | q) ] = E[q*(x)^2] - E[q(x)^2].

Along the leaf path of x both second moments are products of per-node
factors (``vl``/``vr`` for the fresh sample, ``m2``/``q2`` for the common
split), so each is one path expectation. Every ``vl`` factor dominates the
matching ``m2`` factor under the same posterior weights, hence V >= 0 up to
rounding. The coefficient of variation is the plug-in sqrt(V) / E[q(x)].
"""

from dataclasses import dataclass

import numpy as np

# negative variances within this fraction of the fresh-sample moment are rounding
CLAMP_RTOL = 1e-12
# mean densities below this signal a truncation or domain problem
DENSITY_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class DispersionGrid:
    points: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    cv: np.ndarray
    clamped: int = 0


def leaf_variance(fit):
    """Variance per leaf and the number of leaves clamped from below to zero.

    The count is also recorded in ``fit.diagnostics["variance_clamps"]``.
    """
    fresh, common = fit.second_moments
    var = (fresh - common) / fit.tree.leaf_width ** 2
    scale = fresh / fit.tree.leaf_width ** 2
    negative = var < 0
    if np.any(var < -CLAMP_RTOL * scale):
        worst = int(np.argmin(var / scale))
        raise FloatingPointError(
            f"variance {var[worst]:.3g} at leaf {worst} is negative beyond rounding"
        )
    clamped = int(negative.sum())
    fit.diagnostics["variance_clamps"] = clamped
    return np.where(negative, 0.0, var), clamped


def variance_function(fit, x):
    """Posterior expected variance of a new sample's density at ``x``."""
    var, _ = leaf_variance(fit)
    return var[fit.tree.leaf_index(x)]


def _cv(mean, var):
    mean = np.asarray(mean, dtype=float)
    if np.any(mean < DENSITY_FLOOR):
        raise FloatingPointError("mean density underflow; check the domain and truncation depth")
    return np.sqrt(var) / mean


def cv_function(fit, x):
    """Coefficient of variation ``sqrt(V(x)) / E[q(x)]``; zero where V clamps to zero."""
    return _cv(fit.mean_density(x), variance_function(fit, x))


def dispersion_grid(fit, n_points):
    """Mean density, variance and CV on ``n_points`` evenly spaced points including both ends."""
    if n_points < 2:
        raise ValueError(f"need at least two grid points, got {n_points}")
    a, b = fit.tree.domain
    x = np.linspace(a, b, int(n_points))
    var, clamped = leaf_variance(fit)
    leaf = fit.tree.leaf_index(x)
    mean = fit.leaf_mass[leaf] / fit.tree.leaf_width
    variance = var[leaf]
    return DispersionGrid(x, mean, variance, _cv(mean, variance), clamped)
