"""Seeded generators for the simulation settings on (0, 1].

Every mixture component is a Beta law rescaled to an interval ``[lo, hi]``
(uniforms are Beta(1, 1)). Randomness comes from Philox, a counter-based
generator; sample ``i`` of a scenario draws from its own stream spawned
from the scenario seed, so samples can be produced in any order or in
parallel with identical results.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

SCENARIOS = ("s1", "s2", "s3", "disp", "clust", "clust_het")

# (a, b, lo, hi) per component, and expected weights for the Dirichlet scenarios
_DIRICHLET_MIXTURES = {
    "s1": (
        [(1, 1, 0.0, 1.0), (2, 2, 0.0, 1.0), (30, 10, 0.0, 1.0), (10, 30, 0.0, 1.0)],
        (0.1, 0.1, 0.4, 0.4),
    ),
    "s2": (
        [(1, 1, 0.0, 1.0), (1, 1, 0.18, 0.20), (1, 1, 0.49, 0.51), (1, 1, 0.80, 0.82)],
        (0.1, 0.3, 0.3, 0.3),
    ),
    "s3": (
        [(1, 1, 0.0, 1.0), (1, 1, 0.25, 0.5), (2, 2, 0.25, 0.5), (4000, 6000, 0.0, 1.0)],
        (0.1, 0.3, 0.4, 0.2),
    ),
}
_DISP_COMPONENTS = [(2, 2, 0.0, 1.0), (1, 12, 0.0, 1.0), (12, 1, 0.0, 1.0)]
_CLUST_BETAS = [(1, 5), (3, 3), (5, 1)]
_CLUST_SHARES = (3, 2, 1)
_HET_COMPONENTS = [(1, 6, 0.0, 1.0), (2, 5, 0.0, 1.0), (5, 2, 0.0, 1.0), (6, 1, 0.0, 1.0)]
# per-cluster means of v1, v2 at concentrations 2000 and 400; v3 ~ Beta(1, 1) in all clusters
_HET_V1_MEANS = (0.85, 0.5, 0.15)
_HET_V2_MEANS = (0.85, 0.5, 0.15)
_HET_V1_TOTAL = 2000.0
_HET_V2_TOTAL = 400.0

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class Scenario:
    id: str
    dirichlet_total: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.id!r}; expected one of {', '.join(SCENARIOS)}")
        if not self.dirichlet_total > 0:
            raise ValueError(f"dirichlet_total must be positive, got {self.dirichlet_total}")

    def dirichlet_params(self):
        """Dirichlet parameters of the component weights (s1, s2, s3 only)."""
        if self.id not in _DIRICHLET_MIXTURES:
            raise ValueError(f"scenario {self.id!r} has no Dirichlet weights")
        return self.dirichlet_total * np.asarray(_DIRICHLET_MIXTURES[self.id][1])


@dataclass(frozen=True, eq=False)
class MixtureDensity:
    """Density of a mixture of rescaled Beta components on (0, 1]."""

    components: tuple
    weights: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for (a, b, lo, hi), w in zip(self.components, self.weights):
            out = out + w * stats.beta.pdf(x, a, b, loc=lo, scale=hi - lo)
        return out

    def sample(self, n, rng):
        counts = rng.multinomial(n, self.weights)
        parts = []
        for (a, b, lo, hi), c in zip(self.components, counts):
            if a == 1 and b == 1:
                u = 1.0 - rng.random(c)
            else:
                u = rng.beta(a, b, size=c)
            parts.append(lo + (hi - lo) * u)
        x = np.concatenate(parts)
        rng.shuffle(x)
        return np.maximum(x, _TINY)


@dataclass(frozen=True, eq=False)
class SimulatedData:
    samples: list
    densities: list
    labels: np.ndarray
    weights: np.ndarray


def sample_streams(seed, n_samples):
    """One independent Philox generator per sample index."""
    children = np.random.SeedSequence(seed).spawn(n_samples)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def cluster_labels(n_samples):
    """Cluster sizes in the ratio 3:2:1 (15/10/5 at 30 samples, 6/4/2 at 12)."""
    sizes = [n_samples * s // sum(_CLUST_SHARES) for s in _CLUST_SHARES]
    sizes[0] += n_samples - sum(sizes)
    return np.repeat(np.arange(3), sizes)


def _weights(scenario, label, rng):
    if scenario.id in _DIRICHLET_MIXTURES:
        return rng.dirichlet(scenario.dirichlet_params())
    if scenario.id == "disp":
        w1 = rng.beta(80, 20)
        v = rng.beta(1, 1)
        return np.array([w1, v * (1 - w1), (1 - v) * (1 - w1)])
    if scenario.id == "clust":
        w = rng.beta(10, 10)
        return np.array([1 - w, w])
    m1, m2 = _HET_V1_MEANS[label], _HET_V2_MEANS[label]
    v1 = rng.beta(m1 * _HET_V1_TOTAL, (1 - m1) * _HET_V1_TOTAL)
    v2 = rng.beta(m2 * _HET_V2_TOTAL, (1 - m2) * _HET_V2_TOTAL)
    v3 = rng.beta(1, 1)
    return np.array([v1 * v2, v1 * (1 - v2), (1 - v1) * v3, (1 - v1) * (1 - v3)])


def _components(scenario, label):
    if scenario.id in _DIRICHLET_MIXTURES:
        return _DIRICHLET_MIXTURES[scenario.id][0]
    if scenario.id == "disp":
        return _DISP_COMPONENTS
    if scenario.id == "clust":
        a, b = _CLUST_BETAS[label]
        return [(1, 1, 0.0, 1.0), (a, b, 0.0, 1.0)]
    return _HET_COMPONENTS


def generate(scenario, n_samples, n_obs):
    """Draw ``n_samples`` samples of ``n_obs`` points each.

    Returns a :class:`SimulatedData` with the observations, the true density
    of every sample, cluster labels (all zero outside the clustering
    scenarios) and the per-sample component weights.
    """
    if n_samples < 1 or n_obs < 1:
        raise ValueError("n_samples and n_obs must be at least 1")
    if scenario.id in ("clust", "clust_het"):
        labels = cluster_labels(n_samples)
    else:
        labels = np.zeros(n_samples, dtype=np.int64)
    samples, densities, weights = [], [], []
    for label, rng in zip(labels, sample_streams(scenario.seed, n_samples)):
        w = _weights(scenario, label, rng)
        dens = MixtureDensity(tuple(_components(scenario, label)), w)
        samples.append(dens.sample(n_obs, rng))
        densities.append(dens)
        weights.append(w)
    return SimulatedData(samples, densities, labels, np.array(weights))


def mean_weight_density(scenario_id):
    """True density of a Dirichlet scenario under its expected weights."""
    comps, w = _DIRICHLET_MIXTURES[scenario_id]
    return MixtureDensity(tuple(comps), np.asarray(w))


def l1_error(true_density, estimated_density, grid_size=4096, domain=(0.0, 1.0)):
    """Trapezoid approximation of ∫ |f - f_hat| on ``grid_size`` evenly spaced points."""
    if grid_size < 256:
        raise ValueError(f"grid_size must be at least 256, got {grid_size}")
    x = np.linspace(domain[0], domain[1], int(grid_size))
    return float(trapezoid(np.abs(true_density(x) - estimated_density(x)), x))
