"""No-pooling baseline: an independent adaptive Pólya tree per sample.

Each sample is fitted alone with the sample-level concentration pinned at
infinity (the τ chain starts and stays in complete shrinkage), which
leaves a single adaptive Pólya tree with an SIS prior on ν.
"""

import numpy as np

from .partition import bin_data
from .sis import SisConfig, default_config
from .tree_hmm import fit


def pinned_tau(config=None):
    """Copy of ``config`` whose root puts all mass on complete shrinkage."""
    config = config if config is not None else default_config()
    root = np.zeros(config.state_count)
    root[config.absorbing] = 1.0
    return SisConfig(config.state_count, config.supports, config.beta, tuple(root))


def fit_independent(tree, samples, nu=None, tol=None, threads=1):
    """One single-sample fit per sample; returns the list of fits."""
    tau = pinned_tau()
    kwargs = {} if tol is None else {"tol": tol}
    return [fit(tree, bin_data(tree, [xs]), tau, nu, threads=threads, **kwargs) for xs in samples]
