"""Stochastically increasing shrinkage (SIS) prior on a concentration sequence.

States are numbered ``0 .. I-1`` (0-based). State ``j < I-1`` draws the
concentration from a log-uniform law on ``supports[j] = [lo, hi)``; the
supports are disjoint and increasing, so higher states shrink harder. The
last state, ``I-1``, is complete shrinkage (concentration fixed at infinity)
and is absorbing under the exponential-kernel transition matrix.

A support with ``lo == hi`` is a point mass at ``lo``; this is used to pin
a concentration parameter in tests and closed-form checks.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def build_transition(state_count, beta):
    """Upper-triangular transition matrix with ``P[i, j] ∝ exp(beta * (j - i))``, ``j >= i``."""
    state_count = int(state_count)
    if state_count < 2:
        raise ValueError(f"need at least two shrinkage states, got {state_count}")
    if beta < 0 or not np.isfinite(beta):
        raise ValueError(f"beta must be finite and >= 0, got {beta}")
    gamma = np.zeros((state_count, state_count))
    for i in range(state_count):
        w = np.exp(beta * (np.arange(state_count - i) - (state_count - 1 - i)))
        gamma[i, i:] = w / w.sum()
    return gamma


@dataclass(frozen=True)
class SisConfig:
    state_count: int
    supports: tuple
    beta: float = 1.0
    root_dist: tuple = None

    def __post_init__(self):
        if self.state_count < 2:
            raise ValueError(f"need at least two shrinkage states, got {self.state_count}")
        supports = tuple((float(lo), float(hi)) for lo, hi in self.supports)
        if len(supports) != self.state_count - 1:
            raise ValueError(
                f"{self.state_count} states need {self.state_count - 1} finite supports, "
                f"got {len(supports)}"
            )
        for j, (lo, hi) in enumerate(supports):
            if not (0 < lo <= hi < np.inf):
                raise ValueError(f"state {j}: bad support [{lo}, {hi})")
            if j and lo < supports[j - 1][1]:
                raise ValueError(f"state {j}: support overlaps state {j - 1}")
            if j and lo == hi == supports[j - 1][1]:
                raise ValueError(f"state {j}: point mass coincides with state {j - 1}")
        object.__setattr__(self, "supports", supports)
        if self.root_dist is None:
            root = np.full(self.state_count, 1.0 / self.state_count)
        else:
            root = np.asarray(self.root_dist, dtype=float)
        if root.shape != (self.state_count,) or np.any(root < 0) or abs(root.sum() - 1) > 1e-12:
            raise ValueError(f"root_dist must be a probability vector of length {self.state_count}")
        object.__setattr__(self, "root_dist", tuple(float(r) for r in root))
        object.__setattr__(self, "beta", float(self.beta))
        build_transition(self.state_count, self.beta)

    @classmethod
    def from_boundaries(cls, boundaries, beta=1.0, root_dist=None):
        """States ``[c0, c1), [c1, c2), ...`` plus the complete-shrinkage state."""
        c = [float(v) for v in boundaries]
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError(f"boundaries must be strictly increasing, got {c}")
        return cls(len(c), tuple(zip(c[:-1], c[1:])), beta, root_dist)

    @property
    def absorbing(self):
        return self.state_count - 1

    @property
    def boundaries(self):
        """Cutpoints when the supports tile an interval, else ``None``."""
        lows = [lo for lo, _ in self.supports]
        if all(hi == nxt for (_, hi), nxt in zip(self.supports, lows[1:])) and all(
            lo < hi for lo, hi in self.supports
        ):
            return tuple(lows) + (self.supports[-1][1],)
        return None

    @cached_property
    def transition(self):
        gamma = build_transition(self.state_count, self.beta)
        gamma.setflags(write=False)
        return gamma

    def reachable(self):
        """States with positive prior probability somewhere in the tree."""
        first = next(i for i, r in enumerate(self.root_dist) if r > 0)
        return np.arange(self.state_count) >= first

    def to_dict(self):
        return {
            "state_count": self.state_count,
            "supports": [list(s) for s in self.supports],
            "beta": self.beta,
            "root_dist": list(self.root_dist),
        }

    @classmethod
    def from_dict(cls, d):
        if "supports" in d:
            return cls(d["state_count"], tuple(map(tuple, d["supports"])), d.get("beta", 1.0),
                       d.get("root_dist"))
        cfg = cls.from_boundaries(d["boundaries"], d.get("beta", 1.0), d.get("root_dist"))
        if "state_count" in d and d["state_count"] != cfg.state_count:
            raise ValueError("state_count disagrees with the number of boundaries")
        return cfg


def default_config(state_count=4, beta=1.0):
    """Boundaries ``1, 4, 16, ...`` (powers of four), uniform root, stickiness ``beta``."""
    return SisConfig.from_boundaries([4.0 ** j for j in range(state_count)], beta=beta)


def state_prior_density(config, state, value):
    """Conditional prior density of the concentration given a finite ``state``."""
    if not 0 <= state < config.state_count:
        raise ValueError(f"state {state} out of range for {config.state_count} states")
    if state == config.absorbing:
        raise ValueError("the complete-shrinkage state is a point mass at infinity")
    lo, hi = config.supports[state]
    if lo == hi:
        raise ValueError(f"state {state} is a point mass at {lo}")
    value = np.asarray(value, dtype=float)
    inside = (value >= lo) & (value < hi)
    with np.errstate(divide="ignore"):
        dens = 1.0 / (value * np.log(hi / lo))
    return np.where(inside, dens, 0.0)


def simulate_chains(config, depth, n_chains, rng, start=None):
    """Simulate state sequences down one branch; returns ``(n_chains, depth)`` states."""
    gamma = config.transition
    cdf = np.cumsum(gamma, axis=1)
    if start is None:
        state = rng.choice(config.state_count, size=n_chains, p=config.root_dist)
    else:
        state = np.full(n_chains, int(start))
    out = np.empty((n_chains, depth), dtype=np.int64)
    out[:, 0] = state
    for level in range(1, depth):
        u = rng.random(n_chains)
        state = np.minimum((u[:, None] > cdf[state]).sum(axis=1), config.state_count - 1)
        out[:, level] = state
    return out
