"""Hidden Markov tree recursion over the joint shrinkage states.

Each internal node carries a joint state ``s = (s_tau, s_nu)`` flattened as
``s_tau * I_nu + s_nu``. The two chains are independent a priori, so the
joint transition matrix is the Kronecker product of the chain matrices.

The upward pass computes, in log space,

    beta_A(s) = Z(A | s) * phi(A_l | s) * phi(A_r | s),
    phi(C | s) = sum_s' Gamma[s, s'] beta_C(s'),

with ``phi = 1`` below the truncation depth. The downward pass turns these
into posterior state marginals and posterior transition matrices
``T_C[s, s'] = Gamma[s, s'] beta_C(s') / phi(C | s)``, which is all that is
needed to take posterior expectations of products of per-node factors.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .node_posterior import DEFAULT_TOL, NodeInput, node_table
from .quadrature import logsumexp
from .sis import default_config


def joint_transition(tau, nu):
    return np.kron(tau.transition, nu.transition)


def joint_root(tau, nu):
    return np.kron(np.asarray(tau.root_dist), np.asarray(nu.root_dist))


def _log_matvec(gamma, log_v):
    """``log(gamma @ exp(log_v))`` row-wise for ``log_v`` of shape ``(n, J)``."""
    top = np.max(log_v, axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(log_v - top) @ gamma.T) + top


def upward(log_z, gamma, depth):
    """Upward messages ``log beta`` and ``log phi`` for heap-ordered nodes."""
    log_beta = np.empty_like(log_z)
    log_phi = np.full_like(log_z, np.nan)
    bottom = slice(2 ** (depth - 1) - 1, 2 ** depth - 1)
    log_beta[bottom] = log_z[bottom]
    for level in range(depth - 2, -1, -1):
        sl = slice(2 ** level - 1, 2 ** (level + 1) - 1)
        ch = slice(2 ** (level + 1) - 1, 2 ** (level + 2) - 1)
        phi = _log_matvec(gamma, log_beta[ch])
        log_phi[ch] = phi
        log_beta[sl] = log_z[sl] + phi[0::2] + phi[1::2]
    return log_beta, log_phi


@dataclass(eq=False)
class HaptFit:
    """Posterior of a HAPT model on a truncated tree.

    Moment arrays are indexed ``[node, joint_state]`` over internal nodes in
    heap order; ``p`` has a trailing sample axis.
    """

    tree: object
    counts: object
    tau: object
    nu: object
    tol: float
    log_z: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    q2: np.ndarray
    d: np.ndarray
    p: np.ndarray
    log_beta: np.ndarray = field(repr=False)
    log_phi: np.ndarray = field(repr=False)
    log_ml: float = 0.0
    has_moments: bool = True
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def k(self):
        return self.counts.k

    @property
    def n_joint(self):
        return self.tau.state_count * self.nu.state_count

    @cached_property
    def gamma(self):
        return joint_transition(self.tau, self.nu)

    @cached_property
    def root(self):
        return joint_root(self.tau, self.nu)

    @property
    def log_ml_tree(self):
        """Log marginal likelihood without the base-measure leaf terms."""
        with np.errstate(divide="ignore"):
            return float(logsumexp(np.log(self.root) + self.log_beta[0], axis=0))

    @cached_property
    def transitions(self):
        """Posterior transition matrices ``T[c, s, s']`` (row 0 unused)."""
        with np.errstate(invalid="ignore", over="ignore"):
            t = self.gamma[None] * np.exp(self.log_beta[:, None, :] - self.log_phi[:, :, None])
        t = np.where(np.isfinite(t), t, 0.0)
        t[0] = 0.0
        return t

    @cached_property
    def state_post(self):
        """Posterior joint-state marginals, shape ``(n_internal, J)``."""
        n = self.tree.n_internal
        post = np.empty((n, self.n_joint))
        with np.errstate(divide="ignore"):
            lr = np.log(self.root) + self.log_beta[0]
        post[0] = np.exp(lr - np.max(lr))
        post[0] /= post[0].sum()
        trans = self.transitions
        for level in range(1, self.tree.depth):
            sl = self.tree.level_slice(level)
            parents = np.repeat(post[self.tree.level_slice(level - 1)], 2, axis=0)
            post[sl] = np.einsum("nj,njk->nk", parents, trans[sl])
        return post

    def chain_post(self, chain):
        """Marginal posterior of one chain's states, ``(n_internal, I)``."""
        post = self.state_post.reshape(-1, self.tau.state_count, self.nu.state_count)
        return post.sum(axis=2) if chain == "tau" else post.sum(axis=1)

    # -- expectations of products ------------------------------------------------
    def expect_product(self, factors):
        """Posterior expectation of ``prod_A f*(A)`` given per-node, per-state ``E[f* | s]``."""
        factors = np.asarray(factors, dtype=float)
        if factors.shape[:2] != (self.tree.n_internal, self.n_joint):
            raise ValueError(
                f"factor table must have shape ({self.tree.n_internal}, {self.n_joint}), "
                f"got {factors.shape}"
            )
        if not np.all(np.isfinite(factors)):
            raise ValueError("factor table has missing or non-finite entries")
        trans = self.transitions
        depth = self.tree.depth
        r = factors[self.tree.level_slice(depth - 1)]
        for level in range(depth - 2, -1, -1):
            ch = self.tree.level_slice(level + 1)
            through = np.einsum("njk,nk...->nj...", trans[ch], r)
            r = factors[self.tree.level_slice(level)] * through[0::2] * through[1::2]
        return np.tensordot(self.state_post[0], r[0], axes=(0, 0))

    def path_expectations(self, left, right):
        """``E[prod_{A on path} f*(A)]`` for every leaf path at once.

        ``left[A, s]`` is used when the path goes to ``A``'s left child and
        ``right[A, s]`` otherwise. Extra trailing axes are carried along.
        Returns an array of shape ``(n_leaves, ...)``.
        """
        trans = self.transitions
        depth = self.tree.depth
        w = self.state_post[0][None]
        extra = left.shape[2:]
        w = w.reshape(w.shape + (1,) * len(extra))
        for level in range(depth):
            sl = self.tree.level_slice(level)
            wl = w * left[sl]
            wr = w * right[sl]
            wc = np.stack([wl, wr], axis=1).reshape((-1,) + wl.shape[1:])
            if level == depth - 1:
                return wc.sum(axis=1)
            w = np.einsum("nj...,njk->nk...", wc, trans[self.tree.level_slice(level + 1)])

    def _need_moments(self):
        if not self.has_moments:
            raise RuntimeError("this fit was computed without moment tables")

    @cached_property
    def leaf_mass(self):
        self._need_moments()
        return self.path_expectations(self.m1, 1.0 - self.m1)

    @cached_property
    def sample_leaf_mass(self):
        self._need_moments()
        return self.path_expectations(self.p, 1.0 - self.p)

    @cached_property
    def second_moments(self):
        """Leaf tables of ``E[prod v]`` (fresh-sample) and ``E[prod θ²]`` (common)."""
        self._need_moments()
        vl, vr = self.m2 + self.d, self.q2 + self.d
        return self.path_expectations(vl, vr), self.path_expectations(self.m2, self.q2)

    # -- densities ---------------------------------------------------------------
    def mean_density(self, x):
        """Posterior mean of the common density at ``x``."""
        return self.leaf_mass[self.tree.leaf_index(x)] / self.tree.leaf_width

    def predictive_density(self, x):
        """Posterior predictive density of a new sample; equals the mean density."""
        return self.mean_density(x)

    def sample_density(self, i, x):
        """Posterior mean density of sample ``i`` at ``x``."""
        if not 0 <= i < self.k:
            raise IndexError(f"sample index {i} out of range for {self.k} samples")
        return self.sample_leaf_mass[self.tree.leaf_index(x), i] / self.tree.leaf_width


def _node_tables(tree, counts, tau, nu, tol, moments, threads):
    def job(i):
        inp = NodeInput(float(tree.theta0[i]), counts.split_counts(i))
        return node_table(inp, tau, nu, tol, moments, node=i)

    idx = range(tree.n_internal)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, idx))
    return [job(i) for i in idx]


def fit(tree, counts, tau=None, nu=None, tol=DEFAULT_TOL, moments=True, threads=1):
    """Fit the HAPT posterior on ``tree`` given a :class:`CountTable`."""
    tau = tau if tau is not None else default_config()
    nu = nu if nu is not None else default_config()
    if counts.node_counts.shape[1] != tree.n_nodes:
        raise ValueError(
            f"count table has {counts.node_counts.shape[1]} nodes, tree has {tree.n_nodes}"
        )
    tables = _node_tables(tree, counts, tau, nu, tol, moments, threads)
    n, j = tree.n_internal, tau.state_count * nu.state_count
    log_z = np.stack([t.log_z.reshape(j) for t in tables])
    m1 = np.stack([t.m1.reshape(j) for t in tables])
    m2 = np.stack([t.m2.reshape(j) for t in tables])
    q2 = np.stack([t.q2.reshape(j) for t in tables])
    d = np.stack([t.d.reshape(j) for t in tables])
    p = np.stack([t.p.reshape(j, -1) for t in tables]) if moments else np.zeros((n, j, counts.k))

    gamma = joint_transition(tau, nu)
    log_beta, log_phi = upward(log_z, gamma, tree.depth)
    with np.errstate(divide="ignore"):
        log_tree = logsumexp(np.log(joint_root(tau, nu)) + log_beta[0], axis=0)
    leaf_n = counts.leaf_counts().sum(axis=0)
    base = -float(leaf_n.sum()) * np.log(tree.leaf_width)
    log_ml = float(log_tree + base)
    if not np.isfinite(log_ml):
        raise FloatingPointError("log marginal likelihood is not finite")
    return HaptFit(tree, counts, tau, nu, tol, log_z, m1, m2, q2, d, p, log_beta, log_phi,
                   log_ml, moments)
