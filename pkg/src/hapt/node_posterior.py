"""Local evidence and posterior moments of one node of the hierarchy.

At a node with base split ``theta0`` and per-sample child counts
``(l_i, r_i)``, conditional on the shrinkage states of the two
concentration chains, the node contributes

    Z = ∫∫∫ Beta(θ; θ0 ν, (1-θ0) ν) π(ν)
            ∏_i B(θτ + l_i, (1-θ)τ + r_i) / B(θτ, (1-θ)τ) π(τ)  dτ dν dθ.

The integrand factors into g(θ, τ) h(θ, ν), so Z is computed as a 1-D
outer integral over θ of two independent 1-D inner integrals. Moments
needed downstream are carried as extra components on the same abscissae.

θ is integrated in the variable t with θ = expit(π sinh t), which clusters
points at both ends and tames the power singularities of the Beta prior
when θ0 ν < 1. The concentrations are integrated over log τ and log ν, in
which their conditional priors are uniform.

A complete-shrinkage state is handled analytically: ν = ∞ pins θ = θ0;
τ = ∞ pins every θ_i = θ so the sample factor becomes θ^l (1-θ)^r.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaln, gammaln

from .quadrature import QuadratureError, adaptive_log_quad, batched_log_quad

T_MAX = 6.0
DEFAULT_TOL = 1e-8
INNER_TOL_FACTOR = 1.0
LOG_PI = np.log(np.pi)

# component order of the moment table
_BASE = ("log_z", "m1", "m2", "q2", "d")


@dataclass(frozen=True, eq=False)
class NodeInput:
    theta0: float
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1, 2)
        if counts.shape[0] < 1:
            raise ValueError("a node needs at least one sample")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if not 0 < self.theta0 < 1:
            raise ValueError(f"theta0 must lie in (0, 1), got {self.theta0}")
        object.__setattr__(self, "counts", counts)

    @property
    def k(self):
        return self.counts.shape[0]


@dataclass(frozen=True, eq=False)
class NodeEvidence:
    """Evidence and posterior moments of θ (and τ) for one state pair.

    ``vl = E[θ(θτ+1)/(τ+1)]`` and ``vr = E[(1-θ)((1-θ)τ+1)/(τ+1)]`` are the
    second moments of a fresh sample's split; ``p[i]`` is the posterior mean
    of sample ``i``'s own split, ``E[(θτ + l_i)/(τ + n_i)]``.
    """

    log_evidence: float
    m1: float
    m2: float
    q2: float
    d: float
    p: np.ndarray

    @property
    def vl(self):
        return self.m2 + self.d

    @property
    def vr(self):
        return self.q2 + self.d


@dataclass(frozen=True, eq=False)
class NodeTable:
    """Evidence and moments for every ``(tau_state, nu_state)`` pair at one node.

    Arrays have shape ``(I_tau, I_nu)`` (``p`` adds a trailing sample axis).
    Pairs that were not requested carry ``log_z = -inf`` and zero moments.
    ``q2 = E[(1-θ)^2]`` and ``d = E[θ(1-θ)/(τ+1)]``.
    """

    log_z: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    q2: np.ndarray
    d: np.ndarray
    p: np.ndarray

    @property
    def vl(self):
        return self.m2 + self.d

    @property
    def vr(self):
        return self.q2 + self.d

    def evidence(self, s_tau, s_nu):
        return NodeEvidence(
            float(self.log_z[s_tau, s_nu]), float(self.m1[s_tau, s_nu]),
            float(self.m2[s_tau, s_nu]), float(self.q2[s_tau, s_nu]),
            float(self.d[s_tau, s_nu]), self.p[s_tau, s_nu].copy(),
        )


def theta_of_t(t):
    """Return ``log θ``, ``log(1-θ)`` and ``log dθ/dt`` for θ = expit(π sinh t)."""
    s = np.pi * np.sinh(t)
    log_th = -np.logaddexp(0.0, -s)
    log_1m = -np.logaddexp(0.0, s)
    at = np.abs(t)
    log_cosh = at + np.log1p(np.exp(-2.0 * at)) - np.log(2.0)
    return log_th, log_1m, LOG_PI + log_cosh + log_th + log_1m


def t_of_theta(theta):
    theta = np.asarray(theta, dtype=float)
    return np.arcsinh((np.log(theta) - np.log1p(-theta)) / np.pi)


# factors per running product before taking a log (keeps products far from overflow)
_PRODUCT_CHUNK = 48


def log_rising_sum(a, n, w):
    """``sum_i w_i [log Γ(a + n_i) - log Γ(a)]`` for integer counts ``n``.

    Counts are grouped into runs between consecutive distinct values; each
    run is one product of ``(a + j)`` terms, so small counts cost a few
    multiplications instead of gammaln calls. Large counts use gammaln.
    """
    a = np.asarray(a, dtype=float)
    n = np.asarray(n)
    w = np.asarray(w, dtype=float)
    vals = np.unique(n[n > 0])
    if len(vals) == 0:
        return np.zeros(np.shape(a))
    if vals[-1] > 8 * len(vals) + 16:
        return np.tensordot(gammaln(a[..., None] + n) - gammaln(a)[..., None], w, axes=(-1, 0))
    total = np.zeros(np.shape(a))
    prev = 0
    for v in vals:
        weight = w[n >= v].sum()
        for lo in range(prev, v, _PRODUCT_CHUNK):
            prod = a + lo
            for j in range(lo + 1, min(lo + _PRODUCT_CHUNK, v)):
                prod = prod * (a + j)
            total += weight * np.log(prod)
        prev = v
    return total


def _unique_pairs(counts):
    nonzero = counts.sum(axis=1) > 0
    if not np.any(nonzero):
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), np.full(len(counts), -1)
    pairs, inverse, mult = np.unique(counts[nonzero], axis=0, return_inverse=True, return_counts=True)
    index = np.full(len(counts), -1)
    index[nonzero] = np.asarray(inverse).ravel()
    return pairs, mult, index


class _Integrand:
    """Log-integrands of one node; shared by every state pair."""

    def __init__(self, theta0, pairs, mult, tau, nu, tau_states, nu_states, tol, moments):
        self.theta0 = theta0
        self.il = pairs[:, 0]
        self.ir = pairs[:, 1]
        self.nl = self.il.astype(float)
        self.nr = self.ir.astype(float)
        self.n = self.nl + self.nr
        self.mult = mult.astype(float)
        self.total_l = float(self.mult @ self.nl)
        self.total_r = float(self.mult @ self.nr)
        self.tau = tau
        self.nu = nu
        self.tau_states = list(tau_states)
        self.nu_finite = [s for s in nu_states if s != nu.absorbing]
        self.tol = tol
        self.moments = moments
        self.n_pairs = len(pairs) if moments else 0
        self.n_g = (2 + self.n_pairs) if moments else 1
        self.t_max = self._truncation()

    def _truncation(self):
        """Half-width in t beyond which the θ prior leaves less than ~tol/1000 mass.

        Near θ = 0 the prior mass below θ is about θ**a with a = θ0 ν, and
        θ = exp(-π sinh t) there, so small shapes need a wider range.
        """
        if not self.nu_finite:
            return T_MAX
        nu_lo = min(self.nu.supports[s][0] for s in self.nu_finite)
        a = min(self.theta0, 1.0 - self.theta0) * nu_lo
        need = np.arcsinh((np.log(1.0 / self.tol) + 7.0) / (np.pi * a))
        return max(T_MAX, float(need))

    @staticmethod
    def _log_grid(cfg, states):
        """Per-state ``log lo`` and ``log(hi / lo)``; u in [0, 1] maps to ``lo * (hi/lo)**u``.

        The log-uniform prior density exactly cancels the Jacobian of this map,
        and a point-mass state (``lo == hi``) has zero span, so both kinds of
        state integrate to the prior expectation over ``u``.
        """
        lo = np.array([cfg.supports[s][0] for s in states])
        hi = np.array([cfg.supports[s][1] for s in states])
        return np.log(lo), np.log(hi / lo)

    # -- g: samples given θ, integrated over τ ---------------------------------
    def log_g(self, log_th, log_1m, row_weight=None):
        """``(S, m, n_g)`` log of ∫ g(θ, τ) f(θ, τ) π(τ | s) dτ for each τ state ``s``."""
        m = len(log_th)
        out = np.empty((len(self.tau_states), m, self.n_g))
        finite = [s for s in self.tau_states if s != self.tau.absorbing]
        if self.tau.absorbing in self.tau_states:
            z = self.total_l * log_th + self.total_r * log_1m
            ab = out[self.tau_states.index(self.tau.absorbing)]
            ab[:, 0] = z
            if self.moments:
                ab[:, 1] = -np.inf
                ab[:, 2:] = (z + log_th)[:, None]
        if not finite:
            return out
        base_u, span = self._log_grid(self.tau, finite)
        base_u, span = base_u[:, None, None, None], span[:, None, None, None]
        th = np.exp(log_th)[None, :, None, None]
        om = np.exp(log_1m)[None, :, None, None]
        n_s = len(finite)

        def f(u):
            log_tau = base_u + span * u[None, None, :, None]
            tau = np.exp(log_tau)
            a = th * tau
            b = om * tau
            base = (log_rising_sum(a[..., 0], self.il, self.mult)
                    + log_rising_sum(b[..., 0], self.ir, self.mult)
                    - log_rising_sum(tau[..., 0], self.il + self.ir, self.mult))[..., None]
            if not self.moments:
                return base.reshape(n_s * m, -1, 1)
            comps = [base, base - np.log1p(tau)]
            if self.n_pairs:
                comps.append(base + np.log(a + self.nl) - np.log(tau + self.n))
            return np.concatenate(comps, axis=-1).reshape(n_s * m, len(u), -1)

        weight = None if row_weight is None else np.tile(row_weight, n_s)
        vals = batched_log_quad(f, 0.0, 1.0, self.tol * INNER_TOL_FACTOR, n_s * m, row_weight=weight)
        vals = vals.reshape(n_s, m, -1)
        for j, s in enumerate(finite):
            out[self.tau_states.index(s)] = vals[j]
        return out

    # -- h: prior on θ given ν, integrated over ν --------------------------------
    def log_h(self, log_th, log_1m, row_weight=None):
        """``(S, m)`` log of ∫ Beta(θ; θ0 ν, (1-θ0) ν) π(ν | s) dν for finite ν states."""
        base_u, span = self._log_grid(self.nu, self.nu_finite)
        base_u, span = base_u[:, None, None, None], span[:, None, None, None]
        t0 = self.theta0
        lt = log_th[None, :, None, None]
        l1 = log_1m[None, :, None, None]
        n_s, m = len(self.nu_finite), len(log_th)

        def f(u):
            nu = np.exp(base_u + span * u[None, None, :, None])
            a = t0 * nu
            b = (1.0 - t0) * nu
            return ((a - 1.0) * lt + (b - 1.0) * l1 - betaln(a, b)).reshape(n_s * m, len(u), 1)

        weight = None if row_weight is None else np.tile(row_weight, n_s)
        vals = batched_log_quad(f, 0.0, 1.0, self.tol * INNER_TOL_FACTOR, n_s * m, row_weight=weight)
        return vals.reshape(n_s, m)

    # -- outer integrand over t ---------------------------------------------------
    def n_components(self):
        return (len(_BASE) + self.n_pairs) if self.moments else 1

    def outer(self, t):
        log_th, log_1m, log_jac = theta_of_t(t)
        gs = self.log_g(log_th, log_1m, row_weight=log_jac)
        hs = self.log_h(log_th, log_1m, row_weight=log_jac)
        nc = self.n_components()
        out = np.empty((len(t), len(gs), len(hs), nc))
        for a, g in enumerate(gs):
            for b, h in enumerate(hs):
                w = h + log_jac
                z = g[:, 0] + w
                out[:, a, b, 0] = z
                if self.moments:
                    out[:, a, b, 1] = z + log_th
                    out[:, a, b, 2] = z + 2.0 * log_th
                    out[:, a, b, 3] = z + 2.0 * log_1m
                    out[:, a, b, 4] = g[:, 1] + log_th + log_1m + w
                    out[:, a, b, 5:] = g[:, 2:] + w[:, None]
        if np.any(np.isnan(out)) or np.any(out == np.inf):
            raise FloatingPointError("non-finite node integrand")
        return out.reshape(len(t), -1)

    def breakpoints(self):
        t0 = self.theta0
        pts = [t0]
        n = self.total_l + self.total_r
        if n > 0:
            hat = (self.total_l + 0.5) / (n + 1.0)
            sd = np.sqrt(hat * (1 - hat) / (n + 2.0))
            pts += [hat + c * sd for c in (-8, -4, -2, -1, 0, 1, 2, 4, 8)]
        for s in self.nu_finite:
            nu_hi = self.nu.supports[s][1]
            sd = np.sqrt(t0 * (1 - t0) / (nu_hi + 1.0))
            pts += [t0 + c * sd for c in (-6, -3, 3, 6)]
        pts = np.array([p for p in pts if 1e-250 < p < 1 - 1e-15])
        ts = np.concatenate([np.linspace(-self.t_max, self.t_max, 9), t_of_theta(pts)])
        ts = np.unique(np.clip(ts, -self.t_max, self.t_max))
        return ts


def _compute_table(theta0, pairs, mult, tau, nu, tau_states, nu_states, tol, moments):
    ig = _Integrand(theta0, pairs, mult, tau, nu, tau_states, nu_states, tol, moments)
    shape = (tau.state_count, nu.state_count)
    u = ig.n_pairs
    log_z = np.full(shape, -np.inf)
    m1, m2, q2, d = (np.zeros(shape) for _ in range(4))
    p = np.zeros(shape + (u,))

    if ig.nu_finite:
        nc = ig.n_components()
        breaks = ig.breakpoints()
        vals, _ = adaptive_log_quad(ig.outer, breaks, tol)
        vals = vals.reshape(len(ig.tau_states), len(ig.nu_finite), nc)
        for a, st in enumerate(ig.tau_states):
            for b, sn in enumerate(ig.nu_finite):
                v = vals[a, b]
                log_z[st, sn] = v[0]
                if moments:
                    m1[st, sn], m2[st, sn], q2[st, sn], d[st, sn] = np.exp(v[1:5] - v[0])
                    p[st, sn] = np.exp(v[5:] - v[0])

    if nu.absorbing in nu_states:
        sn = nu.absorbing
        lt = np.array([np.log(theta0)])
        l1 = np.array([np.log1p(-theta0)])
        gs = ig.log_g(lt, l1)[:, 0]
        for st, g in zip(ig.tau_states, gs):
            log_z[st, sn] = g[0]
            if moments:
                m1[st, sn] = theta0
                m2[st, sn] = theta0 ** 2
                q2[st, sn] = (1.0 - theta0) ** 2
                d[st, sn] = theta0 * (1.0 - theta0) * np.exp(g[1] - g[0])
                p[st, sn] = np.exp(g[2:] - g[0])

    if moments:
        # keep the second-moment inequalities exact under rounding
        m2[:] = np.maximum(m2, m1 ** 2)
        q2[:] = np.maximum(q2, (1.0 - m1) ** 2)
    for arr in (log_z, m1, m2, q2, d, p):
        arr.setflags(write=False)
    return log_z, m1, m2, q2, d, p


@lru_cache(maxsize=200_000)
def _cached_table(theta0, pair_key, mult_key, tau, nu, tau_states, nu_states, tol, moments):
    pairs = np.array(pair_key, dtype=np.int64).reshape(-1, 2)
    mult = np.array(mult_key, dtype=np.int64)
    return _compute_table(theta0, pairs, mult, tau, nu, tau_states, nu_states, tol, moments)


def clear_cache():
    _cached_table.cache_clear()


def node_table(inp, tau, nu, tol=DEFAULT_TOL, moments=True, tau_states=None, nu_states=None,
               node=None):
    """Evidence and moments of every requested state pair at one node.

    ``tau_states`` / ``nu_states`` restrict the computation (default: all
    states reachable under each chain's root distribution). Results are
    memoized on the multiset of nonzero per-sample count pairs.
    """
    if tau_states is None:
        tau_states = np.flatnonzero(tau.reachable())
    if nu_states is None:
        nu_states = np.flatnonzero(nu.reachable())
    pairs, mult, index = _unique_pairs(inp.counts)
    try:
        log_z, m1, m2, q2, d, p_u = _cached_table(
            float(inp.theta0), tuple(pairs.ravel().tolist()), tuple(mult.tolist()), tau, nu,
            tuple(int(s) for s in tau_states), tuple(int(s) for s in nu_states), float(tol),
            bool(moments),
        )
    except QuadratureError as exc:
        raise QuadratureError(f"node {node}: {exc}", exc.error_estimate, node) from exc
    if moments and p_u.shape[-1]:
        # samples without data at this node keep the common split mean
        p = np.where(index[None, None, :] >= 0, p_u[..., np.maximum(index, 0)], m1[..., None])
    elif moments:
        p = np.repeat(m1[..., None], inp.k, axis=-1)
    else:
        p = np.zeros(log_z.shape + (inp.k,))
    return NodeTable(log_z, m1, m2, q2, d, p)


def local_evidence(inp, s_tau, s_nu, tau, nu, tol=DEFAULT_TOL):
    """Evidence and moments of a single ``(s_tau, s_nu)`` state pair."""
    for s, cfg, name in ((s_tau, tau, "tau"), (s_nu, nu, "nu")):
        if not 0 <= s < cfg.state_count:
            raise ValueError(f"{name} state {s} out of range")
    table = node_table(inp, tau, nu, tol, True, (s_tau,), (s_nu,))
    return table.evidence(s_tau, s_nu)
