"""Adaptive Gauss-Kronrod quadrature carried out entirely in log space.

All integrands handled here are positive, so an integral is represented by
its logarithm and every rule is a weighted log-sum-exp. This keeps node
evidences that are as small as ``exp(-5000)`` representable.

Two drivers are provided:

* :func:`adaptive_log_quad` integrates a vector-valued log-integrand
  ``logf(x) -> (m, P)`` on an interval with global adaptive bisection.
* :func:`batched_log_quad` integrates a family of integrands, one per row,
  on a shared partition: ``logf(x) -> (rows, m, P)``. Rows whose magnitude
  is negligible relative to the batch are not allowed to drive refinement.
"""

import numpy as np

# QUADPACK qk15 abscissae / weights (positive half, center last).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:7:2] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[9:14:2] = _WG[2::-1]

_RULES = np.stack([KRONROD_WEIGHTS, GAUSS_WEIGHTS], axis=1)

# rows more than this many nats below the batch maximum cannot force refinement
SIGNIFICANCE_NATS = 25.0


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance within the interval budget."""

    def __init__(self, message, error_estimate, node=None):
        super().__init__(message)
        self.error_estimate = error_estimate
        self.node = node


def _log_abs_diff(log_a, log_b):
    """log|exp(a) - exp(b)| for arrays, with -inf where both are -inf."""
    hi = np.maximum(log_a, log_b)
    lo = np.minimum(log_a, log_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = hi + np.log(-np.expm1(lo - hi))
    return np.where(np.isneginf(hi), -np.inf, out)


def _check_finite(lv):
    if np.any(np.isnan(lv)) or np.any(lv == np.inf):
        raise FloatingPointError("log-integrand returned nan or +inf")


def _abscissae(lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return mid[:, None] + half[:, None] * NODES[None, :], np.log(half)


def logsumexp(a, axis=0):
    """Lean log-sum-exp; ``-inf`` for all-``-inf`` slices."""
    top = np.max(a, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.sum(np.exp(a - top), axis=axis)) + np.squeeze(top, axis=axis)


def _apply_rule(lv, axis):
    """Log Kronrod and Gauss sums of log values ``lv`` along ``axis``."""
    lv = np.moveaxis(lv, axis, -1)
    top = np.max(lv, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        both = np.log(np.exp(lv - top) @ _RULES) + top
    return both[..., 0], both[..., 1]


def adaptive_log_quad(logf, breaks, rtol, max_intervals=400):
    """Integrate ``exp(logf)`` over ``[breaks[0], breaks[-1]]``.

    Parameters
    ----------
    logf : callable
        Maps abscissae of shape ``(m,)`` to log-integrand values ``(m, P)``.
    breaks : array_like
        Sorted initial breakpoints; the first and last are the limits.
    rtol : float
        Relative tolerance required of every component.
    max_intervals : int
        Budget on the number of subintervals.

    Returns
    -------
    log_integral : ndarray, shape (P,)
    rel_error : ndarray, shape (P,)
        Estimated relative error of each component.
    """
    breaks = np.asarray(breaks, dtype=float)
    lo, hi = breaks[:-1], breaks[1:]
    log_k = log_e = None
    log_rtol = np.log(rtol)
    while True:
        x, log_half = _abscissae(lo, hi)
        lv = np.asarray(logf(x.ravel()))
        _check_finite(lv)
        lv = lv.reshape(len(lo), 15, -1)
        k, g = _apply_rule(lv, axis=1)
        k = k + log_half[:, None]
        g = g + log_half[:, None]
        e = _log_abs_diff(k, g)
        if log_k is None:
            log_k, log_e, all_lo, all_hi = k, e, lo, hi
        else:
            log_k = np.concatenate([log_k, k])
            log_e = np.concatenate([log_e, e])
            all_lo = np.concatenate([all_lo, lo])
            all_hi = np.concatenate([all_hi, hi])

        total = logsumexp(log_k, axis=0)
        err = logsumexp(log_e, axis=0)
        with np.errstate(invalid="ignore"):
            rel = err - total
        rel = np.where(np.isneginf(err), -np.inf, rel)
        if np.all(rel <= log_rtol):
            return total, np.exp(rel)

        n = len(log_k)
        with np.errstate(invalid="ignore"):
            score = np.max(np.where(np.isneginf(log_e), -np.inf, log_e - total), axis=1)
        split = score > log_rtol - np.log(n)
        split[np.argmax(score)] = True
        if n + split.sum() > max_intervals:
            raise QuadratureError(
                f"adaptive quadrature exceeded {max_intervals} intervals "
                f"(relative error {np.exp(np.max(rel)):.3g}, tolerance {rtol:.3g})",
                float(np.exp(np.max(rel))),
            )
        keep = ~split
        mids = 0.5 * (all_lo[split] + all_hi[split])
        lo = np.concatenate([all_lo[split], mids])
        hi = np.concatenate([mids, all_hi[split]])
        log_k, log_e = log_k[keep], log_e[keep]
        all_lo, all_hi = all_lo[keep], all_hi[keep]


def batched_log_quad(logf, a, b, rtol, n_rows, row_weight=None, max_intervals=64):
    """Integrate one log-integrand per row over ``[a, b]`` on a shared partition.

    ``logf`` maps abscissae ``(q,)`` to values ``(n_rows, q, P)``. Component 0
    decides which rows are significant: a row counts when its integral plus
    ``row_weight`` lies within ``SIGNIFICANCE_NATS`` of the batch maximum.
    Only significant rows are held to ``rtol``.

    A degenerate interval (``a == b``) is a point mass and returns
    ``logf([a])`` unchanged.

    Returns the log integrals, shape ``(n_rows, P)``.
    """
    if a == b:
        return np.asarray(logf(np.array([a])))[:, 0, :]
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    log_k = log_e = None
    log_rtol = np.log(rtol)
    weight = 0.0 if row_weight is None else row_weight
    while True:
        x, log_half = _abscissae(lo, hi)
        q = len(lo)
        lv = np.asarray(logf(x.ravel()))
        _check_finite(lv)
        lv = lv.reshape(n_rows, q, 15, -1)
        k, g = _apply_rule(lv, axis=2)
        k = np.moveaxis(k + log_half[None, :, None], 1, 0)
        g = np.moveaxis(g + log_half[None, :, None], 1, 0)
        e = _log_abs_diff(k, g)
        if log_k is None:
            log_k, log_e, all_lo, all_hi = k, e, lo, hi
        else:
            log_k = np.concatenate([log_k, k])
            log_e = np.concatenate([log_e, e])
            all_lo = np.concatenate([all_lo, lo])
            all_hi = np.concatenate([all_hi, hi])

        total = logsumexp(log_k, axis=0)
        err = logsumexp(log_e, axis=0)
        ref = total[:, 0] + weight
        sig = ref >= np.max(ref) - SIGNIFICANCE_NATS
        with np.errstate(invalid="ignore"):
            rel = np.where(np.isneginf(err), -np.inf, err - total)
        if not np.any(sig) or np.all(rel[sig] <= log_rtol):
            return total

        n = len(log_k)
        with np.errstate(invalid="ignore"):
            share = np.where(np.isneginf(log_e), -np.inf, log_e - total[None])
        score = np.max(share[:, sig, :], axis=(1, 2))
        split = score > log_rtol - np.log(n)
        split[np.argmax(score)] = True
        if n + split.sum() > max_intervals:
            worst = float(np.exp(np.max(rel[sig])))
            raise QuadratureError(
                f"inner quadrature exceeded {max_intervals} intervals "
                f"(relative error {worst:.3g}, tolerance {rtol:.3g})",
                worst,
            )
        keep = ~split
        mids = 0.5 * (all_lo[split] + all_hi[split])
        lo = np.concatenate([all_lo[split], mids])
        hi = np.concatenate([mids, all_hi[split]])
        log_k, log_e = log_k[keep], log_e[keep]
        all_lo, all_hi = all_lo[keep], all_hi[keep]
