"""Proximity operators for lq quasi-norm penalties, 0 <= q <= 1.

``prox_scalar``/``prox_vector`` solve, per entry,

    minimize_x  |x|^q + (eta/2) * (x - t)^2

and ``prox_group`` solves the vector version with ``|.|`` replaced by the
Euclidean norm,

    minimize_x  ||x||_2^q + (eta/2) * ||x - t||_2^2 .

q = 0 is hard thresholding (the penalty counts nonzeros), q = 1 is soft
thresholding, and 0 < q < 1 is handled by a safeguarded Newton solve on the
stationarity equation, which is convex on the bracketing interval.
"""

import numpy as np

__all__ = (
    "fractional_constants",
    "prox_scalar",
    "prox_vector",
    "prox_group",
    "prox_group_rows",
    "lq_penalty",
    "lq_row_penalty",
)

# Below this magnitude the prox is taken as 0 outright; avoids overflow in
# the norm^(2-q) rescaling of the group operator.
_TINY = 1e-300

_NEWTON_MAX_ITERS = 100
_NEWTON_TOL = 1e-12


def _validate(q, eta):
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if not np.all(eta > 0.0):
        raise ValueError("eta must be positive")


def fractional_constants(q, eta):
    """Threshold pair (beta, tau) of the fractional prox, 0 < q < 1.

    beta = [2(1-q)/eta]^(1/(2-q)) is the magnitude the prox jumps to when
    it first turns on, and tau = beta + q*beta^(q-1)/eta is the input
    threshold: inputs with |t| < tau map to 0, inputs with |t| > tau map to
    sign(t)*z with z in (beta, |t|).
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"fractional constants require 0 < q < 1, got q={q}")
    _validate(q, eta)
    beta = (2.0 * (1.0 - q) / eta) ** (1.0 / (2.0 - q))
    tau = beta + q * beta ** (q - 1.0) / eta
    return beta, tau


def _fractional_scale(r, q, eta):
    """Shrinkage factors s for the fractional case on magnitudes r >= 0.

    Solves the normalized stationarity equation h(s) = q*s^(q-1) +
    eta*r^(2-q)*(s - 1) = 0 on (beta/r, 1) by Newton steps clipped to a
    maintained bisection bracket. The prox output is s*t elementwise (or
    s*t on the whole vector for the group case).
    """
    r = np.asarray(r, dtype=float)
    eta_eff = np.broadcast_to(np.asarray(eta, dtype=float) * r ** (2.0 - q), r.shape)
    s = np.zeros_like(r)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        beta = (2.0 * (1.0 - q) / eta_eff) ** (1.0 / (2.0 - q))
        tau = beta + q * beta ** (q - 1.0) / eta_eff
    # tie inputs (|t| == tau) resolve to 0: strict inequality
    active = (tau < 1.0) & (r > _TINY)
    if not np.any(active):
        return s

    eta_a = eta_eff[active]
    lo = beta[active]
    hi = np.ones_like(eta_a)
    z = np.ones_like(eta_a)
    tol = _NEWTON_TOL * eta_a
    converged = np.zeros(z.shape, dtype=bool)
    for _ in range(_NEWTON_MAX_ITERS):
        h = q * z ** (q - 1.0) + eta_a * (z - 1.0)
        converged |= np.abs(h) <= tol
        if np.all(converged):
            break
        lo = np.where(h < 0.0, z, lo)
        hi = np.where(h > 0.0, z, hi)
        step = h / (q * (q - 1.0) * z ** (q - 2.0) + eta_a)
        z_new = z - step
        # fall back to bisection whenever Newton leaves the bracket
        outside = (z_new <= lo) | (z_new >= hi)
        z_new = np.where(outside, 0.5 * (lo + hi), z_new)
        # freeze entries at their first converged value so results do not
        # depend on how the input is batched
        z = np.where(converged, z, z_new)
    else:
        raise RuntimeError("prox Newton iteration failed to converge")
    s[active] = z
    return s


def prox_vector(t, q, eta):
    """Elementwise prox of the lq penalty at penalty weight eta.

    Parameters
    ----------
    t : array_like
        Input array; the prox is applied to every entry independently.
    q : float
        Penalty exponent in [0, 1].
    eta : float
        Positive quadratic penalty weight.

    Returns
    -------
    ndarray
        Array of the same shape. Entries with magnitude below the
        q-dependent threshold (sqrt(2/eta) for q=0, 1/eta for q=1, tau for
        fractional q) are zeroed; threshold ties resolve to 0.
    """
    _validate(q, eta)
    t = np.asarray(t, dtype=float)
    if q == 0.0:
        return np.where(np.abs(t) > np.sqrt(2.0 / eta), t, 0.0)
    if q == 1.0:
        return np.sign(t) * np.maximum(np.abs(t) - 1.0 / eta, 0.0)
    return _fractional_scale(np.abs(t), q, eta) * t


def prox_scalar(t, q, eta):
    """Scalar prox of |x|^q + (eta/2)(x - t)^2; see ``prox_vector``."""
    return float(prox_vector(np.asarray([t], dtype=float), q, eta)[0])


def prox_group(t, q, eta):
    """Prox of the Euclidean-norm penalty ||x||_2^q on a vector t.

    The minimizer is a nonnegative multiple of t: the problem reduces to a
    scalar prox at input 1 with rescaled weight eta*||t||^(2-q), whose
    solution is the shrinkage factor applied to t.
    """
    _validate(q, eta)
    t = np.asarray(t, dtype=float)
    r = np.linalg.norm(t)
    return _group_scale(np.asarray([r]), q, eta)[0] * t


def prox_group_rows(t, q, eta):
    """Row-wise ``prox_group`` on a 2-D array (one group per row)."""
    _validate(q, eta)
    t = np.asarray(t, dtype=float)
    r = np.linalg.norm(t, axis=1)
    return _group_scale(r, q, eta)[:, None] * t


def _group_scale(r, q, eta):
    """Shrinkage factors for group magnitudes r; eta scalar or r-shaped."""
    if q == 0.0:
        return np.where(r > np.sqrt(2.0 / eta), 1.0, 0.0)
    if q == 1.0:
        with np.errstate(divide="ignore"):
            return np.where(r > _TINY, np.maximum(1.0 - 1.0 / (eta * r), 0.0), 0.0)
    return _fractional_scale(r, q, eta)


def lq_penalty(x, q):
    """sum_i |x_i|^q over all entries; counts nonzeros when q = 0."""
    x = np.asarray(x, dtype=float)
    if q == 0.0:
        return float(np.count_nonzero(x))
    if q == 1.0:
        return float(np.sum(np.abs(x)))
    return float(np.sum(np.abs(x) ** q))


def lq_row_penalty(x, q):
    """sum_i ||x[i, :]||_2^q over rows; counts nonzero rows when q = 0."""
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=1)
    if q == 0.0:
        return float(np.count_nonzero(norms))
    if q == 1.0:
        return float(np.sum(norms))
    return float(np.sum(norms**q))
