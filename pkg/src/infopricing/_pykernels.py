"""Numpy implementations of the hot kernels.

These are the reference implementations; ``_ckernels.pyx`` mirrors every
function here with the same signature and semantics.
"""
import numpy as np

_CHUNK = 4096


def whk_poly_eval(x, tau, W, s_nodes, hz, hw, coeffs):
    """Nested quadrature for a weighted heat kernel with polynomial F.

    out[i] = sum_j W[i, j] * sum_k hw[k] * F(m_ij + sd_ij * hz[k])

    with m_ij = (1 - s_j) x_i and sd_ij = sqrt(tau_i s_j (1 - s_j)), the
    bridge transition over a fraction s_j of the remaining horizon tau_i.
    F(y) = sum_p coeffs[p] * y**p.
    """
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    W = np.asarray(W, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.empty(x.shape[0])
    frac = s_nodes * (1.0 - s_nodes)
    for lo in range(0, x.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, x.shape[0])
        m = (1.0 - s_nodes)[None, :] * x[lo:hi, None]
        sd = np.sqrt(tau[lo:hi, None] * frac[None, :])
        y = m[:, :, None] + sd[:, :, None] * hz[None, None, :]
        fy = np.full(y.shape, coeffs[-1])
        for c in coeffs[-2::-1]:
            fy *= y
            fy += c
        inner = fy @ hw
        out[lo:hi] = np.einsum("ij,ij->i", W[lo:hi], inner)
    return out


def bridge_fill(z, grid, horizon, start_t, start_val):
    """Brownian-bridge values on ``grid`` from exact Gaussian transitions.

    ``z`` holds standard normals, one row per path and one column per grid
    time; the bridge on [0, horizon] is started from value ``start_val`` at
    ``start_t`` (scalar or one value per path).
    """
    z = np.asarray(z, dtype=float)
    grid = np.asarray(grid, dtype=float)
    out = np.empty_like(z)
    prev_t = float(start_t)
    prev = np.broadcast_to(np.asarray(start_val, dtype=float), z.shape[:1]).copy()
    for k in range(grid.shape[0]):
        tk = grid[k]
        left = horizon - prev_t
        if left <= 0.0:
            cur = np.zeros_like(prev)
        else:
            mean = (horizon - tk) / left * prev
            var = (tk - prev_t) * (horizon - tk) / left
            cur = mean + np.sqrt(max(var, 0.0)) * z[:, k]
        out[:, k] = cur
        prev, prev_t = cur, tk
    return out


def digital_spreads(xi, times, T, sigma, x0, x1, log_odds, cap):
    """Yield spread of a binary bond over the sovereign bond along paths.

    Returns (spread, capped) arrays with the shape of ``xi``; spreads above
    ``cap`` (including infinite ones) are replaced by ``cap`` and flagged.
    """
    xi = np.asarray(xi, dtype=float)
    times = np.asarray(times, dtype=float)
    ratio = T / (T - times)
    logit = log_odds + ratio[None, :] * (
        sigma * (x1 - x0) * xi - 0.5 * sigma * sigma * (x1 * x1 - x0 * x0) * times[None, :]
    )
    neg_log_pi1 = np.logaddexp(0.0, -logit)
    spread = neg_log_pi1 / (T - times)[None, :]
    capped = ~(spread <= cap)
    spread = np.where(capped, cap, spread)
    return spread, capped.astype(np.uint8)
