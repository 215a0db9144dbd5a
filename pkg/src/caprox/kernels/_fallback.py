"""Pure-numpy kernels, used when the compiled extension is unavailable.

Both backends share the same contract: 1-D contiguous float64 in, float64
out, inputs already validated by the wrappers in ``caprox.penalties``
(``tau >= 1``, ``mu > 0``).
"""
import numpy as np


def capped_penalty_sum(x, mu):
    """Sum of mu - max(sqrt(mu) - |x_i|, 0)^2 over the entries of x."""
    gap = np.maximum(np.sqrt(mu) - np.abs(x), 0.0)
    return float(np.sum(mu - gap * gap))


def prox_capped_elementwise(m, tau, mu):
    """Minimize -max(sqrt(mu)-|x|,0)^2 + tau*(x - m_i)^2 for each entry.

    Candidates are tried in order of increasing magnitude (0, interior
    stationary point, m_i) so that objective ties resolve toward the
    smaller magnitude; at tau == 1 the tie |m_i| == sqrt(mu) goes to 0.
    """
    root = np.sqrt(mu)
    a = np.abs(m)
    if tau == 1.0:
        return np.where(a > root, m, 0.0)
    best_x = np.zeros_like(a)
    best_h = tau * a * a - mu  # objective at x = 0
    c = (tau * a - root) / (tau - 1.0)
    gap = root - c
    h_c = -gap * gap + tau * (c - a) ** 2
    take = (c >= 0.0) & (c <= root) & (h_c < best_h)
    best_x[take] = c[take]
    best_h[take] = h_c[take]
    take = (a >= root) & (best_h > 0.0)  # objective at x = m_i is 0 there
    best_x[take] = a[take]
    return np.sign(m) * best_x
