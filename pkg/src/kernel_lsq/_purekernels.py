"""Numpy implementations of the compiled inner loops (same signatures)."""
import numpy as np

# cap on entries per temporary block in the matrix fills
_BLOCK = 1 << 20


def _row_blocks(m, n):
    step = max(1, _BLOCK // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def zonal_table_matrix(X, Y, coef):
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    nint = coef.shape[0]
    out = np.empty((X.shape[0], Y.shape[0]))
    for rows in _row_blocks(X.shape[0], Y.shape[0]):
        t = np.clip(X[rows] @ Y.T, -1.0, 1.0)
        w = np.sqrt(np.sqrt(0.5 * (1.0 - t)))
        k = np.minimum((w * nint).astype(np.intp), nint - 1)
        dx = w - k / nint
        c = coef[k]
        out[rows] = ((c[..., 0] * dx + c[..., 1]) * dx + c[..., 2]) * dx + c[..., 3]
    return out


def surface_spline_matrix(X, Y, power, log_branch):
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    out = np.empty((X.shape[0], Y.shape[0]))
    for rows in _row_blocks(X.shape[0], Y.shape[0]):
        u = np.minimum(1.0 - X[rows] @ Y.T, 2.0)
        pos = u > 0.0
        safe = np.where(pos, u, 1.0)
        v = safe**power
        if log_branch:
            v = v * np.log(safe)
        out[rows] = np.where(pos, v, 0.0)
    return out


def legendre_clenshaw(c, t):
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    deg = c.shape[0] - 1
    if deg == 0:
        return np.full(t.shape, c[0])
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for k in range(deg, 0, -1):
        b0 = c[k] + (2.0 * k + 1.0) / (k + 1.0) * t * b1 - (k + 1.0) / (k + 2.0) * b2
        b2 = b1
        b1 = b0
    return c[0] + t * b1 - 0.5 * b2
