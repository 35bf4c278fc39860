"""Pure-Python versions of the compiled kernels (same signatures)."""

import numpy as np


def p1_triplets(nodes, tris):
    nodes = np.asarray(nodes, dtype=float)
    tris = np.asarray(tris, dtype=np.int64)
    p0, p1, p2 = (nodes[tris[:, k]] for k in range(3))
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    areas = 0.5 * np.abs(det)
    bx = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]], axis=1)
    by = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]], axis=1)
    safe = np.where(areas > 0.0, areas, 1.0)
    k_loc = (bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :]) / (4.0 * safe[:, None, None])
    m_loc = np.where(np.eye(3, dtype=bool), 1.0 / 6.0, 1.0 / 12.0)[None] * areas[:, None, None]
    k_loc[areas == 0.0] = 0.0
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    return rows, cols, k_loc.ravel(), m_loc.ravel(), areas


def cd_sweep(A, c, tau, x):
    n = A.shape[0]
    dmax = 0.0
    for i in range(n):
        row = A[i]
        s = c[i] - (row @ x - row[i] * x[i])
        t = tau[i]
        if s > t:
            new = (s - t) / row[i]
        elif s < -t:
            new = (s + t) / row[i]
        else:
            new = 0.0
        change = abs(new - x[i])
        if change > dmax:
            dmax = change
        x[i] = new
    return dmax
