"""Pure numpy versions of the interpolation kernels."""
import numpy as np


def trilinear(values, lo, h, pts):
    values = np.asarray(values, dtype=float)
    pts = np.asarray(pts, dtype=float)
    n = values.shape[0]
    hi = lo + (n - 1) * h
    out = np.zeros((pts.shape[0], values.shape[3]))
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    p = pts[inside]
    f = (p - lo) / h
    idx = np.minimum(np.floor(f).astype(np.intp), n - 2)
    t = f - idx
    i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
    tx, ty, tz = t[:, :1], t[:, 1:2], t[:, 2:3]
    acc = (
        (1 - tx) * (1 - ty) * (1 - tz) * values[i, j, k]
        + tx * (1 - ty) * (1 - tz) * values[i + 1, j, k]
        + (1 - tx) * ty * (1 - tz) * values[i, j + 1, k]
        + tx * ty * (1 - tz) * values[i + 1, j + 1, k]
        + (1 - tx) * (1 - ty) * tz * values[i, j, k + 1]
        + tx * (1 - ty) * tz * values[i + 1, j, k + 1]
        + (1 - tx) * ty * tz * values[i, j + 1, k + 1]
        + tx * ty * tz * values[i + 1, j + 1, k + 1]
    )
    out[inside] = acc
    return out


def rotate_pullback(values, lo, h, alpha):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    hi = lo + (n - 1) * h
    ca, sa = np.cos(alpha), np.sin(alpha)
    x = lo + h * np.arange(n)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    y1 = ca * x1 - sa * x2
    y2 = sa * x1 + ca * x2
    out = np.zeros_like(values)
    inside = (y1 >= lo) & (y1 <= hi) & (y2 >= lo) & (y2 <= hi)
    fx = (y1[inside] - lo) / h
    fy = (y2[inside] - lo) / h
    i = np.minimum(np.floor(fx).astype(np.intp), n - 2)
    j = np.minimum(np.floor(fy).astype(np.intp), n - 2)
    tx = (fx - i)[:, None, None]
    ty = (fy - j)[:, None, None]
    v = (
        (1 - tx) * (1 - ty) * values[i, j]
        + tx * (1 - ty) * values[i + 1, j]
        + (1 - tx) * ty * values[i, j + 1]
        + tx * ty * values[i + 1, j + 1]
    )
    rot = np.empty_like(v)
    rot[..., 0] = ca * v[..., 0] + sa * v[..., 1]
    rot[..., 1] = -sa * v[..., 0] + ca * v[..., 1]
    rot[..., 2] = v[..., 2]
    out[inside] = rot
    return out
