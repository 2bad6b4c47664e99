"""Representation losses and their hand-derived gradients.

Scalar losses take a single target/prediction pair; map losses take (N, C)
arrays of per-pixel vectors (C = 2 or 3) with an optional validity mask.
Gradients are always with respect to the prediction and match the loss shape.

Min-over-symmetries losses search k over one full turn (k = 0..n-1); at
branch boundaries the smallest k wins, which keeps gradients deterministic.
"""

from __future__ import annotations

import numpy as np

from .geom import rot2, axis_angle


def _fold_from_theta(theta: float) -> int:
    if theta <= 0:
        raise ValueError("theta must be positive")
    n = int(round(2.0 * np.pi / theta))
    if n < 1 or abs(n * theta - 2.0 * np.pi) > 1e-9 * 2.0 * np.pi:
        raise ValueError(f"theta={theta} is not 2*pi/n for an integer n")
    return n


def _rotations(theta: float, channels: int, axis=None) -> list[np.ndarray]:
    n = _fold_from_theta(theta)
    if channels == 2:
        return [rot2(k * theta) for k in range(n)]
    if channels == 3:
        if axis is None:
            raise ValueError("3-channel maps need the symmetry axis")
        return [axis_angle(k * theta, axis) if k else np.eye(3) for k in range(n)]
    raise ValueError(f"unsupported channel count {channels}")


def _as_pixels(ymap, mask=None) -> np.ndarray:
    y = np.asarray(ymap, dtype=float)
    y = y.reshape(-1, y.shape[-1])
    if mask is not None:
        m = np.asarray(mask, dtype=bool).reshape(-1)
        y = y[m]
    if y.shape[0] == 0:
        raise ValueError("map loss needs at least one valid pixel")
    return y


def ae(y, yhat) -> float:
    """Absolute error: |y - yhat| (Euclidean norm for vector arguments)."""
    d = np.asarray(yhat, dtype=float) - np.asarray(y, dtype=float)
    return float(np.abs(d)) if d.ndim == 0 else float(np.linalg.norm(d))


def ae_grad(y, yhat):
    d = np.asarray(yhat, dtype=float) - np.asarray(y, dtype=float)
    if d.ndim == 0:
        return float(np.sign(d))
    n = np.linalg.norm(d)
    return d / n if n > 0 else np.zeros_like(d)


def mae(ymap, yhat_map, mask=None) -> float:
    """Mean over valid pixels of per-pixel Euclidean error."""
    y = _as_pixels(ymap, mask)
    yh = _as_pixels(yhat_map, mask)
    return float(np.mean(np.linalg.norm(yh - y, axis=-1)))


def mae_grad(ymap, yhat_map, mask=None) -> np.ndarray:
    y = np.asarray(ymap, dtype=float)
    yh = np.asarray(yhat_map, dtype=float)
    r = yh - y
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        count = int(m.sum())
        valid = m[..., None]
    else:
        count = int(np.prod(r.shape[:-1]))
        valid = np.ones(r.shape[:-1], dtype=bool)[..., None]
    if count == 0:
        raise ValueError("map loss needs at least one valid pixel")
    safe = np.where(norms > 0, norms, 1.0)
    g = np.where(valid & (norms > 0), r / (safe * count), 0.0)
    return g


def _mos_branch(y: float, yhat: float, theta: float) -> int:
    """Smallest integer k minimizing |y - yhat + k*theta|."""
    d = y - yhat
    k0 = int(np.floor(-d / theta))
    e0, e1 = abs(d + k0 * theta), abs(d + (k0 + 1) * theta)
    return k0 if e0 <= e1 else k0 + 1


def mos_ae(y: float, yhat: float, theta: float) -> float:
    """min over k of |y - yhat + k*theta|; bounded by theta/2."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    k = _mos_branch(float(y), float(yhat), theta)
    return abs(float(y) - float(yhat) + k * theta)


def mos_ae_grad(y: float, yhat: float, theta: float) -> float:
    k = _mos_branch(float(y), float(yhat), theta)
    return -float(np.sign(float(y) - float(yhat) + k * theta))


def vec_mos_ae(y, yhat, theta: float) -> float:
    """min over k = 0..n-1 of |Rot(k*theta) y - yhat|."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    errs = [np.linalg.norm(R @ y - yhat) for R in _rotations(theta, y.shape[-1])]
    return float(min(errs))


def vec_mos_ae_grad(y, yhat, theta: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    rots = _rotations(theta, y.shape[-1])
    errs = np.array([np.linalg.norm(R @ y - yhat) for R in rots])
    k = int(np.argmin(errs))
    r = yhat - rots[k] @ y
    n = errs[k]
    return r / n if n > 0 else np.zeros_like(r)


def _equivalent_errors(ymap, yhat_map, theta, axis, mask):
    """(n, N) per-pixel errors against every symmetric equivalent of the target."""
    y = _as_pixels(ymap, mask)
    yh = _as_pixels(yhat_map, mask)
    rots = _rotations(theta, y.shape[-1], axis)
    e = np.stack([np.linalg.norm(y @ R.T - yh, axis=-1) for R in rots])
    return e, y, yh, rots


def pmos_mae(ymap, yhat_map, theta: float, axis=None, mask=None) -> float:
    """Per-pixel min over symmetric equivalents, then mean over valid pixels."""
    e, _, _, _ = _equivalent_errors(ymap, yhat_map, theta, axis, mask)
    return float(np.mean(np.min(e, axis=0)))


def imos_mae(ymap, yhat_map, theta: float, axis=None, mask=None) -> float:
    """Min over symmetric equivalents of the whole-image mean error."""
    e, _, _, _ = _equivalent_errors(ymap, yhat_map, theta, axis, mask)
    return float(np.min(np.mean(e, axis=1)))


def _scatter_pixel_grad(shape, mask, grad_valid):
    if mask is None:
        return grad_valid.reshape(shape)
    g = np.zeros(shape)
    g[np.asarray(mask, dtype=bool)] = grad_valid
    return g


def pmos_mae_grad(ymap, yhat_map, theta: float, axis=None, mask=None) -> np.ndarray:
    e, y, yh, rots = _equivalent_errors(ymap, yhat_map, theta, axis, mask)
    ks = np.argmin(e, axis=0)  # first occurrence == smallest k
    m = y.shape[0]
    g = np.zeros_like(yh)
    for k, R in enumerate(rots):
        sel = ks == k
        if not np.any(sel):
            continue
        r = yh[sel] - y[sel] @ R.T
        norms = np.linalg.norm(r, axis=-1, keepdims=True)
        safe = np.where(norms > 0, norms, 1.0)
        g[sel] = np.where(norms > 0, r / (safe * m), 0.0)
    return _scatter_pixel_grad(np.asarray(yhat_map, dtype=float).shape[:-1] + (yh.shape[-1],),
                               mask, g)


def imos_mae_grad(ymap, yhat_map, theta: float, axis=None, mask=None) -> np.ndarray:
    e, y, yh, rots = _equivalent_errors(ymap, yhat_map, theta, axis, mask)
    k = int(np.argmin(np.mean(e, axis=1)))
    m = y.shape[0]
    r = yh - y @ rots[k].T
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    g = np.where(norms > 0, r / (safe * m), 0.0)
    return _scatter_pixel_grad(np.asarray(yhat_map, dtype=float).shape[:-1] + (yh.shape[-1],),
                               mask, g)


def numeric_gradient(f, x, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for idx in range(flat.size):
        old = flat[idx]
        flat[idx] = old + h
        fp = f(x)
        flat[idx] = old - h
        fm = f(x)
        flat[idx] = old
        gflat[idx] = (fp - fm) / (2.0 * h)
    return g
