"""Dense layer primitives with hand-written backward passes.

Everything works on float64 numpy arrays. Each forward returns
(output, cache); the matching backward consumes the cache and the
upstream gradient. The finite-difference oracle at the bottom is the
arbiter for every analytic gradient in the codebase.
"""

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def affine_forward(x, w, b):
    """y = x @ w + b for a batch of row vectors."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"affine shape mismatch: x={x.shape} w={w.shape}")
    if b.shape[-1] != w.shape[1]:
        raise ValueError(f"affine bias mismatch: w={w.shape} b={b.shape}")
    return x @ w + b, (x, w)


def affine_backward(dout, cache):
    x, w = cache
    dx = dout @ w.T
    dw = x.T @ dout
    db = dout.sum(axis=0)
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var,
                      mode="train", update=True):
    """Batch normalization over the batch axis.

    Train mode normalizes by batch statistics (biased variance) and, when
    `update` is set, folds them into the running stats in place with
    momentum BN_MOMENTUM. Eval mode uses the running stats only.
    """
    if mode == "train":
        if x.shape[0] < 2:
            raise ValueError("batchnorm train mode needs batch size >= 2")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mu) * inv
        if update:
            running_mean *= BN_MOMENTUM
            running_mean += (1.0 - BN_MOMENTUM) * mu
            running_var *= BN_MOMENTUM
            running_var += (1.0 - BN_MOMENTUM) * var
    elif mode == "eval":
        inv = 1.0 / np.sqrt(running_var + BN_EPS)
        xhat = (x - running_mean) * inv
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = gamma * xhat + beta
    return out, (mode, xhat, inv, gamma)


def batchnorm_backward(dout, cache):
    mode, xhat, inv, gamma = cache
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    if mode == "eval":
        dx = dout * gamma * inv
    else:
        n = dout.shape[0]
        dxhat = dout * gamma
        dx = (inv / n) * (n * dxhat
                          - dxhat.sum(axis=0)
                          - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def leaky_relu_forward(x, slope=0.01):
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky relu slope must be in (0,1), got {slope}")
    return np.where(x >= 0, x, slope * x), (x, slope)


def leaky_relu_backward(dout, cache):
    x, slope = cache
    return dout * np.where(x >= 0, 1.0, slope)


def dropout_forward(x, rate, mode, rng=None):
    """Inverted dropout. Eval mode (or rate 0) is exactly the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0,1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def numerical_gradient(loss_fn, params, h=1e-5):
    """Central finite differences of a scalar loss over a dict of arrays.

    `loss_fn` must be deterministic given the parameter dict. Returns a
    dict matching `params` in keys and shapes.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            lp = loss_fn(params)
            flat_p[i] = orig - h
            lm = loss_fn(params)
            flat_p[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise FloatingPointError(
                    f"non-finite loss while perturbing {name}[{i}]")
            flat_g[i] = (lp - lm) / (2.0 * h)
        grads[name] = g
    return grads


def gradient_error(analytic, numeric):
    """Max elementwise relative error, denominator max(|a|,|n|,1e-8)."""
    worst = 0.0
    for name in numeric:
        a = analytic.get(name)
        if a is None:
            a = np.zeros_like(numeric[name])
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric[name])), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - numeric[name]) / denom)))
    return worst
