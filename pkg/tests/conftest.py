"""Shared fixtures and gradient-check helpers."""

import logging

import numpy as np
import pytest

from clusem import model, nn


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.disable(logging.WARNING)
    yield
    logging.disable(logging.NOTSET)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def tiny_config(**overrides):
    """A model small enough for finite-difference checks."""
    kw = dict(feature_dim=5, h=4, d=3, k_s=2, k_t=3,
              hidden=(6,), dropout=0.0)
    kw.update(overrides)
    return model.ModelConfig(**kw)


def check_grads(loss_fn, params, analytic, tol=1e-4, h=1e-5, atol=1e-6):
    """Assert the analytic gradients match central differences.

    Entries where both gradients are below `atol` count as matching: for
    exact-zero directions (e.g. biases cancelled by batch norm) the
    central-difference roundoff noise (~eps * |loss| / 2h) sits above the
    relative-error denominator floor and would register as spurious error.
    """
    numeric = nn.numerical_gradient(loss_fn, params, h=h)
    worst = 0.0
    for name in numeric:
        a = analytic.get(name)
        a = np.zeros_like(numeric[name]) if a is None else a
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        err = np.abs(a - n) / denom
        err[(np.abs(a) < atol) & (np.abs(n) < atol)] = 0.0
        worst = max(worst, float(err.max()))
    assert worst <= tol, f"gradient relative error {worst:.3e} > {tol}"
    return worst
