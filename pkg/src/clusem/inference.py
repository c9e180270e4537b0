"""Seen/unseen separation by prototypical threshold and the final class
and semantic-recovery predictions over a trained model snapshot."""

import csv
from dataclasses import dataclass

import numpy as np

from . import losses, model
from .clustering import kmeans_fit


class InferenceError(Exception):
    pass


@dataclass
class InferenceResult:
    y_hat: np.ndarray        # N ints in [0, k_t)
    seen_mask: np.ndarray    # N bools, pmax >= tau
    tau: float
    pmax: np.ndarray         # N floats
    a_hat: np.ndarray        # N x d predicted semantics
    y_tilde: np.ndarray | None  # N ints, nearest-attribute class


def compute_pmax(z_t, centroids, k_s):
    """Best seen-class prototypical probability per target point and the
    dataset-mean threshold."""
    if z_t.shape[0] == 0:
        raise InferenceError("empty target set")
    p = losses.prototypical_probability(z_t, centroids, k_limit=k_s)
    pmax = p.max(axis=1)
    return pmax, float(pmax.mean())


def classify_target(z_t, centroids, k_s, k_t, pmax, tau, seed=0):
    """Points with pmax >= tau get their best seen centroid; the rest are
    clustered by K-means into the k_t - k_s unseen slots."""
    p = losses.prototypical_probability(z_t, centroids, k_limit=k_s)
    y_hat = p.argmax(axis=1)
    seen_mask = pmax >= tau
    rejected = np.nonzero(~seen_mask)[0]
    k_u = k_t - k_s
    if rejected.size < k_u:
        raise InferenceError(
            f"only {rejected.size} points rejected as unseen but "
            f"{k_u} unseen clusters requested; inspect the threshold")
    km = kmeans_fit(z_t[rejected], k_u, seed=seed)
    y_hat[rejected] = k_s + km.assignments
    return y_hat, seen_mask


def semantic_recovery_predict(a_hat, a_full):
    """Nearest attribute row by inner product; ties go to the lowest id."""
    if a_hat.shape[1] != a_full.shape[1]:
        raise ValueError(f"attribute width mismatch: {a_hat.shape} "
                         f"vs {a_full.shape}")
    return (a_hat @ a_full.T).argmax(axis=1)


def run_inference(params, state, mcfg, x_t, a_full=None, seed=0):
    """Full eval-mode inference over the target features."""
    z_t, _ = model.encode(params, state, mcfg, x_t, mode="eval")
    centroids = params["centroids"]
    pmax, tau = compute_pmax(z_t, centroids, mcfg.k_s)
    # sub-seed keeps the rejected-set K-means reproducible per report
    y_hat, seen_mask = classify_target(z_t, centroids, mcfg.k_s, mcfg.k_t,
                                       pmax, tau, seed=seed + 1)
    a_hat, _ = model.predict_semantics(params, state, mcfg, z_t, mode="eval")
    y_tilde = None
    if a_full is not None:
        y_tilde = semantic_recovery_predict(a_hat, a_full)
    return InferenceResult(y_hat=y_hat, seen_mask=seen_mask, tau=tau,
                           pmax=pmax, a_hat=a_hat, y_tilde=y_tilde)


def write_predictions(res: InferenceResult, path):
    d = res.a_hat.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "y_hat", "seen_flag", "pmax", "y_tilde"]
                   + [f"a{j}" for j in range(d)])
        for i in range(res.y_hat.shape[0]):
            yt = res.y_tilde[i] if res.y_tilde is not None else ""
            w.writerow([i, res.y_hat[i], int(res.seen_mask[i]),
                        repr(float(res.pmax[i])), yt]
                       + [repr(float(v)) for v in res.a_hat[i]])
