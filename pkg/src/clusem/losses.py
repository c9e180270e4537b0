"""Loss terms with values and analytic gradients w.r.t. their inputs.

Each loss returns its scalar value together with gradients of the loss
w.r.t. the arrays it consumes; backpropagation through the network stacks
happens in the training module. Every gradient here is validated against
central finite differences in the test suite.
"""

import logging

import numpy as np

LOG_EPS = 1e-12
DIST_EPS = 1e-12

log = logging.getLogger(__name__)


def reconstruction_loss(x_s, xhat_s, x_t=None, xhat_t=None):
    """Mean squared L2 reconstruction error, source batch plus target
    batch, each averaged over its own batch size."""
    val = 0.0
    grads = []
    for x, xhat in ((x_s, xhat_s), (x_t, xhat_t)):
        if x is None:
            grads.append(None)
            continue
        if x.shape != xhat.shape:
            raise ValueError(f"reconstruction shape mismatch: "
                             f"{x.shape} vs {xhat.shape}")
        resid = xhat - x
        val += float((resid ** 2).sum()) / x.shape[0]
        grads.append(2.0 * resid / x.shape[0])
    return val, grads[0], grads[1]


def cluster_assignment(z, centroids):
    """Student-t soft assignment: p_ik proportional to
    (1 + ||z_i - mu_k||^2)^-1, rows normalized."""
    if z.shape[1] != centroids.shape[1]:
        raise ValueError(f"embedding width {z.shape[1]} != centroid "
                         f"width {centroids.shape[1]}")
    diff = z[:, None, :] - centroids[None, :, :]
    s = 1.0 / (1.0 + (diff ** 2).sum(axis=2))
    p = s / s.sum(axis=1, keepdims=True)
    return p


def cluster_assignment_backward(z, centroids, dp):
    """Gradients of sum(dp * p) w.r.t. z and centroids."""
    diff = z[:, None, :] - centroids[None, :, :]
    s = 1.0 / (1.0 + (diff ** 2).sum(axis=2))
    row = s.sum(axis=1, keepdims=True)
    p = s / row
    # d/ds through the row normalization
    ds = (dp - (dp * p).sum(axis=1, keepdims=True)) / row
    # ds_ik/dz_i = -2 s_ik^2 (z_i - mu_k)
    coeff = -2.0 * ds * s ** 2                       # N x K
    dz = (coeff[:, :, None] * diff).sum(axis=1)
    dc = -(coeff[:, :, None] * diff).sum(axis=0)
    return dz, dc


def target_distribution(p):
    """Sharpened assignment q_ik ~ p_ik^2 / column mass, rows renormalized.

    Treated as a constant in differentiation (the gradient of the KL term
    does not flow through q). Zero column masses are epsilon-clamped.
    """
    mass = np.maximum(p.sum(axis=0), LOG_EPS)
    w = p ** 2 / mass
    return w / w.sum(axis=1, keepdims=True)


def clustering_regularization(p, q):
    """(1/N) sum_i KL(p_i || q_i) with q constant."""
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    n = p.shape[0]
    pc = np.maximum(p, LOG_EPS)
    qc = np.maximum(q, LOG_EPS)
    logratio = np.log(pc) - np.log(qc)
    val = float((p * logratio).sum()) / n
    dp = (logratio + 1.0) / n
    return val, dp


def prototypical_probability(z, centroids, k_limit=None, distance="euclidean"):
    """Softmax over negative distances to the first `k_limit` centroids."""
    k_limit = centroids.shape[0] if k_limit is None else k_limit
    d = _distances(z, centroids[:k_limit], distance)
    logits = -d
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def _distances(z, centroids, distance):
    if distance == "euclidean":
        diff = z[:, None, :] - centroids[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=2))
    if distance == "cosine":
        zn = np.linalg.norm(z, axis=1)
        cn = np.linalg.norm(centroids, axis=1)
        if (zn == 0).any() or (cn == 0).any():
            raise ValueError("cosine distance undefined for zero vectors")
        return 1.0 - (z @ centroids.T) / (zn[:, None] * cn[None, :])
    raise ValueError(f"unknown distance {distance!r}")


def centroid_alignment_loss(z_s, y_s, centroids, k_s,
                            z_t=None, pseudo=None, drift_correction=False):
    """Cross entropy of the seen-centroid prototypical probability against
    the source labels, optionally plus the drift term
    (1/k_s) sum_k ||mean of target embeddings pseudo-labeled k - mu_k||^2.

    Returns (value, dz_s, dcentroids, dz_t); dz_t is None without the
    drift term. Pseudo labels are treated as constants.
    """
    if (y_s >= k_s).any() or (y_s < 0).any():
        raise ValueError("source labels must lie in [0, k_s)")
    n = z_s.shape[0]
    diff = z_s[:, None, :] - centroids[None, :k_s, :]
    dist = np.sqrt(np.maximum((diff ** 2).sum(axis=2), DIST_EPS ** 2))
    logits = -dist
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    p = e / e.sum(axis=1, keepdims=True)
    picked = np.maximum(p[np.arange(n), y_s], LOG_EPS)
    val = float(-np.log(picked).sum()) / n

    dlogits = p.copy()
    dlogits[np.arange(n), y_s] -= 1.0
    dlogits /= n
    unit = diff / dist[:, :, None]
    dz_s = -(dlogits[:, :, None] * unit).sum(axis=1)
    dc = np.zeros_like(centroids)
    dc[:k_s] = (dlogits[:, :, None] * unit).sum(axis=0)

    dz_t = None
    if drift_correction:
        if z_t is None or pseudo is None:
            raise ValueError("drift correction needs target embeddings "
                             "and pseudo labels")
        dz_t = np.zeros_like(z_t)
        for k in range(k_s):
            members = pseudo == k
            cnt = int(members.sum())
            if cnt == 0:
                log.warning("drift term: no target points pseudo-labeled %d, "
                            "class skipped", k)
                continue
            mu_tilde = z_t[members].mean(axis=0)
            gap = mu_tilde - centroids[k]
            val += float((gap ** 2).sum()) / k_s
            dc[k] += -2.0 * gap / k_s
            dz_t[members] += 2.0 * gap / (k_s * cnt)
    return val, dz_s, dc, dz_t


def semantic_ranking_loss(a_hat, y, attrs):
    """Pairwise ranking hinge with margin 0.5 against the true class
    attribute row; averaged over samples."""
    if a_hat.shape[1] != attrs.shape[1]:
        raise ValueError(f"attribute width mismatch: {a_hat.shape} "
                         f"vs {attrs.shape}")
    n, k = a_hat.shape[0], attrs.shape[0]
    scores = a_hat @ attrs.T                       # N x K
    true = scores[np.arange(n), y][:, None]
    margins = 0.5 - true + scores
    margins[np.arange(n), y] = 0.0
    active = margins > 0
    val = float(margins[active].sum()) / n
    # each active (i,k): d/da_i = (A_k - A_y_i)
    coeff = active.astype(float)
    da = (coeff @ attrs - coeff.sum(axis=1, keepdims=True)
          * attrs[y]) / n
    return val, da


def semantic_cluster_assignment(a_hat, sem_centroids):
    """Student-t assignment in the semantic space (Euclidean norm)."""
    return cluster_assignment(a_hat, sem_centroids)


def structural_alignment_loss(p_z, p_a):
    """(1/N) sum_ij (p_i^z . p_j^z - p_i^a . p_j^a)^2 over the batch."""
    if p_z.shape != p_a.shape:
        raise ValueError(f"shape mismatch: {p_z.shape} vs {p_a.shape}")
    n = p_z.shape[0]
    gap = p_z @ p_z.T - p_a @ p_a.T
    val = float((gap ** 2).sum()) / n
    dpz = 4.0 / n * gap @ p_z
    dpa = -4.0 / n * gap @ p_a
    return val, dpz, dpa


def total_objective(l_self, l_reg, l_cent, l_a, l_align, alpha, beta):
    """L_self + L_reg + L_cent + alpha * L_a + beta * L_align."""
    return l_self + l_reg + l_cent + alpha * l_a + beta * l_align
