"""Two-stage optimization: pretraining, centroid initialization, and
full-objective training with Adam and the step learning-rate schedule."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import losses, model


@dataclass
class TrainConfig:
    h: int = 256
    hidden: tuple = (512, 256, 256, 4096)
    alpha: float = 1.0
    beta: float = 1.0
    pretrain_lr: float = 1e-3
    train_lr: float = 1e-4
    weight_decay: float = 1e-5
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 200
    pretrain_epochs: int = 100
    train_epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    drift_correction: bool = True
    dropout: float = 0.01

    def validate(self):
        for name in ("pretrain_lr", "train_lr", "lr_decay_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm)")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")

    def model_config(self, ds):
        return model.ModelConfig(feature_dim=ds.feature_dim, h=self.h,
                                 d=ds.d, k_s=ds.k_s, k_t=ds.k_t,
                                 hidden=tuple(self.hidden),
                                 dropout=self.dropout)


class AdamState:
    """Per-parameter first/second moment accumulators."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m, self.v = {}, {}
        self.t = 0


def adam_step(params, grads, st: AdamState, lr, weight_decay=0.0):
    """Adam update with bias correction and decoupled weight decay
    (param -= lr * wd * param)."""
    st.t += 1
    b1, b2 = st.beta1, st.beta2
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif not np.isfinite(g).all():
            raise RuntimeError(f"non-finite gradient for {name}")
        if name not in st.m:
            st.m[name] = np.zeros_like(p)
            st.v[name] = np.zeros_like(p)
        st.m[name] = b1 * st.m[name] + (1 - b1) * g
        st.v[name] = b2 * st.v[name] + (1 - b2) * g ** 2
        mhat = st.m[name] / (1 - b1 ** st.t)
        vhat = st.v[name] / (1 - b2 ** st.t)
        p -= lr * mhat / (np.sqrt(vhat) + st.eps)
        if weight_decay:
            p -= lr * weight_decay * p


def lr_at(base, epoch, factor=0.1, every=200):
    return base * factor ** (epoch // every)


def loss_and_grads(params, state, mcfg, x_s, y_s, x_t, attrs,
                   alpha=1.0, beta=1.0, drift_correction=True,
                   stage="train", mode="train", rng=None,
                   update_state=False, q_fixed=None, pseudo_fixed=None):
    """Forward all components on one source batch + one target batch and
    return (loss values, parameter gradients).

    `stage="pretrain"` restricts the objective to reconstruction plus the
    weighted ranking loss; `stage="train"` adds clustering regularization,
    centroid alignment, and structural alignment. The DEC target
    distribution and the drift pseudo labels are recomputed from the batch
    unless fixed overrides are given (the finite-difference oracle needs
    them held constant).
    """
    rng = rng or np.random.default_rng(0)
    vals = {"l_self": 0.0, "l_reg": 0.0, "l_cent": 0.0,
            "l_a": 0.0, "l_align": 0.0}
    grads = {}

    z_s, enc_s_cache = model.encode(params, state, mcfg, x_s, mode, rng,
                                    update_state)
    z_t, enc_t_cache = model.encode(params, state, mcfg, x_t, mode, rng,
                                    update_state)
    xhat_s, dec_s_cache = model.decode(params, state, mcfg, z_s, mode, rng,
                                       update_state)
    xhat_t, dec_t_cache = model.decode(params, state, mcfg, z_t, mode, rng,
                                       update_state)
    a_s, head_s_cache = model.predict_semantics(params, state, mcfg, z_s,
                                                mode, update_state)

    dz_s = np.zeros_like(z_s)
    dz_t = np.zeros_like(z_t)

    vals["l_self"], dxhat_s, dxhat_t = losses.reconstruction_loss(
        x_s, xhat_s, x_t, xhat_t)
    vals["l_a"], da_s = losses.semantic_ranking_loss(a_s, y_s, attrs)

    dstep, g = model.decode_backward(dxhat_s, dec_s_cache)
    dz_s += dstep
    model.merge_grads(grads, g)
    dstep, g = model.decode_backward(dxhat_t, dec_t_cache)
    dz_t += dstep
    model.merge_grads(grads, g)
    dstep, g = model.predict_semantics_backward(alpha * da_s, head_s_cache)
    dz_s += dstep
    model.merge_grads(grads, g)

    if stage == "train":
        centroids = params["centroids"]
        a_t, head_t_cache = model.predict_semantics(params, state, mcfg, z_t,
                                                    mode, update_state)
        sem_c, sem_cache = model.predict_semantics(params, state, mcfg,
                                                   centroids, mode="eval")

        p_z = losses.cluster_assignment(z_t, centroids)
        q = q_fixed if q_fixed is not None else losses.target_distribution(p_z)
        pseudo = pseudo_fixed if pseudo_fixed is not None \
            else p_z.argmax(axis=1)
        p_a = losses.semantic_cluster_assignment(a_t, sem_c)

        vals["l_reg"], dp_z = losses.clustering_regularization(p_z, q)
        vals["l_cent"], dzc_s, dcent, dzc_t = losses.centroid_alignment_loss(
            z_s, y_s, centroids, mcfg.k_s, z_t=z_t, pseudo=pseudo,
            drift_correction=drift_correction)
        vals["l_align"], dpz_align, dpa_align = \
            losses.structural_alignment_loss(p_z, p_a)

        dz_s += dzc_s
        if dzc_t is not None:
            dz_t += dzc_t
        dcent = dcent.copy()

        dstep, dc_part = losses.cluster_assignment_backward(
            z_t, centroids, dp_z + beta * dpz_align)
        dz_t += dstep
        dcent += dc_part

        da_t, dsem_c = losses.cluster_assignment_backward(
            a_t, sem_c, beta * dpa_align)
        dstep, g = model.predict_semantics_backward(da_t, head_t_cache)
        dz_t += dstep
        model.merge_grads(grads, g)
        dc_part, g = model.predict_semantics_backward(dsem_c, sem_cache)
        dcent += dc_part
        model.merge_grads(grads, g)
        model.merge_grads(grads, {"centroids": dcent})

    dstep, g = model.encode_backward(dz_s, enc_s_cache)
    model.merge_grads(grads, g)
    dstep, g = model.encode_backward(dz_t, enc_t_cache)
    model.merge_grads(grads, g)

    vals["total"] = losses.total_objective(
        vals["l_self"], vals["l_reg"], vals["l_cent"],
        vals["l_a"], vals["l_align"], alpha, beta)
    return vals, grads


def _epoch_steps(ds, batch_size):
    return max(1, math.ceil(max(ds.x_s.shape[0], ds.x_t.shape[0]) / batch_size))


def _sample(rng, n, batch_size):
    return rng.integers(0, n, size=min(batch_size, n))


def _run_stage(ds, params, state, mcfg, tcfg, stage, epochs, base_lr, rng):
    trace = []
    adam = AdamState()
    n_s, n_t = ds.x_s.shape[0], ds.x_t.shape[0]
    steps = _epoch_steps(ds, tcfg.batch_size)
    for epoch in range(epochs):
        lr = lr_at(base_lr, epoch, tcfg.lr_decay_factor, tcfg.lr_decay_every)
        sums = {k: 0.0 for k in
                ("l_self", "l_reg", "l_cent", "l_a", "l_align", "total")}
        for _ in range(steps):
            bs = _sample(rng, n_s, tcfg.batch_size)
            bt = _sample(rng, n_t, tcfg.batch_size)
            vals, grads = loss_and_grads(
                params, state, mcfg,
                ds.x_s[bs], ds.y_s[bs], ds.x_t[bt], ds.a_seen,
                alpha=tcfg.alpha, beta=tcfg.beta,
                drift_correction=tcfg.drift_correction,
                stage=stage, mode="train", rng=rng, update_state=True)
            if not np.isfinite(vals["total"]) or vals["total"] > 1e8:
                raise RuntimeError(f"training diverged at epoch {epoch}: "
                                   f"loss {vals['total']}")
            adam_step(params, grads, adam, lr, tcfg.weight_decay)
            for k in sums:
                sums[k] += vals[k]
        rec = {k: sums[k] / steps for k in sums}
        rec["epoch"] = epoch
        rec["lr"] = lr
        trace.append(rec)
    return trace


def pretrain(ds, tcfg: TrainConfig):
    """Stage one: reconstruction plus weighted ranking loss from random
    initialization. Returns params, state, the trace, and eval-mode
    embeddings of source and target for centroid initialization."""
    tcfg.validate()
    mcfg = tcfg.model_config(ds)
    params, state = model.init_params(mcfg, seed=tcfg.seed)
    rng = np.random.default_rng(tcfg.seed)
    trace = _run_stage(ds, params, state, mcfg, tcfg, "pretrain",
                       tcfg.pretrain_epochs, tcfg.pretrain_lr, rng)
    z_s, _ = model.encode(params, state, mcfg, ds.x_s, mode="eval")
    z_t, _ = model.encode(params, state, mcfg, ds.x_t, mode="eval")
    return params, state, trace, z_s, z_t


def init_centroids(params, mcfg, z_s, y_s, z_t, seed=0):
    """K-means over source+target embeddings, seen rows matched to their
    source classes (greedy minimal-distance, see model._order_centroids)."""
    from .clustering import kmeans_fit
    emb = np.vstack([z_s, z_t])
    if emb.shape[0] < mcfg.k_t:
        raise ValueError(f"K-means needs >= {mcfg.k_t} embeddings")
    km = kmeans_fit(emb, mcfg.k_t, seed=seed)
    source_means = np.vstack([z_s[y_s == k].mean(axis=0)
                              for k in range(mcfg.k_s)])
    params["centroids"] = model._order_centroids(km.centers, source_means,
                                                 mcfg.k_t)


def fit(ds, params, state, tcfg: TrainConfig):
    """Stage two: the full objective over pretrained parameters with
    K-means-initialized centroids."""
    tcfg.validate()
    mcfg = tcfg.model_config(ds)
    if "centroids" not in params:
        raise ValueError("fit requires initialized centroids")
    rng = np.random.default_rng(tcfg.seed + 1)
    trace = _run_stage(ds, params, state, mcfg, tcfg, "train",
                       tcfg.train_epochs, tcfg.train_lr, rng)
    return trace


def train_run(ds, tcfg: TrainConfig):
    """pretrain -> centroid init -> fit. Returns params, state, mcfg, and
    the two stage traces."""
    mcfg = tcfg.model_config(ds)
    params, state, pre_trace, z_s, z_t = pretrain(ds, tcfg)
    init_centroids(params, mcfg, z_s, ds.y_s, z_t, seed=tcfg.seed)
    trace = fit(ds, params, state, tcfg)
    return params, state, mcfg, pre_trace, trace


TRACE_FIELDS = ("epoch", "l_self", "l_reg", "l_cent", "l_a", "l_align", "lr")


def write_trace(trace, path):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=TRACE_FIELDS, extrasaction="ignore")
        w.writeheader()
        for rec in trace:
            w.writerow({k: rec[k] for k in TRACE_FIELDS})
