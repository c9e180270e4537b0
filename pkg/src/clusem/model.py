"""Encoder / decoder / semantic head stacks and the learnable centroids.

Parameters live in a flat dict name -> float64 array; batch-norm running
statistics live in a separate state dict so parameter perturbation (for
gradient checking) never touches them. Layer naming:

    enc{i}.w / enc{i}.b            affine
    enc{i}.gamma / enc{i}.beta     batch norm (hidden layers only)
    dec{i}.*, head.*               same scheme
    centroids                      k_t x h matrix

Hidden layers are affine -> batch norm -> leaky ReLU; the final layer of
the encoder and decoder is a plain affine. The semantic head is a single
affine followed by batch norm. Dropout applies at the stack input only.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .clustering import kmeans_fit

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    feature_dim: int
    h: int
    d: int
    k_s: int
    k_t: int
    hidden: tuple = (512, 256, 256, 4096)
    dropout: float = 0.01
    relu_slope: float = 0.01

    def encoder_sizes(self):
        return [self.feature_dim, *self.hidden, self.h]

    def decoder_sizes(self):
        return [self.h, *reversed(self.hidden), self.feature_dim]


def _init_stack(params, state, prefix, sizes, rng):
    for i in range(len(sizes) - 1):
        fan_in = sizes[i]
        bound = 1.0 / np.sqrt(fan_in)
        params[f"{prefix}{i}.w"] = rng.uniform(-bound, bound,
                                               (sizes[i], sizes[i + 1]))
        params[f"{prefix}{i}.b"] = np.zeros(sizes[i + 1])
        if i < len(sizes) - 2:
            _init_bn(params, state, f"{prefix}{i}", sizes[i + 1])


def _init_bn(params, state, key, width):
    params[f"{key}.gamma"] = np.ones(width)
    params[f"{key}.beta"] = np.zeros(width)
    state[f"{key}.mean"] = np.zeros(width)
    state[f"{key}.var"] = np.ones(width)


def init_params(cfg: ModelConfig, seed=0, embeddings=None, source_means=None):
    """Fresh parameters plus batch-norm state.

    Without `embeddings` the centroids are random rows of roughly unit
    norm. With pretrained `embeddings` (source and target stacked) the
    centroids come from K-means with k_t clusters, reordered so that for
    k < k_s centroid k is the center greedily matched to the embedding
    mean of source class k (`source_means`, k_s x h).
    """
    rng = np.random.default_rng(seed)
    params, state = {}, {}
    _init_stack(params, state, "enc", cfg.encoder_sizes(), rng)
    _init_stack(params, state, "dec", cfg.decoder_sizes(), rng)
    bound = 1.0 / np.sqrt(cfg.h)
    params["head.w"] = rng.uniform(-bound, bound, (cfg.h, cfg.d))
    params["head.b"] = np.zeros(cfg.d)
    _init_bn(params, state, "head", cfg.d)

    if embeddings is None:
        params["centroids"] = rng.standard_normal((cfg.k_t, cfg.h)) / np.sqrt(cfg.h)
    else:
        if embeddings.shape[0] < cfg.k_t:
            raise ValueError(f"K-means needs >= {cfg.k_t} embeddings, "
                             f"got {embeddings.shape[0]}")
        km = kmeans_fit(embeddings, cfg.k_t, seed=seed)
        params["centroids"] = _order_centroids(km.centers, source_means, cfg.k_t)
    return params, state


def _order_centroids(centers, source_means, k_t):
    """Greedy minimal-distance matching of source class means to distinct
    K-means centers; unmatched centers fill the unseen slots in order."""
    k_s = source_means.shape[0]
    dist = np.linalg.norm(source_means[:, None, :] - centers[None, :, :], axis=2)
    assigned = {}
    used = set()
    order = np.dstack(np.unravel_index(np.argsort(dist, axis=None), dist.shape))[0]
    for k, c in order:
        if k not in assigned and c not in used:
            assigned[int(k)] = int(c)
            used.add(int(c))
            if len(assigned) == k_s:
                break
    out = np.empty_like(centers)
    for k in range(k_s):
        out[k] = centers[assigned[k]]
    rest = [c for c in range(k_t) if c not in used]
    for slot, c in enumerate(rest, start=k_s):
        out[slot] = centers[c]
    return out


def _forward_stack(params, state, prefix, n_layers, x, mode, rng,
                   dropout, slope, update_state):
    x, dmask = nn.dropout_forward(x, dropout, mode, rng)
    caches = [("drop", dmask)]
    for i in range(n_layers):
        x, acache = nn.affine_forward(x, params[f"{prefix}{i}.w"],
                                      params[f"{prefix}{i}.b"])
        if i < n_layers - 1:
            x, bcache = nn.batchnorm_forward(
                x, params[f"{prefix}{i}.gamma"], params[f"{prefix}{i}.beta"],
                state[f"{prefix}{i}.mean"], state[f"{prefix}{i}.var"],
                mode=mode, update=update_state)
            x, rcache = nn.leaky_relu_forward(x, slope)
            caches.append(("full", acache, bcache, rcache))
        else:
            caches.append(("affine", acache))
    return x, caches


def _backward_stack(dout, caches, prefix):
    grads = {}
    for i in range(len(caches) - 1, 0, -1):
        layer = caches[i]
        j = i - 1
        if layer[0] == "full":
            _, acache, bcache, rcache = layer
            dout = nn.leaky_relu_backward(dout, rcache)
            dout, dg, db_ = nn.batchnorm_backward(dout, bcache)
            grads[f"{prefix}{j}.gamma"] = dg
            grads[f"{prefix}{j}.beta"] = db_
        else:
            acache = layer[1]
        dout, dw, db = nn.affine_backward(dout, acache)
        grads[f"{prefix}{j}.w"] = dw
        grads[f"{prefix}{j}.b"] = db
    dout = nn.dropout_backward(dout, caches[0][1])
    return dout, grads


def encode(params, state, cfg, x, mode="eval", rng=None, update_state=False):
    if x.shape[1] != cfg.feature_dim:
        raise ValueError(f"encode expects {cfg.feature_dim} columns, "
                         f"got {x.shape[1]}")
    z, caches = _forward_stack(params, state, "enc",
                               len(cfg.encoder_sizes()) - 1, x, mode, rng,
                               cfg.dropout, cfg.relu_slope, update_state)
    return z, caches


def encode_backward(dz, caches):
    return _backward_stack(dz, caches, "enc")


def decode(params, state, cfg, z, mode="eval", rng=None, update_state=False):
    if z.shape[1] != cfg.h:
        raise ValueError(f"decode expects {cfg.h} columns, got {z.shape[1]}")
    xhat, caches = _forward_stack(params, state, "dec",
                                  len(cfg.decoder_sizes()) - 1, z, mode, rng,
                                  cfg.dropout, cfg.relu_slope, update_state)
    return xhat, caches


def decode_backward(dxhat, caches):
    return _backward_stack(dxhat, caches, "dec")


def predict_semantics(params, state, cfg, z, mode="eval", update_state=False):
    """Semantic head: affine then batch norm, no activation or dropout."""
    if z.shape[1] != cfg.h:
        raise ValueError(f"semantic head expects {cfg.h} columns, "
                         f"got {z.shape[1]}")
    a, acache = nn.affine_forward(z, params["head.w"], params["head.b"])
    a, bcache = nn.batchnorm_forward(a, params["head.gamma"],
                                     params["head.beta"],
                                     state["head.mean"], state["head.var"],
                                     mode=mode, update=update_state)
    return a, (acache, bcache)


def predict_semantics_backward(da, caches):
    acache, bcache = caches
    da, dg, dbeta = nn.batchnorm_backward(da, bcache)
    dz, dw, db = nn.affine_backward(da, acache)
    return dz, {"head.w": dw, "head.b": db,
                "head.gamma": dg, "head.beta": dbeta}


def merge_grads(total, part):
    for k, v in part.items():
        if k in total:
            total[k] = total[k] + v
        else:
            total[k] = v


def save_checkpoint(path, params, state, cfg: ModelConfig):
    meta = json.dumps({"version": CHECKPOINT_VERSION,
                       "config": {**cfg.__dict__, "hidden": list(cfg.hidden)}})
    arrays = {f"p/{k}": v for k, v in params.items()}
    arrays.update({f"s/{k}": v for k, v in state.items()})
    np.savez(path, __meta__=np.frombuffer(meta.encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path):
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        cfgd = meta["config"]
        cfgd["hidden"] = tuple(cfgd["hidden"])
        cfg = ModelConfig(**cfgd)
        params = {k[2:]: z[k] for k in z.files if k.startswith("p/")}
        state = {k[2:]: z[k] for k in z.files if k.startswith("s/")}
    return params, state, cfg
