"""Dataset loading, validation, and synthetic data generation.

On-disk layout of a dataset directory:

    manifest.json        {"k_s": .., "k_t": .., "d": .., "feature_dim": ..}
    source_features.csv  N_s x feature_dim floats
    source_labels.csv    N_s ints in [0, k_s)
    attributes_seen.csv  k_s x d floats (row i = class i)
    target_features.csv  N_t x feature_dim floats
    target_labels.csv    optional, N_t ints in [0, k_t) (evaluation only)
    attributes_full.csv  optional, k_t x d floats (evaluation only)

All CSVs carry a header row; floats are written with 17 significant
digits so that save -> load round-trips float64 bitwise.
"""

import json
import os
from dataclasses import dataclass

import numpy as np


class DataError(Exception):
    pass


@dataclass
class Dataset:
    x_s: np.ndarray          # N_s x feature_dim
    y_s: np.ndarray          # N_s ints in [0, k_s)
    a_seen: np.ndarray       # k_s x d, rows unit-normalized
    x_t: np.ndarray          # N_t x feature_dim
    k_s: int
    k_t: int
    d: int
    y_t: np.ndarray | None = None       # evaluation only
    a_full: np.ndarray | None = None    # evaluation only

    @property
    def feature_dim(self):
        return self.x_s.shape[1]


@dataclass
class SynthSpec:
    k_s: int = 3
    k_t: int = 5
    d: int = 6
    feature_dim: int = 16
    samples_per_class: int = 100
    separation: float = 10.0
    within_std: float = 1.0
    seed: int = 0

    def validate(self):
        if self.k_s >= self.k_t:
            raise DataError("k_s must be < k_t")
        if self.separation < 0:
            raise DataError("separation must be >= 0")
        if self.samples_per_class < 2:
            raise DataError("need at least 2 samples per class")
        if self.feature_dim < self.d:
            raise DataError("feature_dim must be >= d")


def _normalize_rows(a, what):
    norms = np.linalg.norm(a, axis=1)
    bad = np.nonzero(norms == 0)[0]
    if bad.size:
        raise DataError(f"zero-norm attribute row {bad[0]} in {what}")
    return a / norms[:, None]


def _read_matrix(path, dtype=float):
    if not os.path.exists(path):
        raise DataError(f"missing file: {path}")
    try:
        m = np.loadtxt(path, delimiter=",", skiprows=1, dtype=dtype, ndmin=2)
    except ValueError as e:
        raise DataError(f"bad rows in {path}: {e}") from e
    return m


def _write_matrix(path, m, fmt):
    header = ",".join(f"c{i}" for i in range(m.shape[1]))
    np.savetxt(path, m, delimiter=",", header=header, comments="", fmt=fmt)


def load_dataset(dirpath):
    """Load and validate a dataset directory.

    Attribute rows are renormalized to unit L2 norm on load; labels are
    range-checked against the manifest class counts.
    """
    mpath = os.path.join(dirpath, "manifest.json")
    if not os.path.exists(mpath):
        raise DataError(f"missing file: {mpath}")
    with open(mpath) as f:
        man = json.load(f)
    k_s, k_t, d = man["k_s"], man["k_t"], man["d"]
    if k_s >= k_t:
        raise DataError(f"manifest requires k_s < k_t, got {k_s} >= {k_t}")

    x_s = _read_matrix(os.path.join(dirpath, "source_features.csv"))
    y_s = _read_matrix(os.path.join(dirpath, "source_labels.csv"),
                       dtype=np.int64).ravel()
    a_seen = _read_matrix(os.path.join(dirpath, "attributes_seen.csv"))
    x_t = _read_matrix(os.path.join(dirpath, "target_features.csv"))

    if a_seen.shape != (k_s, d):
        raise DataError(f"attributes_seen.csv is {a_seen.shape}, "
                        f"manifest says ({k_s}, {d})")
    if x_s.shape[1] != x_t.shape[1]:
        raise DataError(f"feature dim mismatch: source {x_s.shape[1]} "
                        f"vs target {x_t.shape[1]}")
    _check_labels(y_s, k_s, "source_labels.csv")
    a_seen = _normalize_rows(a_seen, "attributes_seen.csv")

    y_t = a_full = None
    ypath = os.path.join(dirpath, "target_labels.csv")
    if os.path.exists(ypath):
        y_t = _read_matrix(ypath, dtype=np.int64).ravel()
        _check_labels(y_t, k_t, "target_labels.csv")
        if y_t.shape[0] != x_t.shape[0]:
            raise DataError("target_labels.csv row count != target features")
    apath = os.path.join(dirpath, "attributes_full.csv")
    if os.path.exists(apath):
        a_full = _read_matrix(apath)
        if a_full.shape != (k_t, d):
            raise DataError(f"attributes_full.csv is {a_full.shape}, "
                            f"expected ({k_t}, {d})")
        a_full = _normalize_rows(a_full, "attributes_full.csv")

    return Dataset(x_s=x_s, y_s=y_s, a_seen=a_seen, x_t=x_t,
                   k_s=k_s, k_t=k_t, d=d, y_t=y_t, a_full=a_full)


def _check_labels(y, upper, what):
    bad = np.nonzero((y < 0) | (y >= upper))[0]
    if bad.size:
        raise DataError(f"label out of range at row {bad[0]} of {what}: "
                        f"{y[bad[0]]} not in [0,{upper})")


def save_dataset(ds, dirpath):
    os.makedirs(dirpath, exist_ok=True)
    with open(os.path.join(dirpath, "manifest.json"), "w") as f:
        json.dump({"k_s": ds.k_s, "k_t": ds.k_t, "d": ds.d,
                   "feature_dim": int(ds.x_s.shape[1])}, f, indent=2)
    _write_matrix(os.path.join(dirpath, "source_features.csv"), ds.x_s, "%.17g")
    _write_matrix(os.path.join(dirpath, "source_labels.csv"),
                  ds.y_s[:, None], "%d")
    _write_matrix(os.path.join(dirpath, "attributes_seen.csv"), ds.a_seen, "%.17g")
    _write_matrix(os.path.join(dirpath, "target_features.csv"), ds.x_t, "%.17g")
    if ds.y_t is not None:
        _write_matrix(os.path.join(dirpath, "target_labels.csv"),
                      ds.y_t[:, None], "%d")
    if ds.a_full is not None:
        _write_matrix(os.path.join(dirpath, "attributes_full.csv"),
                      ds.a_full, "%.17g")


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Generate Gaussian clusters whose means are a linear image of the
    class attribute vectors.

    Seen-class attributes are unit-normalized one-hot-plus-noise vectors;
    each unseen-class attribute is a normalized affine combination
    (2(a_i + a_j) - a_k) / 3 of three seen attributes, which places it
    between a_i and a_j but pushed away from a_k.  Unseen attributes
    therefore stay inside the span recoverable from seen supervision,
    and their feature clusters interpolate between seen clusters.
    Cluster means are `scale * (P @ a_k)` with orthonormal P, where scale
    is chosen so the minimum pairwise mean distance equals
    separation * within_std. Within-cluster noise is isotropic with total
    standard deviation `within_std` (per-dim std within_std/sqrt(dim)).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k_s, k_t, d = spec.k_s, spec.k_t, spec.d
    n = spec.samples_per_class

    attrs = np.zeros((k_t, d))
    for k in range(k_s):
        attrs[k, k % d] = 1.0
        attrs[k] += 0.1 * rng.standard_normal(d)
    attrs[:k_s] = _normalize_rows(attrs[:k_s], "synthetic attributes")
    for j, k in enumerate(range(k_s, k_t)):
        i0, i1, i2 = j % k_s, (j + 1) % k_s, (j + 2) % k_s
        attrs[k] = (2.0 * (attrs[i0] + attrs[i1]) - attrs[i2]) / 3.0
    attrs = _normalize_rows(attrs, "synthetic attributes")

    proj = np.linalg.qr(rng.standard_normal((spec.feature_dim, d)))[0]
    dirs = attrs @ proj.T
    dists = np.linalg.norm(dirs[:, None, :] - dirs[None, :, :], axis=2)
    min_gap = dists[~np.eye(k_t, dtype=bool)].min()
    if spec.separation == 0.0 or min_gap == 0.0:
        scale = 0.0
    else:
        scale = spec.separation * spec.within_std / min_gap
    means = scale * dirs

    noise_std = spec.within_std / np.sqrt(spec.feature_dim)

    def draw(classes):
        xs, ys = [], []
        for k in classes:
            xs.append(means[k] + noise_std
                      * rng.standard_normal((n, spec.feature_dim)))
            ys.append(np.full(n, k, dtype=np.int64))
        return np.vstack(xs), np.concatenate(ys)

    x_s, y_s = draw(range(k_s))
    x_t, y_t = draw(range(k_t))
    return Dataset(x_s=x_s, y_s=y_s, a_seen=attrs[:k_s].copy(), x_t=x_t,
                   k_s=k_s, k_t=k_t, d=d, y_t=y_t, a_full=attrs)


def target_seen_mask(ds: Dataset) -> np.ndarray:
    """mask[i] is True iff target sample i belongs to a seen class."""
    if ds.y_t is None:
        raise DataError("target labels unavailable")
    return ds.y_t < ds.k_s
