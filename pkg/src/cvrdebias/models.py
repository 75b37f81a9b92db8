"""Second-order factorization machine with one-hot user/item features.

The model scores a (user, item) pair as

    sigmoid(w0 + w[u] + w[n_users + i] + <V[u], V[n_users + i]>)

which is the full second-order FM for one-hot encodings: the pairwise term
collapses to the inner product of the two active latent factors.  Gradients
are analytic; optimization uses an adaptive-moment (Adam) update with bias
correction.  All arrays are float64 and all randomness is seeded, so a run
is bitwise reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError

# Predictions are clamped to [PRED_CLAMP, 1 - PRED_CLAMP] before any log.
PRED_CLAMP = 1e-7


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def clamp_probs(p):
    return np.clip(p, PRED_CLAMP, 1.0 - PRED_CLAMP)


def cross_entropy(label, pred):
    """Soft-label binary cross-entropy, natural log.

    ``label`` may be any value in [0, 1]; ``pred`` is clamped to
    [1e-7, 1 - 1e-7] before the logs are taken.
    """
    label = np.asarray(label, dtype=np.float64)
    pred = clamp_probs(np.asarray(pred, dtype=np.float64))
    return -label * np.log(pred) - (1.0 - label) * np.log1p(-pred)


@dataclass
class FMParams:
    """Factorization-machine parameters over user+item one-hot features."""

    num_users: int
    num_items: int
    w0: float
    w: np.ndarray  # (num_users + num_items,)
    V: np.ndarray  # (num_users + num_items, k)

    @classmethod
    def init(cls, num_users, num_items, embedding_dim=64, seed=0, init_scale=0.01):
        """Zero biases, latent factors uniform in (-init_scale, init_scale)."""
        if embedding_dim < 1:
            raise TrainingError(f"embedding_dim must be >= 1, got {embedding_dim}")
        n_feat = num_users + num_items
        rng = np.random.default_rng(seed)
        V = rng.uniform(-init_scale, init_scale, size=(n_feat, embedding_dim))
        return cls(num_users, num_items, 0.0, np.zeros(n_feat), V)

    @property
    def embedding_dim(self):
        return self.V.shape[1]

    def copy(self):
        return FMParams(self.num_users, self.num_items, self.w0,
                        self.w.copy(), self.V.copy())

    def copy_from(self, other):
        """Overwrite this parameter set with a value copy of ``other``."""
        if self.w.shape != other.w.shape or self.V.shape != other.V.shape:
            raise TrainingError("parameter shapes do not match")
        self.w0 = other.w0
        self.w[:] = other.w
        self.V[:] = other.V

    def squared_norm(self):
        return float(self.w0 ** 2 + np.dot(self.w, self.w) + np.sum(self.V * self.V))

    def _check_index(self, users, items):
        if users.size and (users.min() < 0 or users.max() >= self.num_users):
            raise TrainingError("user index out of range")
        if items.size and (items.min() < 0 or items.max() >= self.num_items):
            raise TrainingError("item index out of range")

    def logits(self, users, items):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        self._check_index(users, items)
        fi = self.num_users + items
        return (self.w0 + self.w[users] + self.w[fi]
                + np.einsum("ij,ij->i", self.V[users], self.V[fi]))

    def predict(self, users, items):
        """Predicted conversion/click probability for each (user, item) pair."""
        return sigmoid(self.logits(users, items))

    def predict_matrix(self):
        """Dense prediction over the full user x item grid (small data only)."""
        Vu = self.V[: self.num_users]
        Vi = self.V[self.num_users:]
        logits = (self.w0 + self.w[: self.num_users][:, None]
                  + self.w[self.num_users:][None, :] + Vu @ Vi.T)
        return sigmoid(logits)


def fm_predict(params: FMParams, user: int, item: int) -> float:
    """Scalar convenience wrapper around :meth:`FMParams.predict`."""
    return float(params.predict(np.array([user]), np.array([item]))[0])


@dataclass
class FMGradients:
    g_w0: float
    g_w: np.ndarray
    g_V: np.ndarray

    @classmethod
    def zeros_like(cls, params: FMParams):
        return cls(0.0, np.zeros_like(params.w), np.zeros_like(params.V))


def scatter_logit_gradients(params: FMParams, users, items, dlogit, l2=0.0):
    """Accumulate d(loss)/d(params) from per-example logit gradients.

    ``dlogit[j]`` is the derivative of the batch loss w.r.t. the j-th
    example's logit.  The L2 term contributes the exact gradient of
    l2 * ||params||_F^2, i.e. 2 * l2 * params, on every coordinate.
    """
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    dlogit = np.asarray(dlogit, dtype=np.float64)
    fi = params.num_users + items
    grads = FMGradients.zeros_like(params)
    grads.g_w0 = float(dlogit.sum())
    np.add.at(grads.g_w, users, dlogit)
    np.add.at(grads.g_w, fi, dlogit)
    np.add.at(grads.g_V, users, dlogit[:, None] * params.V[fi])
    np.add.at(grads.g_V, fi, dlogit[:, None] * params.V[users])
    if l2:
        grads.g_w0 += 2.0 * l2 * params.w0
        grads.g_w += 2.0 * l2 * params.w
        grads.g_V += 2.0 * l2 * params.V
    return grads


def fm_gradients(params: FMParams, users, items, weights, labels, l2=0.0):
    """Loss and exact gradient of sum_j weights[j] * CE(labels[j], pred_j)
    plus l2 * ||params||_F^2.

    For sigmoid + cross-entropy the per-example logit gradient is
    weight * (pred - label); weights may be negative (composite losses).
    Returns (loss_value, FMGradients).
    """
    weights = np.asarray(weights, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    preds = params.predict(users, items)
    loss = float(np.dot(weights, cross_entropy(labels, preds)))
    loss += l2 * params.squared_norm()
    dlogit = weights * (preds - labels)
    return loss, scatter_logit_gradients(params, users, items, dlogit, l2=l2)


@dataclass
class AdamState:
    """Adaptive-moment optimizer state matching an FMParams layout."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m_w0: float = 0.0
    v_w0: float = 0.0
    m_w: np.ndarray = field(default=None)
    v_w: np.ndarray = field(default=None)
    m_V: np.ndarray = field(default=None)
    v_V: np.ndarray = field(default=None)

    @classmethod
    def for_params(cls, params: FMParams, learning_rate=0.001):
        return cls(learning_rate=learning_rate,
                   m_w=np.zeros_like(params.w), v_w=np.zeros_like(params.w),
                   m_V=np.zeros_like(params.V), v_V=np.zeros_like(params.V))


def adam_update(state: AdamState, params: FMParams, grads: FMGradients):
    """One Adam step with bias correction; mutates params/state in place."""
    if state.m_w.shape != params.w.shape or state.m_V.shape != params.V.shape:
        raise TrainingError("optimizer state does not match parameter shapes")
    if grads.g_w.shape != params.w.shape or grads.g_V.shape != params.V.shape:
        raise TrainingError("gradient does not match parameter shapes")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    lr = state.learning_rate

    state.m_w0 = b1 * state.m_w0 + (1 - b1) * grads.g_w0
    state.v_w0 = b2 * state.v_w0 + (1 - b2) * grads.g_w0 ** 2
    params.w0 -= lr * (state.m_w0 / bc1) / (np.sqrt(state.v_w0 / bc2) + state.epsilon)

    state.m_w *= b1
    state.m_w += (1 - b1) * grads.g_w
    state.v_w *= b2
    state.v_w += (1 - b2) * grads.g_w ** 2
    params.w -= lr * (state.m_w / bc1) / (np.sqrt(state.v_w / bc2) + state.epsilon)

    state.m_V *= b1
    state.m_V += (1 - b1) * grads.g_V
    state.v_V *= b2
    state.v_V += (1 - b2) * grads.g_V ** 2
    params.V -= lr * (state.m_V / bc1) / (np.sqrt(state.v_V / bc2) + state.epsilon)
    return params, state


def save_checkpoint(path, params: FMParams, state: AdamState | None = None, extra=None):
    """Write a checkpoint: key=value header, blank line, then raw float64
    arrays in the order named by the header's ``arrays`` key."""
    names = ["w0", "w", "V"]
    arrays = [np.array([params.w0]), params.w, params.V]
    header = {
        "num_users": params.num_users,
        "num_items": params.num_items,
        "embedding_dim": params.embedding_dim,
        "step": 0 if state is None else state.step,
    }
    if state is not None:
        header["learning_rate"] = state.learning_rate
        names += ["m_w0", "v_w0", "m_w", "v_w", "m_V", "v_V"]
        arrays += [np.array([state.m_w0]), np.array([state.v_w0]),
                   state.m_w, state.v_w, state.m_V, state.v_V]
    if extra:
        header.update(extra)
    header["arrays"] = ",".join(names)
    with open(path, "wb") as fh:
        for key in sorted(header):
            fh.write(f"{key}={header[key]}\n".encode())
        fh.write(b"\n")
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns (FMParams, AdamState or None, header dict).
    """
    with open(path, "rb") as fh:
        header = {}
        while True:
            line = fh.readline()
            if not line or line == b"\n":
                break
            key, _, value = line.decode().rstrip("\n").partition("=")
            header[key] = value
        blob = fh.read()
    num_users = int(header["num_users"])
    num_items = int(header["num_items"])
    k = int(header["embedding_dim"])
    n_feat = num_users + num_items
    shapes = {"w0": 1, "w": n_feat, "V": n_feat * k,
              "m_w0": 1, "v_w0": 1, "m_w": n_feat, "v_w": n_feat,
              "m_V": n_feat * k, "v_V": n_feat * k}
    names = header["arrays"].split(",")
    arrays = {}
    offset = 0
    buf = np.frombuffer(blob, dtype=np.float64)
    for name in names:
        size = shapes[name]
        arrays[name] = buf[offset:offset + size].copy()
        offset += size
    params = FMParams(num_users, num_items, float(arrays["w0"][0]),
                      arrays["w"], arrays["V"].reshape(n_feat, k))
    state = None
    if "m_w" in arrays:
        state = AdamState(
            learning_rate=float(header.get("learning_rate", 0.001)),
            step=int(header["step"]),
            m_w0=float(arrays["m_w0"][0]), v_w0=float(arrays["v_w0"][0]),
            m_w=arrays["m_w"], v_w=arrays["v_w"],
            m_V=arrays["m_V"].reshape(n_feat, k),
            v_V=arrays["v_V"].reshape(n_feat, k))
    return params, state, header
