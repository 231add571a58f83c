"""Forward and backward passes for the target-selection baselines.

Everything is float64 numpy with hand-written gradients; the recurrent
inner loops go through the selected kernel backend. Dropout is inverted
(masks scaled by 1/keep) and only active in train mode; mask draw order
is fixed so a run is a pure function of the generator state.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .. import kernels
from .params import ENT_DIM, ModelConfig, NUM_PAIRS, OBS_DIM

_PAIR_I, _PAIR_J = (
    np.array(idx, dtype=np.int64)
    for idx in zip(*combinations(range(7), 2))
)
assert len(_PAIR_I) == NUM_PAIRS


@dataclass
class Batch:
    obs: np.ndarray                      # (B, 7, 4)
    labels: np.ndarray                   # (B,)
    tokens: np.ndarray | None = None     # (T, B) int64, 0-padded at the end
    lengths: np.ndarray | None = None    # (B,)

    @property
    def size(self) -> int:
        return self.obs.shape[0]


def make_batch(examples, with_tokens: bool) -> Batch:
    obs = np.stack([ex.observation.rows for ex in examples]).astype(np.float64)
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    if not with_tokens:
        return Batch(obs=obs, labels=labels)
    lengths = np.array([len(ex.token_ids) for ex in examples], dtype=np.int64)
    T = int(lengths.max())
    tokens = np.zeros((T, len(examples)), dtype=np.int64)
    for b, ex in enumerate(examples):
        tokens[: lengths[b], b] = ex.token_ids
    return Batch(obs=obs, labels=labels, tokens=tokens, lengths=lengths)


def _dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray:
    return (rng.random(shape) >= p) / (1.0 - p)


def _split_gates(x, wx, bx, H):
    """One GEMM for all three gates, split into contiguous (T,B,H) blocks."""
    T, B, E = x.shape
    g = x.reshape(T * B, E) @ wx + bx
    g = g.reshape(T, B, 3 * H)
    return (np.ascontiguousarray(g[:, :, :H]),
            np.ascontiguousarray(g[:, :, H:2 * H]),
            np.ascontiguousarray(g[:, :, 2 * H:]))


def _merge_gates(dxz, dxr, dxn):
    return np.concatenate([dxz, dxr, dxn], axis=2)


def forward(params, cfg: ModelConfig, batch: Batch, train: bool,
            rng: np.random.Generator | None = None):
    """Compute slot logits; returns (logits, cache) where the cache holds
    every intermediate the backward pass needs."""
    if train and rng is None:
        raise ValueError("train-mode forward needs a generator for dropout")
    H = cfg.hidden
    B = batch.size
    p = cfg.dropout
    cache: dict = {"batch": batch, "cfg": cfg, "train": train}

    def dropout(name, x):
        if not train:
            return x
        mask = _dropout_mask(rng, x.shape, p)
        cache[name] = mask
        return x * mask

    # token embeddings first: keeps dropout draw order independent of variant
    # internals that follow.
    if cfg.uses_dialogue:
        tokens, lengths = batch.tokens, batch.lengths
        T = tokens.shape[0]
        x_pre = params["emb_w"][tokens] + params["emb_b"]
        x_relu = np.maximum(x_pre, 0.0)
        cache["emb_relu_mask"] = x_pre > 0
        x = dropout("emb_drop", x_relu)
        cache["emb_x"] = x

        mask = (np.arange(T)[:, None] < lengths[None, :]).astype(np.float64)
        cache["seq_mask"] = mask
        # backward direction reads each sequence reversed; padding stays put.
        rev_idx = np.arange(T)[:, None].repeat(B, axis=1)
        valid = rev_idx < lengths[None, :]
        rev_idx = np.where(valid, lengths[None, :] - 1 - rev_idx, rev_idx)
        cache["rev_idx"] = rev_idx
        x_rev = np.ascontiguousarray(x[rev_idx, np.arange(B)[None, :], :])

        dial_parts = []
        for direction, xd in (("f", x), ("b", x_rev)):
            xz, xr, xn = _split_gates(xd, params[f"gru_{direction}_wx"],
                                      params[f"gru_{direction}_bx"], H)
            h, z, r, n = kernels.gru_forward(
                xz, xr, xn,
                params[f"gru_{direction}_wz"], params[f"gru_{direction}_wr"],
                params[f"gru_{direction}_wn"], mask)
            cache[f"gru_{direction}"] = (h, z, r, n)
            dial_parts.append(h[-1])
        dial = np.concatenate(dial_parts, axis=1)
        cache["dial"] = dial

    flat = batch.obs.reshape(B, OBS_DIM)
    if cfg.uses_relation:
        pin = np.concatenate(
            [batch.obs[:, _PAIR_I, :], batch.obs[:, _PAIR_J, :]], axis=2)
        cache["pin"] = pin
        r_pre = pin @ params["rel_w"] + params["rel_b"]
        cache["rel_relu_mask"] = r_pre > 0
        r_sum = np.maximum(r_pre, 0.0).sum(axis=1)
        rel_out = dropout("rel_drop", r_sum)
        ctx_in = np.concatenate([flat, rel_out], axis=1)
    else:
        ctx_in = flat
    cache["ctx_in"] = ctx_in
    c_pre = ctx_in @ params["ctx_w"] + params["ctx_b"]
    cache["ctx_relu_mask"] = c_pre > 0
    c = dropout("ctx_drop", np.maximum(c_pre, 0.0))

    joint = np.concatenate([c, cache["dial"]], axis=1) if cfg.uses_dialogue else c
    joint = dropout("joint_drop", joint)
    cache["joint"] = joint
    h_pre = joint @ params["cls_w"] + params["cls_b"]
    cache["cls_relu_mask"] = h_pre > 0
    hid = dropout("cls_drop", np.maximum(h_pre, 0.0))
    cache["cls_hid"] = hid
    logits = hid @ params["out_w"] + params["out_b"]
    return logits, cache


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    B = logits.shape[0]
    probs = softmax(logits)
    nll = -np.log(np.clip(probs[np.arange(B), labels], 1e-300, None))
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    return float(nll.mean()), dlogits / B, probs


def backward(params, cache, dlogits):
    """Gradients of the loss w.r.t. every parameter, plus the observation
    gradient (used by the finite-difference checks)."""
    cfg: ModelConfig = cache["cfg"]
    batch: Batch = cache["batch"]
    train = cache["train"]
    H = cfg.hidden
    B = batch.size
    grads = {}

    def undrop(name, dx):
        return dx * cache[name] if train else dx

    hid = cache["cls_hid"]
    grads["out_w"] = hid.T @ dlogits
    grads["out_b"] = dlogits.sum(axis=0)
    dhid = undrop("cls_drop", dlogits @ params["out_w"].T)
    dh_pre = dhid * cache["cls_relu_mask"]
    joint = cache["joint"]
    grads["cls_w"] = joint.T @ dh_pre
    grads["cls_b"] = dh_pre.sum(axis=0)
    djoint = undrop("joint_drop", dh_pre @ params["cls_w"].T)

    dc = djoint[:, :H]
    ddial = djoint[:, H:] if cfg.uses_dialogue else None

    dc_pre = undrop("ctx_drop", dc) * cache["ctx_relu_mask"]
    ctx_in = cache["ctx_in"]
    grads["ctx_w"] = ctx_in.T @ dc_pre
    grads["ctx_b"] = dc_pre.sum(axis=0)
    dctx_in = dc_pre @ params["ctx_w"].T

    dobs = np.zeros_like(batch.obs)
    dflat = dctx_in[:, :OBS_DIM]
    dobs += dflat.reshape(batch.obs.shape)
    if cfg.uses_relation:
        drel_out = undrop("rel_drop", dctx_in[:, OBS_DIM:])
        dpost = np.repeat(drel_out[:, None, :], NUM_PAIRS, axis=1)
        dr_pre = dpost * cache["rel_relu_mask"]
        pin = cache["pin"]
        grads["rel_w"] = pin.reshape(-1, pin.shape[2]).T @ dr_pre.reshape(-1, H)
        grads["rel_b"] = dr_pre.sum(axis=(0, 1))
        dpin = dr_pre @ params["rel_w"].T
        np.add.at(dobs, (slice(None), _PAIR_I), dpin[:, :, :ENT_DIM])
        np.add.at(dobs, (slice(None), _PAIR_J), dpin[:, :, ENT_DIM:])

    if cfg.uses_dialogue:
        mask = cache["seq_mask"]
        x = cache["emb_x"]
        T = x.shape[0]
        dx = np.zeros_like(x)
        for direction, dh_last in (("f", ddial[:, :H]), ("b", ddial[:, H:])):
            h, z, r, n = cache[f"gru_{direction}"]
            dxz, dxr, dxn, dwz, dwr, dwn = kernels.gru_backward(
                np.ascontiguousarray(dh_last), h, z, r, n,
                params[f"gru_{direction}_wz"], params[f"gru_{direction}_wr"],
                params[f"gru_{direction}_wn"], mask)
            grads[f"gru_{direction}_wz"] = dwz
            grads[f"gru_{direction}_wr"] = dwr
            grads[f"gru_{direction}_wn"] = dwn
            dg = _merge_gates(dxz, dxr, dxn)
            E = x.shape[2]
            xd = x if direction == "f" else np.ascontiguousarray(
                x[cache["rev_idx"], np.arange(B)[None, :], :])
            grads[f"gru_{direction}_wx"] = (
                xd.reshape(T * B, E).T @ dg.reshape(T * B, 3 * H))
            grads[f"gru_{direction}_bx"] = dg.sum(axis=(0, 1))
            dxd = (dg.reshape(T * B, 3 * H)
                   @ params[f"gru_{direction}_wx"].T).reshape(T, B, E)
            if direction == "f":
                dx += dxd
            else:
                np.add.at(dx, (cache["rev_idx"], np.arange(B)[None, :]), dxd)
        dx = undrop("emb_drop", dx)
        dx_pre = dx * cache["emb_relu_mask"]
        grads["emb_b"] = dx_pre.sum(axis=(0, 1))
        demb = np.zeros_like(params["emb_w"])
        np.add.at(demb, batch.tokens.reshape(-1), dx_pre.reshape(-1, dx_pre.shape[2]))
        grads["emb_w"] = demb

    return grads, dobs


def loss_and_grads(params, cfg: ModelConfig, batch: Batch, train: bool,
                   rng: np.random.Generator | None = None):
    logits, cache = forward(params, cfg, batch, train, rng)
    loss, dlogits, probs = cross_entropy(logits, batch.labels)
    grads, _ = backward(params, cache, dlogits)
    return loss, grads, logits


# ---------------------------------------------------------------------------
# Encoder-level entry points (used directly by tests and tooling)


def encode_context_plain(obs_flat: np.ndarray, params, train: bool = False,
                         rng: np.random.Generator | None = None,
                         dropout_p: float = 0.5) -> np.ndarray:
    """Plain context encoding of one or more 28-vectors: affine + ReLU
    (+ dropout in train mode)."""
    single = obs_flat.ndim == 1
    x = obs_flat[None, :] if single else obs_flat
    h = np.maximum(x @ params["ctx_w"] + params["ctx_b"], 0.0)
    if train:
        h = h * _dropout_mask(rng, h.shape, dropout_p)
    return h[0] if single else h


def relation_sum(obs: np.ndarray, params) -> np.ndarray:
    """Pairwise relation encoding: every unordered slot pair through the
    shared layer, summed. ``obs`` is (7, 4) or (B, 7, 4)."""
    single = obs.ndim == 2
    o = obs[None] if single else obs
    pin = np.concatenate([o[:, _PAIR_I, :], o[:, _PAIR_J, :]], axis=2)
    out = np.maximum(pin @ params["rel_w"] + params["rel_b"], 0.0).sum(axis=1)
    return out[0] if single else out


def encode_dialogue(token_ids: np.ndarray, params, cfg: ModelConfig) -> np.ndarray:
    """Dialogue embedding of one token stream: both recurrent directions'
    final states, concatenated (eval mode)."""
    if len(token_ids) == 0:
        raise ValueError("token stream must be non-empty")
    from types import SimpleNamespace

    ex = SimpleNamespace(
        observation=SimpleNamespace(rows=np.zeros((7, ENT_DIM))),
        label=0,
        token_ids=np.asarray(token_ids, dtype=np.int64),
    )
    batch = make_batch([ex], with_tokens=True)
    _, cache = forward(params, cfg, batch, train=False)
    return cache["dial"][0]
