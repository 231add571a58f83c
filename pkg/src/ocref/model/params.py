"""Model configuration, parameter initialization and (de)serialization.

Four baseline variants share one parameter scheme: a context encoder
(plain MLP over the 28-vector, optionally augmented with a pairwise
relation encoder) and, for the full variants, a dialogue encoder (token
embedding layer + bidirectional GRU). A classifier MLP maps the
concatenated embeddings to 7 slot logits.
"""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np

VARIANTS = ("context-mlp", "context-rn", "full-mlp", "full-rn")

PARAMS_FORMAT = "oc-params-1"

NUM_SLOTS = 7
OBS_DIM = 28
ENT_DIM = 4
PAIR_DIM = 2 * ENT_DIM
NUM_PAIRS = 21  # C(7, 2)


@dataclass
class ModelConfig:
    variant: str = "full-rn"
    vocab_size: int = 0
    hidden: int = 128
    emb_dim: int = 128
    dropout: float = 0.5
    init_range: tuple[float, float] = (-0.01, 0.01)
    lr: float = 0.001
    grad_clip_l2: float = 0.1
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.uses_dialogue and self.vocab_size <= 0:
            raise ValueError("full variants need vocab_size > 0")

    @property
    def uses_dialogue(self) -> bool:
        return self.variant.startswith("full")

    @property
    def uses_relation(self) -> bool:
        return self.variant.endswith("-rn")

    @property
    def ctx_in_dim(self) -> int:
        return OBS_DIM + (self.hidden if self.uses_relation else 0)

    @property
    def joint_dim(self) -> int:
        return self.hidden + (2 * self.hidden if self.uses_dialogue else 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["init_range"] = list(self.init_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["init_range"] = tuple(d["init_range"])
        return cls(**d)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    H, E = cfg.hidden, cfg.emb_dim
    shapes: dict[str, tuple[int, ...]] = {}
    if cfg.uses_relation:
        shapes["rel_w"] = (PAIR_DIM, H)
        shapes["rel_b"] = (H,)
    shapes["ctx_w"] = (cfg.ctx_in_dim, H)
    shapes["ctx_b"] = (H,)
    if cfg.uses_dialogue:
        shapes["emb_w"] = (cfg.vocab_size, E)
        shapes["emb_b"] = (E,)
        for d in ("f", "b"):
            shapes[f"gru_{d}_wx"] = (E, 3 * H)
            shapes[f"gru_{d}_bx"] = (3 * H,)
            shapes[f"gru_{d}_wz"] = (H, H)
            shapes[f"gru_{d}_wr"] = (H, H)
            shapes[f"gru_{d}_wn"] = (H, H)
    shapes["cls_w"] = (cfg.joint_dim, H)
    shapes["cls_b"] = (H,)
    shapes["out_w"] = (H, NUM_SLOTS)
    shapes["out_b"] = (NUM_SLOTS,)
    return shapes


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """All parameters drawn uniformly from ``init_range``, in a fixed key
    order so initialization is a pure function of the generator state."""
    lo, hi = cfg.init_range
    return {
        name: rng.uniform(lo, hi, size=shape)
        for name, shape in param_shapes(cfg).items()
    }


def zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def save_params(path, params: dict[str, np.ndarray], cfg: ModelConfig,
                meta: dict | None = None) -> None:
    """Versioned binary dump: an .npz archive with a JSON header entry."""
    header = {"format": PARAMS_FORMAT, "config": cfg.to_dict(), "meta": meta or {}}
    buf = io.BytesIO()
    np.savez(buf, __header__=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
             **params)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_params(path) -> tuple[dict[str, np.ndarray], ModelConfig, dict]:
    with np.load(path) as archive:
        header = json.loads(bytes(archive["__header__"]).decode())
        if header.get("format") != PARAMS_FORMAT:
            raise ValueError(f"unsupported parameter file format {header.get('format')!r}")
        params = {k: archive[k] for k in archive.files if k != "__header__"}
    cfg = ModelConfig.from_dict(header["config"])
    expected = param_shapes(cfg)
    if set(expected) != set(params):
        raise ValueError("parameter file does not match its config's parameter set")
    return params, cfg, header.get("meta", {})
