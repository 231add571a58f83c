"""Built-in invariant suites behind `ocref selfcheck`.

Each suite returns (ok, detail). The quick mode keeps sample sizes small
enough for a pre-flight check; ``--full`` runs the statistical suites at
their contractual sizes.
"""
from __future__ import annotations

import time

import numpy as np
from scipy import stats

from . import engine, world
from .corpus import tokenize


def check_worlds(n_per_k: int, seed: int) -> tuple[bool, str]:
    t0 = time.perf_counter()
    failures = 0
    size_samples: dict[int, list[float]] = {k: [] for k in world.SHARED_CHOICES}
    color_samples: dict[int, list[float]] = {k: [] for k in world.SHARED_CHOICES}
    for k in world.SHARED_CHOICES:
        for i in range(n_per_k):
            w = world.generate_world(k, seed=seed + i)
            if world.validate_world(w):
                failures += 1
            for e in w.entities:
                size_samples[k].append(e.size)
                color_samples[k].append(e.color)
    worst_p = 1.0
    for k in world.SHARED_CHOICES:
        for values, lo, hi in (
            (size_samples[k], world.SIZE_MIN, world.SIZE_MAX),
            (color_samples[k], world.COLOR_MIN, world.COLOR_MAX),
        ):
            counts, _ = np.histogram(values, bins=10, range=(lo, hi))
            p = stats.chisquare(counts).pvalue
            worst_p = min(worst_p, p)
    dt = time.perf_counter() - t0
    ok = failures == 0 and worst_p > 1e-3
    return ok, (f"{3 * n_per_k} worlds, {failures} invalid, "
                f"worst uniformity p={worst_p:.4f}, {dt:.1f}s")


def check_engine_replay(n_logs: int, seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for i in range(n_logs):
        k = int(rng.choice(world.SHARED_CHOICES))
        w = world.generate_world(k, seed=int(rng.integers(2**31)))
        first = int(rng.integers(2))
        state = engine.new_session(w, 0, first)
        now = state.active_start
        for _ in range(int(rng.integers(1, 15))):
            agent = int(rng.integers(2))
            now += int(rng.integers(100, 30_000))
            if rng.random() < 0.3:
                ids = w.views[agent].visible_ids
                action = engine.Select(int(ids[rng.integers(len(ids))]))
            else:
                action = engine.Message(f"m{rng.integers(100)}")
            try:
                state = engine.apply(state, agent, action, now)
            except engine.EngineError:
                continue
        replayed = engine.replay(w, 0, first, state.events)
        if replayed != state:
            mismatches += 1
    return mismatches == 0, f"{n_logs} random logs, {mismatches} replay mismatches"


def check_kernels(seed: int) -> tuple[bool, str]:
    from .kernels import backend_name, gru_numpy

    try:
        from .kernels import gru_numba
    except ImportError:
        return True, "numba unavailable; numpy path only"
    rng = np.random.default_rng(seed)
    T, B, H = 9, 4, 8
    xz, xr, xn = (rng.normal(size=(T, B, H)) for _ in range(3))
    wz, wr, wn = (rng.normal(size=(H, H)) * 0.4 for _ in range(3))
    lengths = rng.integers(1, T + 1, size=B)
    mask = (np.arange(T)[:, None] < lengths[None, :]).astype(np.float64)
    ref = gru_numpy.gru_forward(xz, xr, xn, wz, wr, wn, mask)
    fast = gru_numba.gru_forward(xz, xr, xn, wz, wr, wn, mask)
    dh = rng.normal(size=(B, H))
    ref_b = gru_numpy.gru_backward(dh, *ref, wz, wr, wn, mask)
    fast_b = gru_numba.gru_backward(dh, *fast, wz, wr, wn, mask)
    worst = 0.0
    for a, b in list(zip(ref, fast)) + list(zip(ref_b, fast_b)):
        worst = max(worst, float(np.abs(a - b).max()))
    return worst < 1e-10, f"active backend {backend_name()}, max |numba-numpy| = {worst:.2e}"


def check_gradients(seed: int) -> tuple[bool, str]:
    from types import SimpleNamespace

    from .model import ModelConfig, cross_entropy, forward, loss_and_grads, make_batch
    from .model.gradcheck import check_param_grads
    from .model.params import param_shapes

    rng = np.random.default_rng(seed)
    cfg = ModelConfig(variant="full-rn", vocab_size=9, hidden=5, emb_dim=4, seed=seed)
    params = {
        name: rng.normal(scale=0.3, size=shape)
        for name, shape in param_shapes(cfg).items()
    }
    exs = [
        SimpleNamespace(
            observation=SimpleNamespace(rows=rng.uniform(-0.9, 0.9, size=(7, 4))),
            label=int(rng.integers(7)),
            token_ids=rng.integers(0, 9, size=int(rng.integers(2, 7))).astype(np.int64),
        )
        for _ in range(3)
    ]
    batch = make_batch(exs, True)
    _, grads, _ = loss_and_grads(params, cfg, batch, train=False)

    def loss_fn():
        logits, _ = forward(params, cfg, batch, train=False)
        return cross_entropy(logits, batch.labels)[0]

    errs = check_param_grads(loss_fn, params, grads, max_coords_per_tensor=10,
                             rng=np.random.default_rng(0))
    worst = max(errs.values())
    return worst < 1e-3, f"worst relative error {worst:.2e} over {len(errs)} tensors"


def check_tokenizer(seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    alphabet = list("abc defg.,!?'\"()-:;0123")
    bad = 0
    for _ in range(300):
        s = "".join(rng.choice(alphabet) for _ in range(int(rng.integers(0, 30))))
        toks = tokenize(s)
        if tokenize(" ".join(toks)) != toks:
            bad += 1
    return bad == 0, f"300 fuzz strings, {bad} idempotence failures"


def run_selfcheck(full: bool = False, seed: int = 0) -> dict[str, tuple[bool, str]]:
    n_worlds = 10_000 if full else 1_000
    n_logs = 1_000 if full else 200
    return {
        "world-invariants": check_worlds(n_worlds, seed),
        "engine-replay": check_engine_replay(n_logs, seed),
        "kernel-equivalence": check_kernels(seed),
        "gradient-check": check_gradients(seed),
        "tokenizer-idempotence": check_tokenizer(seed),
    }
