"""Central finite-difference gradient checking utilities.

All checks run at double precision. The relative error between an
analytic gradient vector g and its finite-difference estimate f is
``|g - f| / max(|g| + |f|, tiny)`` over the sampled coordinates, as one
norm-level number.
"""
from __future__ import annotations

import numpy as np

FD_STEP = 1e-5


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = float(np.linalg.norm(analytic - numeric))
    den = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return num / max(den, 1e-300)


def numeric_grad(f, x: np.ndarray, indices=None, h: float = FD_STEP) -> np.ndarray:
    """Central differences of scalar-valued ``f`` at ``x``; ``indices``
    restricts the check to a subset of flat coordinates (all by default)."""
    x = x.astype(np.float64)
    flat = x.reshape(-1)
    indices = list(range(flat.size)) if indices is None else list(indices)
    out = np.zeros(len(indices))
    for k, i in enumerate(indices):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        out[k] = (fp - fm) / (2.0 * h)
    return out


def check_param_grads(loss_fn, params: dict, analytic: dict,
                      max_coords_per_tensor: int = 40,
                      rng: np.random.Generator | None = None) -> dict[str, float]:
    """Compare analytic parameter gradients against finite differences.

    ``loss_fn()`` recomputes the scalar loss from the (mutated-in-place)
    ``params``. Large tensors are subsampled. Returns per-tensor relative
    errors.
    """
    rng = rng or np.random.default_rng(0)
    errors: dict[str, float] = {}
    for name in sorted(params):
        tensor = params[name]
        flat = tensor.reshape(-1)
        n = flat.size
        if n <= max_coords_per_tensor:
            idx = np.arange(n)
        else:
            idx = rng.choice(n, size=max_coords_per_tensor, replace=False)
        numeric = np.zeros(len(idx))
        for k, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + FD_STEP
            fp = loss_fn()
            flat[i] = orig - FD_STEP
            fm = loss_fn()
            flat[i] = orig
            numeric[k] = (fp - fm) / (2.0 * FD_STEP)
        errors[name] = rel_error(analytic[name].reshape(-1)[idx], numeric)
    return errors
