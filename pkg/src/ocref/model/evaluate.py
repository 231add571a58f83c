"""Evaluation: per-variant accuracies over the testset variants, seed
ensembles, and paired significance tests on per-example correctness."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .network import forward, make_batch
from .params import ModelConfig


def predictions(params, cfg: ModelConfig, examples, batch_size: int = 64) -> np.ndarray:
    if not examples:
        raise ValueError("cannot score an empty example set")
    preds = np.empty(len(examples), dtype=np.int64)
    for start in range(0, len(examples), batch_size):
        batch = make_batch(examples[start:start + batch_size], cfg.uses_dialogue)
        logits, _ = forward(params, cfg, batch, train=False)
        preds[start:start + batch.size] = logits.argmax(axis=1)
    return preds


def correctness(params, cfg: ModelConfig, examples) -> np.ndarray:
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    return (predictions(params, cfg, examples) == labels).astype(np.float64)


def accuracy(params, cfg: ModelConfig, examples) -> float:
    return float(correctness(params, cfg, examples).mean())


def paired_ttest(correct_a, correct_b) -> float:
    """Two-sided paired t-test on per-example correctness vectors.

    Conventions for the degenerate cases: identical vectors give p = 1;
    a zero-variance nonzero difference gives p = 0.
    """
    a = np.asarray(correct_a, dtype=np.float64)
    b = np.asarray(correct_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d vectors")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 paired observations")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / np.sqrt(n))
    # two-sided p from the Student-t CDF with n-1 degrees of freedom
    return float(2.0 * special.stdtr(n - 1, -abs(t)))


@dataclass
class VariantReport:
    variant: str
    seed_accuracies: list[float] = field(default_factory=list)
    mean: float = 0.0
    std: float = 0.0
    best_seed: int | None = None
    uncorrelated: float | None = None
    success_only: float | None = None


@dataclass
class EvalReport:
    variants: dict[str, VariantReport] = field(default_factory=dict)
    ttests: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "variants": {
                v: {
                    "seed_accuracies": r.seed_accuracies,
                    "mean": r.mean,
                    "std": r.std,
                    "best_seed": r.best_seed,
                    "uncorrelated": r.uncorrelated,
                    "success_only": r.success_only,
                }
                for v, r in self.variants.items()
            },
            "paired_ttests": self.ttests,
        }


def evaluate_models(models_by_variant: dict, variants_data: dict) -> EvalReport:
    """Build the full comparison report.

    ``models_by_variant`` maps variant name to a list of entries
    ``(seed, params, config, valid_loss)``; all seeds are scored on the
    full testset, the best-validation-loss seed additionally on the
    uncorrelated and success-only variants, and pairwise t-tests run on
    per-example correctness over the uncorrelated testset.
    """
    report = EvalReport()
    best_correct: dict[str, np.ndarray] = {}
    for variant, entries in sorted(models_by_variant.items()):
        rep = VariantReport(variant=variant)
        best = min(entries, key=lambda e: e[3])
        for seed, params, cfg, _valid_loss in sorted(entries, key=lambda e: e[0]):
            rep.seed_accuracies.append(accuracy(params, cfg, variants_data["full"]))
        accs = np.array(rep.seed_accuracies)
        rep.mean = float(accs.mean())
        rep.std = float(accs.std())
        rep.best_seed = best[0]
        # tiny corpora can leave a variant empty; report null, not NaN
        unc = variants_data["uncorrelated"]
        son = variants_data["success_only"]
        rep.uncorrelated = accuracy(best[1], best[2], unc) if unc else None
        rep.success_only = accuracy(best[1], best[2], son) if son else None
        if len(unc) >= 2:
            best_correct[variant] = correctness(best[1], best[2], unc)
        report.variants[variant] = rep
    names = sorted(best_correct)
    for i, va in enumerate(names):
        for vb in names[i + 1:]:
            report.ttests[f"{va} vs {vb}"] = paired_ttest(best_correct[va], best_correct[vb])
    return report
