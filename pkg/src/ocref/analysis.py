"""Corpus statistics: basic per-k metrics, nuanced-expression rates and
selection-bias distributions over dot color and size."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from . import engine
from .corpus import messages_of, tokenize
from .world import COLOR_MAX, COLOR_MIN, SIZE_MIN, SIZE_RANGE

COLOR_BINS = 30
SIZE_BIN_WIDTH = 0.5
SIZE_BINS = int(SIZE_RANGE / SIZE_BIN_WIDTH)  # 14
TOP_DECILE = 0.10


@dataclass
class StatsRow:
    n_dialogues: int = 0
    avg_tokens_per_utterance: float = 0.0
    avg_turns_per_dialogue: float = 0.0
    success_rate: float = 0.0
    unique_tokens: int = 0
    top_decile_occupancy: float = 0.0


@dataclass
class CorpusStats:
    overall: StatsRow
    per_k: dict[int, StatsRow]

    def to_dict(self) -> dict:
        return {
            "overall": asdict(self.overall),
            "per_k": {str(k): asdict(v) for k, v in sorted(self.per_k.items())},
        }


def _stats_row(transcripts) -> StatsRow:
    n = len(transcripts)
    if n == 0:
        return StatsRow()
    counts: dict[str, int] = {}
    n_utts = 0
    n_toks = 0
    n_success = 0
    for t in transcripts:
        if t.outcome.status == engine.STATUS_SUCCESS:
            n_success += 1
        for ev in messages_of(t):
            toks = tokenize(ev.kind.text)
            n_utts += 1
            n_toks += len(toks)
            for tok in toks:
                counts[tok] = counts.get(tok, 0) + 1
    top = sorted(counts.values(), reverse=True)
    n_top = max(1, int(round(TOP_DECILE * len(top)))) if top else 0
    occupancy = sum(top[:n_top]) / n_toks if n_toks else 0.0
    return StatsRow(
        n_dialogues=n,
        avg_tokens_per_utterance=n_toks / n_utts if n_utts else 0.0,
        avg_turns_per_dialogue=n_utts / n,
        success_rate=n_success / n,
        unique_tokens=len(counts),
        top_decile_occupancy=occupancy,
    )


def basic_stats(transcripts) -> CorpusStats:
    """Dialogue counts, utterance/turn lengths, success rates and lexical
    statistics, overall and per shared count. A turn is one chat message."""
    per_k: dict[int, StatsRow] = {}
    for k in sorted({t.num_shared for t in transcripts}):
        per_k[k] = _stats_row([t for t in transcripts if t.num_shared == k])
    return CorpusStats(overall=_stats_row(list(transcripts)), per_k=per_k)


# ---------------------------------------------------------------------------
# Nuanced expressions


def load_nuance_dictionaries(directory=None) -> dict[str, list[str]]:
    """Keyword dictionaries by category. Reads the shipped JSON files under
    ``data/nuance`` unless a directory of same-shaped files is given."""
    out: dict[str, list[str]] = {}
    if directory is None:
        root = resources.files("ocref").joinpath("data/nuance")
        paths = sorted(root.iterdir(), key=lambda p: p.name)
    else:
        from pathlib import Path

        paths = sorted(Path(directory).glob("*.json"))
    for p in paths:
        with p.open() if hasattr(p, "open") else open(p) as f:
            d = json.load(f)
        keywords = list(d["keywords"])
        if len(set(keywords)) != len(keywords):
            raise ValueError(f"duplicate keywords in {d['category']}")
        out[d["category"]] = keywords
    return out


def _count_keyword(tokens: list[str], keyword_tokens: list[str]) -> int:
    k = len(keyword_tokens)
    if k == 1:
        return tokens.count(keyword_tokens[0])
    hits = 0
    i = 0
    while i + k <= len(tokens):
        if tokens[i:i + k] == keyword_tokens:
            hits += 1
            i += k
        else:
            i += 1
    return hits


def nuance_counts(transcripts, dictionaries=None) -> dict[str, float]:
    """Occurrences of nuanced expressions per 100 utterances, by category.

    Matching is token-exact after tokenization; multiword keywords match as
    contiguous token runs."""
    if dictionaries is None:
        dictionaries = load_nuance_dictionaries()
    tokenized_dicts = {
        cat: [tokenize(kw) for kw in kws] for cat, kws in dictionaries.items()
    }
    totals = {cat: 0 for cat in dictionaries}
    n_utts = 0
    for t in transcripts:
        for ev in messages_of(t):
            toks = tokenize(ev.kind.text)
            n_utts += 1
            for cat, kws in tokenized_dicts.items():
                totals[cat] += sum(_count_keyword(toks, kw) for kw in kws)
    if n_utts == 0:
        return {cat: 0.0 for cat in dictionaries}
    return {cat: 100.0 * totals[cat] / n_utts for cat in dictionaries}


# ---------------------------------------------------------------------------
# Selection bias


@dataclass
class SelectionBias:
    """Where selections land relative to what was visible.

    Bin probabilities are per-bin selection rates (selections in a bin over
    visible-dot occurrences in that bin), normalized to sum to one. Shares
    compare the selected dot against the median of the selector's 7 visible
    dots; exact ties count toward neither side."""

    color_bin_probs: list[float] = field(default_factory=lambda: [0.0] * COLOR_BINS)
    size_bin_probs: list[float] = field(default_factory=lambda: [0.0] * SIZE_BINS)
    darker_share: float = 0.0
    larger_share: float = 0.0
    n_selections: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _bin_index(value: float, lo: float, hi: float, bins: int) -> int:
    idx = int((value - lo) / (hi - lo) * bins)
    return min(max(idx, 0), bins - 1)


def selection_bias(transcripts) -> SelectionBias:
    sel_color = np.zeros(COLOR_BINS)
    vis_color = np.zeros(COLOR_BINS)
    sel_size = np.zeros(SIZE_BINS)
    vis_size = np.zeros(SIZE_BINS)
    darker = lighter = larger = smaller = 0
    n_sel = 0

    for t in transcripts:
        by_id = {e.id: e for e in t.world.entities}
        for agent in (0, 1):
            sel = t.outcome.selections[agent]
            if sel is None:
                continue
            n_sel += 1
            visible = [by_id[i] for i in t.world.views[agent].visible_ids]
            chosen = by_id[sel]
            colors = np.array([e.color for e in visible])
            sizes = np.array([e.size for e in visible])
            med_color = float(np.median(colors))
            med_size = float(np.median(sizes))
            if chosen.color < med_color:
                darker += 1
            elif chosen.color > med_color:
                lighter += 1
            if chosen.size > med_size:
                larger += 1
            elif chosen.size < med_size:
                smaller += 1
            sel_color[_bin_index(chosen.color, COLOR_MIN, COLOR_MAX, COLOR_BINS)] += 1
            sel_size[_bin_index(chosen.size, SIZE_MIN, SIZE_MIN + SIZE_RANGE, SIZE_BINS)] += 1
            for e in visible:
                vis_color[_bin_index(e.color, COLOR_MIN, COLOR_MAX, COLOR_BINS)] += 1
                vis_size[_bin_index(e.size, SIZE_MIN, SIZE_MIN + SIZE_RANGE, SIZE_BINS)] += 1

    def normalized_rates(sel, vis):
        rates = np.divide(sel, vis, out=np.zeros_like(sel), where=vis > 0)
        total = rates.sum()
        return list(rates / total) if total > 0 else [0.0] * len(rates)

    return SelectionBias(
        color_bin_probs=normalized_rates(sel_color, vis_color),
        size_bin_probs=normalized_rates(sel_size, vis_size),
        darker_share=darker / (darker + lighter) if darker + lighter else 0.0,
        larger_share=larger / (larger + smaller) if larger + smaller else 0.0,
        n_selections=n_sel,
    )


# ---------------------------------------------------------------------------
# Reports and plots


def build_report(transcripts, dictionaries=None) -> dict:
    return {
        "stats": basic_stats(transcripts).to_dict(),
        "nuance_per_100_utterances": nuance_counts(transcripts, dictionaries),
        "selection_bias": selection_bias(transcripts).to_dict(),
    }


def render_plots(bias: SelectionBias, outdir) -> list[str]:
    """Bar charts of the per-bin selection probabilities as static files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    specs = [
        ("selection_by_color.png", bias.color_bin_probs,
         "color bin (dark to light)", "selection probability"),
        ("selection_by_size.png", bias.size_bin_probs,
         "size bin (small to large)", "selection probability"),
    ]
    for name, probs, xlabel, ylabel in specs:
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.bar(range(len(probs)), probs, color="#555555")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        path = outdir / name
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(str(path))
    return written
