"""Learning-curve and robustness experiments, CSV output and SVG plots."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .logic import ExampleSet, Program
from .lptext import pretty_clause
from .mil import LearningTimeout
from .rng import Xoshiro256
from .task import CLASS, LearnerSettings, classify, examples_for, learn

BASELINE = 0.5
CURVE_COLUMNS = ["engine", "n", "repeat", "accuracy", "time_ms", "hypothesis", "timed_out"]
PREDICTION_COLUMNS = ["engine", "n", "repeat", "sign_id", "label", "predicted"]
ROBUST_COLUMNS = ["variant", "items", "excluded", "correct", "accuracy"]
VARIANT_ORDER = ("base", "rp2_subtle", "rp2_graffiti", "rp2_art", "advcam")


class InsufficientData(ValueError):
    pass


class MalformedCSV(ValueError):
    pass


@dataclass
class ExperimentConfig:
    engines: Sequence[str] = ("mil", "mdie")
    train_sizes: Sequence[int] = (1, 2, 4, 8)
    repeats: int = 100
    seed: int = 0
    workers: int = 1
    record_time: bool = False  # wall-clock times make the CSV irreproducible
    settings: LearnerSettings = field(default_factory=LearnerSettings)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.train_sizes or min(self.train_sizes) < 1:
            raise ValueError("train sizes must be >= 1")
        for e in self.engines:
            if e not in ("mil", "mdie"):
                raise ValueError(f"unknown engine {e!r}")


@dataclass
class RunResult:
    engine: str
    train_size: int
    repeat_index: int
    accuracy: float
    hypothesis: str
    learn_time: float  # milliseconds
    timed_out: bool = False
    predictions: list = field(default_factory=list)  # (sign_id, label, predicted)


def split(pos_ids, neg_ids, n: int, seed: int):
    """Train n positives and n negatives; everything else is the test set."""
    g = Xoshiro256(seed)
    train_pos = g.sample(pos_ids, n)
    train_neg = g.sample(neg_ids, n)
    taken = set(train_pos) | set(train_neg)
    test = [(i, True) for i in pos_ids if i not in taken] + [(i, False) for i in neg_ids if i not in taken]
    return train_pos, train_neg, test


def run_one(engine: str, bk: Program, pos_ids, neg_ids, n: int, repeat: int, config: ExperimentConfig,
            class_name: str = CLASS) -> RunResult:
    train_pos, train_neg, test = split(pos_ids, neg_ids, n, config.seed + repeat)
    t0 = time.perf_counter()
    try:
        hyp = learn(engine, bk, examples_for(train_pos, train_neg, class_name), config.settings)
    except LearningTimeout:
        ms = (time.perf_counter() - t0) * 1000.0
        return RunResult(engine, n, repeat, BASELINE, "", ms if config.record_time else 0.0, True)
    ms = (time.perf_counter() - t0) * 1000.0
    preds = [(i, label, classify(bk, hyp.clauses, i, class_name, config.settings.depth_bound))
             for i, label in test]
    correct = sum(label == p for _, label, p in preds)
    acc = correct / len(preds) if preds else 0.0
    text = " ".join(pretty_clause(c) for c in hyp.clauses)
    return RunResult(engine, n, repeat, acc, text, ms if config.record_time else 0.0, False, preds)


def _job(args):
    return run_one(*args)


def learning_curve(config: ExperimentConfig, bk: Program, examples: ExampleSet,
                   class_name: str = CLASS) -> list[RunResult]:
    """Every (engine, size, repeat) run, sorted by that key.

    Repeat ``i`` draws its split with seed ``config.seed + i`` for every
    engine and size, so engines see identical training sets and a larger
    size extends the smaller one.
    """
    pos_ids = [str(a.args[0].value) for a in examples.positives]
    neg_ids = [str(a.args[0].value) for a in examples.negatives]
    need = max(config.train_sizes)
    if len(pos_ids) <= need or len(neg_ids) <= need:
        raise InsufficientData(f"need more than {need} examples per class, have "
                               f"{len(pos_ids)} positive and {len(neg_ids)} negative")
    jobs = [(e, bk, pos_ids, neg_ids, n, r, config, class_name)
            for e in config.engines for n in config.train_sizes for r in range(config.repeats)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=8))
    else:
        results = [_job(j) for j in jobs]
    return sorted(results, key=lambda r: (r.engine, r.train_size, r.repeat_index))


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def summarize(results: list[RunResult]) -> dict:
    """(engine, n) -> (mean accuracy, population std, mean time)."""
    groups: dict = {}
    for r in results:
        groups.setdefault((r.engine, r.train_size), []).append(r)
    out = {}
    for key, rs in sorted(groups.items()):
        accs = [r.accuracy for r in rs]
        mean = sum(accs) / len(accs)
        std = math.sqrt(sum((a - mean) ** 2 for a in accs) / len(accs))
        out[key] = (mean, std, sum(r.learn_time for r in rs) / len(rs))
    return out


def curve_csv(results: list[RunResult]) -> str:
    """Per-run rows, then mean and std rows per (engine, n), then the baseline."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for r in results:
        w.writerow([r.engine, r.train_size, r.repeat_index, _fmt(r.accuracy), _fmt(r.learn_time),
                    r.hypothesis, int(r.timed_out)])
    summary = summarize(results)
    for (engine, n), (mean, std, t) in summary.items():
        w.writerow([engine, n, "mean", _fmt(mean), _fmt(t), "", ""])
        w.writerow([engine, n, "std", _fmt(std), "", "", ""])
    for n in sorted({n for _, n in summary}):
        w.writerow(["baseline", n, "mean", _fmt(BASELINE), "", "", ""])
    return buf.getvalue()


def predictions_csv(results: list[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICTION_COLUMNS)
    for r in results:
        for sign_id, label, pred in r.predictions:
            w.writerow([r.engine, r.train_size, r.repeat_index, sign_id, int(label), int(pred)])
    return buf.getvalue()


def recount(predictions_text: str) -> dict:
    """(engine, n, repeat) -> accuracy recomputed from a prediction log."""
    tallies: dict = {}
    for row in csv.DictReader(io.StringIO(predictions_text)):
        key = (row["engine"], int(row["n"]), int(row["repeat"]))
        ok, total = tallies.get(key, (0, 0))
        tallies[key] = (ok + (row["label"] == row["predicted"]), total + 1)
    return {k: ok / total for k, (ok, total) in tallies.items()}


# --------------------------------------------------------------------------
# robustness

@dataclass
class EvalItem:
    sign_id: str
    is_positive: bool
    bk: Program  # facts for this item (plus type facts)
    occlusion: float = 0.0


def robustness_eval(clauses, variants: dict, max_occlusion: Optional[float] = None,
                    class_name: str = CLASS, depth_bound: int = 100) -> list[dict]:
    """Accuracy of ``clauses`` on each variant's items.

    Items whose measured occlusion exceeds ``max_occlusion`` are excluded and
    counted separately.  Variants are reported in canonical order.
    """
    clauses = list(clauses)
    if not clauses:
        raise ValueError("hypothesis must be non-empty")
    rows = []
    order = [v for v in VARIANT_ORDER if v in variants] + sorted(v for v in variants if v not in VARIANT_ORDER)
    for name in order:
        items = variants[name]
        kept = [it for it in items if max_occlusion is None or it.occlusion <= max_occlusion]
        correct = sum(classify(it.bk, clauses, it.sign_id, class_name, depth_bound) == it.is_positive
                      for it in kept)
        rows.append({"variant": name, "items": len(kept), "excluded": len(items) - len(kept),
                     "correct": correct, "accuracy": correct / len(kept) if kept else 0.0})
    return rows


def robustness_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROBUST_COLUMNS)
    for r in rows:
        w.writerow([r["variant"], r["items"], r["excluded"], r["correct"], _fmt(r["accuracy"])])
    return buf.getvalue()


# --------------------------------------------------------------------------
# plotting

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def read_curve_means(text: str) -> dict[str, list[tuple[int, float]]]:
    """engine -> sorted (n, mean accuracy) from a learning-curve CSV."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise MalformedCSV("empty CSV")
    header = rows[0]
    if header[:4] != CURVE_COLUMNS[:4]:
        raise MalformedCSV(f"unexpected header {header!r}")
    series: dict = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 4:
            raise MalformedCSV(f"line {lineno}: too few fields")
        if row[2] != "mean":
            continue
        try:
            series.setdefault(row[0], []).append((int(row[1]), float(row[3])))
        except ValueError as exc:
            raise MalformedCSV(f"line {lineno}: {exc}") from None
    if not series:
        raise MalformedCSV("no summary rows")
    return {k: sorted(v) for k, v in series.items()}


def plot(text: str, width: int = 640, height: int = 400) -> str:
    """SVG line chart of mean accuracy against train size, one line per engine."""
    series = read_curve_means(text)
    if "baseline" not in series:
        sizes = sorted({n for pts in series.values() for n, _ in pts})
        series["baseline"] = [(n, BASELINE) for n in sizes]
    sizes = sorted({n for pts in series.values() for n, _ in pts})
    left, right, top, bottom = 60, 130, 30, 50
    pw, ph = width - left - right, height - top - bottom

    def xpos(n):
        if len(sizes) == 1:
            return left + pw / 2
        return left + pw * sizes.index(n) / (len(sizes) - 1)

    def ypos(a):
        return top + ph * (1 - a)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for k in range(6):
        a = k / 5
        y = ypos(a)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{a:.1f}</text>')
    for n in sizes:
        x = xpos(n)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{n}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" font-size="12" text-anchor="middle">'
               'training examples per class</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.2f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.2f})">mean accuracy</text>')
    names = sorted(k for k in series if k != "baseline") + ["baseline"]
    for i, name in enumerate(names):
        pts = " ".join(f"{xpos(n):.2f},{ypos(a):.2f}" for n, a in series[name])
        color = "#7f7f7f" if name == "baseline" else _COLORS[i % len(_COLORS)]
        dash = ' stroke-dasharray="6,4"' if name == "baseline" else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{pts}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}" font-size="11">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
