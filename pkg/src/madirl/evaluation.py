"""Score normalization, reward correlation, parameter accounting, reporting.

The normalized score places a run between the random-action baseline (0) and
the expert demonstrations (1), per agent, then averages over agents; it is
deliberately unclamped. Reported aggregates over seeds use Student-t 95%
confidence intervals.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateBaselineError, ShapeError

_DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class ScoreTriple:
    """Per-agent scores of the evaluated run, the expert demonstrations, and
    the uniform-random baseline (all in episode-score units)."""

    score_a: np.ndarray
    score_e: np.ndarray
    score_r: np.ndarray

    def __post_init__(self):
        a, e, r = (np.asarray(x, dtype=np.float64) for x in
                   (self.score_a, self.score_e, self.score_r))
        if not (a.shape == e.shape == r.shape) or a.ndim != 1:
            raise ShapeError(f"score vectors must share one shape, got "
                             f"{a.shape}, {e.shape}, {r.shape}")
        object.__setattr__(self, "score_a", a)
        object.__setattr__(self, "score_e", e)
        object.__setattr__(self, "score_r", r)


def nss(triple: ScoreTriple):
    """Mean over agents of (score_a - score_r) / (score_e - score_r)."""
    denom = triple.score_e - triple.score_r
    if np.any(np.abs(denom) < _DENOM_FLOOR):
        raise DegenerateBaselineError(
            "expert and random baseline scores coincide for at least one agent")
    return float(np.mean((triple.score_a - triple.score_r) / denom))


def pcc(x, y):
    """Sample Pearson correlation of two equal-length sequences."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"pcc expects two equal-length vectors, got {x.shape}, {y.shape}")
    if x.size < 2:
        raise ConfigError("pcc needs at least two samples")
    xd = x - x.mean()
    yd = y - y.mean()
    vx = float(np.dot(xd, xd))
    vy = float(np.dot(yd, yd))
    if vx <= 0.0 or vy <= 0.0:
        raise ConfigError("pcc undefined for zero-variance input")
    return float(np.dot(xd, yd) / np.sqrt(vx * vy))


@dataclass(frozen=True)
class ParamReport:
    """Exact trainable-parameter counts grouped by component."""

    counts: dict
    n_agents: int

    @property
    def total(self):
        return int(sum(self.counts.values()))


def count_params(named_shapes, n_agents=0):
    """Count parameters from ``name -> shape`` (or ``name -> ndarray``),
    grouped by the name's leading path component (``policy/3/...`` counts
    toward ``policy``). Shared parameters appear once by construction: one
    name, one storage location."""
    counts = {}
    for name, shape in named_shapes.items():
        if hasattr(shape, "shape"):
            shape = shape.shape
        size = int(np.prod(shape, dtype=np.int64)) if len(shape) else 1
        group = name.split("/", 1)[0]
        counts[group] = counts.get(group, 0) + size
    return ParamReport(counts=counts, n_agents=n_agents)


def _t_critical(df, confidence=0.95):
    from scipy import stats

    return float(stats.t.ppf(0.5 + confidence / 2.0, df))


def mean_ci(values, confidence=0.95):
    """(mean, half-width of the Student-t confidence interval). A single
    value has no interval; its half-width is reported as None."""
    v = np.asarray(values, dtype=np.float64)
    m = float(v.mean())
    if v.size < 2:
        return m, None
    sem = float(v.std(ddof=1) / np.sqrt(v.size))
    return m, _t_critical(v.size - 1, confidence) * sem


def _final_window_mean(rows, key, window=5):
    vals = [r[key] for r in rows if r.get(key) is not None]
    if not vals:
        return None
    return float(np.mean(vals[-window:]))


def load_run(run_dir):
    """Read one run directory: resolved config, run record, metrics rows."""
    run_dir = Path(run_dir)
    record = json.loads((run_dir / "run_record.json").read_text())
    config = json.loads((run_dir / "config.resolved.json").read_text())
    rows = []
    metrics_path = run_dir / "metrics.csv"
    if metrics_path.exists():
        with open(metrics_path, newline="") as f:
            for raw in csv.DictReader(f):
                row = {}
                for k, v in raw.items():
                    if v == "":
                        row[k] = None
                    elif k == "episode":
                        row[k] = int(v)
                    else:
                        row[k] = float(v)
                rows.append(row)
    return {"dir": str(run_dir), "record": record, "config": config, "rows": rows}


def report(run_dirs, out_dir, window=5):
    """Summarize completed runs into ``summary.csv`` and ``summary.json``.

    Runs are grouped by (env, algorithm, discriminator, demo count); for each
    group the final-window normalized score is averaged over seeds with a 95%
    confidence interval. When a ``ma-gail`` group exists for the same
    (env, demo count), other groups also get their raw final-score difference
    against it. Incomplete run directories are skipped with a warning entry.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs, warnings = [], []
    for d in run_dirs:
        try:
            runs.append(load_run(d))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            warnings.append(f"skipped {d}: {e}")

    groups = {}
    for run in runs:
        cfg = run["config"]
        key = (cfg.get("env"), cfg.get("algorithm"), cfg.get("disc_variant") or "-",
               str(cfg.get("demo_count") or "-"))
        groups.setdefault(key, []).append(run)

    def _final_scores(run):
        rows = run["rows"]
        cols = [k for k in (rows[-1] if rows else {}) if k.startswith("score_agent_")]
        if not rows or not cols:
            return None
        return float(np.mean([_final_window_mean(rows, c, window) for c in cols]))

    summary = []
    for key, members in sorted(groups.items()):
        env, algo, disc, demos = key
        finals = [v for v in (_final_window_mean(r["rows"], "nss", window)
                              for r in members) if v is not None]
        scores = [v for v in (_final_scores(r) for r in members) if v is not None]
        entry = {
            "env": env, "algorithm": algo, "discriminator": disc,
            "demo_count": demos, "n_runs": len(members),
            "seeds": sorted(r["config"].get("seed") for r in members),
        }
        if finals:
            m, ci = mean_ci(finals)
            entry["nss_mean"] = m
            entry["nss_ci95"] = ci
        if scores:
            m, ci = mean_ci(scores)
            entry["score_mean"] = m
            entry["score_ci95"] = ci
        pccs = [r["record"].get("pcc") for r in members if r["record"].get("pcc") is not None]
        if pccs:
            entry["pcc_mean"] = float(np.mean(pccs))
        summary.append(entry)

    by_env_demo = {}
    for entry in summary:
        if entry["algorithm"] == "ma-gail" and "score_mean" in entry:
            by_env_demo[(entry["env"], entry["demo_count"])] = entry["score_mean"]
    for entry in summary:
        ref = by_env_demo.get((entry["env"], entry["demo_count"]))
        if ref is not None and entry["algorithm"] != "ma-gail" and "score_mean" in entry:
            entry["score_rel_ma_gail"] = entry["score_mean"] - ref

    observations = []
    for run in runs:
        rec = run["record"]
        if rec.get("pcc") is not None and rec.get("final_nss") is not None:
            observations.append(
                f"run {rec.get('run_id')}: retraining on the exported reward reached "
                f"normalized score {rec['final_nss']:.3f} with learned-vs-logged reward "
                f"correlation {rec['pcc']:.3f}; imitation quality here did not require "
                f"high reward correlation.")

    columns = ["env", "algorithm", "discriminator", "demo_count", "n_runs",
               "nss_mean", "nss_ci95", "score_mean", "score_ci95",
               "score_rel_ma_gail", "pcc_mean"]
    with open(out_dir / "summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for entry in summary:
            writer.writerow([entry.get(c, "") if entry.get(c) is not None else ""
                             for c in columns])
    payload = {"groups": summary, "per_run": [
        {"dir": r["dir"], "record": r["record"]} for r in runs],
        "observations": observations, "warnings": warnings}
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
    return payload
