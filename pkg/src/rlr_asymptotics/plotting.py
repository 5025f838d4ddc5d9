"""Static SVG charts of a sweep: theory curves with empirical error bars."""
from __future__ import annotations

import math
from pathlib import Path

METRICS = [
    ("alpha", "th_alpha", "emp_alpha_mean", "emp_alpha_se", "correlation"),
    ("sigma2", "th_sigma2", "emp_sigma2_mean", "emp_sigma2_se", "variance"),
    ("mse", "th_mse_raw", "emp_mse_mean", "emp_mse_se", "mean-squared error"),
    ("e1", "th_e1", "emp_e1_mean", "emp_e1_se", "false alarm rate"),
    ("e2", "th_e2", "emp_e2_mean", "emp_e2_se", "misdetection rate"),
]


def _num(x):
    return math.nan if x is None else float(x)


def write_svgs(rows, stem) -> list[Path]:
    """One SVG per metric next to ``stem``; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "rlr"
    stem = Path(stem)
    written = []
    deltas = sorted({r.delta for r in rows})
    for key, th_col, mean_col, se_col, label in METRICS:
        vals = [r.values() for r in rows]
        if all(v.get(th_col) is None for v in vals):
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for d in deltas:
            sel = sorted((v for v in vals if v["delta"] == d), key=lambda v: v["lambda"])
            lam = [v["lambda"] for v in sel]
            line, = ax.plot(lam, [_num(v.get(th_col)) for v in sel], "--", label=f"delta={d:g}")
            if any(v.get(mean_col) is not None for v in sel):
                ax.errorbar(
                    lam, [_num(v.get(mean_col)) for v in sel], yerr=[_num(v.get(se_col)) for v in sel],
                    fmt="o", ms=3, color=line.get_color(), capsize=2,
                )
        ax.set_xlabel("lambda")
        ax.set_ylabel(label)
        ax.legend(frameon=False)
        fig.tight_layout()
        path = stem.with_name(f"{stem.stem}_{key}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
