"""Check records, deterministic CSV/JSON emission, and figure rendering.

Reports are written so that equal configurations produce byte-identical
files: floats are printed with 17 significant digits (shortest
round-trippable width), dict order is fixed, and volatile data such as wall
clock go to a separate run-meta file that is excluded from determinism
comparisons.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "CheckResult",
    "format_float",
    "write_checks_csv",
    "write_report_json",
    "write_run_meta",
    "save_curve_figure",
    "save_hist_figure",
    "save_ecdf_figure",
    "save_loglog_fit_figure",
    "save_bar_figure",
]


def format_float(x) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one verification check.

    ``provenance`` names the formula or oracle behind the target value.
    Report-only checks set gated=False; their pass flag is informational.
    """

    name: str
    value: float
    target: float
    tol: float
    gated: bool
    passed: bool
    provenance: str = ""
    detail: dict = field(default_factory=dict)


def check_abs(name, value, target, tol, provenance="", gated=True, detail=None) -> CheckResult:
    """Gate |value - target| <= tol."""
    return CheckResult(
        name=name, value=float(value), target=float(target), tol=float(tol),
        gated=gated, passed=bool(abs(value - target) <= tol),
        provenance=provenance, detail=detail or {},
    )


def check_rel(name, value, target, rel_tol, provenance="", gated=True, detail=None) -> CheckResult:
    """Gate |value - target| <= rel_tol |target|."""
    return CheckResult(
        name=name, value=float(value), target=float(target),
        tol=float(rel_tol * abs(target)), gated=gated,
        passed=bool(abs(value - target) <= rel_tol * abs(target)),
        provenance=provenance, detail=detail or {},
    )


def check_below(name, value, bound, provenance="", gated=True, detail=None) -> CheckResult:
    """Gate value <= bound (e.g. a KS distance against its critical value)."""
    return CheckResult(
        name=name, value=float(value), target=float(bound), tol=0.0,
        gated=gated, passed=bool(value <= bound), provenance=provenance,
        detail=detail or {},
    )


def write_checks_csv(path, checks):
    """One CSV row per check with a header row."""
    with open(path, "w") as fh:
        fh.write("name,value,target,tol,gated,pass,provenance\n")
        for c in checks:
            prov = c.provenance.replace(",", ";")
            fh.write(
                f"{c.name},{format_float(c.value)},{format_float(c.target)},"
                f"{format_float(c.tol)},{int(c.gated)},{int(c.passed)},{prov}\n"
            )


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


def write_report_json(path, suite, seed, checks):
    """Deterministic JSON report; floats carry 17 significant digits."""
    payload = {
        "suite": suite,
        "seed": seed,
        "checks": [
            {
                "name": c.name,
                "value": float(format_float(c.value)),
                "target": float(format_float(c.target)),
                "tol": float(format_float(c.tol)),
                "gated": c.gated,
                "pass": c.passed,
                "provenance": c.provenance,
            }
            for c in checks
        ],
        "all_gated_pass": all(c.passed for c in checks if c.gated),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return payload


def write_run_meta(path, runtime_s, workers=1):
    """Volatile run facts (wall clock); kept out of the deterministic report."""
    with open(path, "w") as fh:
        json.dump({"runtime_s": runtime_s, "workers": workers}, fh)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Figures: every suite may render plot files next to its delimited output
# ---------------------------------------------------------------------------


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return os.fspath(path)


def save_curve_figure(path, x, ys, labels, xlabel, ylabel, title, logx=False, logy=False,
                      hlines=()):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for y, lab in zip(ys, labels):
        ax.plot(x, y, marker="o", ms=3, lw=1.2, label=lab)
    for yv, lab in hlines:
        ax.axhline(yv, color="k", ls="--", lw=0.8, label=lab)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def save_hist_figure(path, values, bins, xlabel, title, vlines=(), logx=False):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(values, bins=bins, color="steelblue", alpha=0.8)
    for xv, lab in vlines:
        ax.axvline(xv, color="crimson", ls="--", lw=1.0, label=lab)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.set_title(title)
    if vlines:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def save_ecdf_figure(path, samples, labels, xlabel, title):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for s, lab in zip(samples, labels):
        s = np.sort(np.asarray(s))
        ax.step(s, np.arange(1, s.size + 1) / s.size, where="post", lw=1.0, label=lab)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("empirical CDF")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def save_loglog_fit_figure(path, eps, counts, slope, title):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    x = np.log(1.0 / np.asarray(eps))
    y = np.log(np.asarray(counts))
    ax.plot(x, y, "o", label="occupied cells")
    coef = np.polyfit(x, y, 1)
    ax.plot(x, np.polyval(coef, x), "-", lw=1.0, label=f"slope {slope:.2f}")
    ax.set_xlabel("log 1/eps")
    ax.set_ylabel("log N(eps)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def save_bar_figure(path, labels, values, ylabel, title, hline=None):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(range(len(values)), values, color="steelblue", alpha=0.85)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    if hline is not None:
        ax.axhline(hline[0], color="crimson", ls="--", lw=1.0, label=hline[1])
        ax.legend(fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3, axis="y")
    return _finish(fig, path)
