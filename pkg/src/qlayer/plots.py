"""Deterministic SVG figures from experiment reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import MissingTable  # noqa: E402

PLOT_KINDS = ("convergence", "curvature_tail", "growth")


def _certificate(report: dict, kind: str, mode: str | None = None) -> dict | None:
    for cert in report.get("certificates") or []:
        if cert["kind"] == kind and (mode is None or cert["provenance"].get("mode") == mode):
            return cert
    return None


def _convergence(ax, report):
    sp = report.get("spectral")
    if not sp or not sp.get("table"):
        raise MissingTable("report has no spectral table")
    kappa = report["kappa1"]
    for R in sorted({row["R"] for row in sp["table"]}):
        rows = sorted((r for r in sp["table"] if r["R"] == R), key=lambda r: r["h_base"])
        ax.plot([r["h_base"] for r in rows], [r["lambda1"] for r in rows], "o-", label=f"R = {R:g}")
    ax.axhline(kappa, color="k", ls="--", lw=1, label=r"$\kappa_1$")
    ax.set_xscale("log")
    ax.set_xlabel("base mesh size h")
    ax.set_ylabel(r"$\lambda_1$")


def _curvature_tail(ax, report):
    cert = _certificate(report, "integral_invariant")
    if cert is None or not cert["numbers"].get("radii"):
        raise MissingTable("report has no integral_invariant table")
    nums = cert["numbers"]
    ax.plot(nums["radii"], nums["partial_integrals"], "o-", label="I(r)")
    ax.axhline(nums["limit"], color="k", ls="--", lw=1, label="extrapolated limit")
    ax.set_xlabel("r")
    ax.set_ylabel("I(r)")


def _growth(ax, report):
    found = False
    for mode in ("signed", "absolute"):
        cert = _certificate(report, "mean_curvature_growth", mode)
        if cert is None or not cert["numbers"].get("radii"):
            continue
        found = True
        ax.plot(cert["numbers"]["radii"], cert["numbers"]["growth"], "o-", label=f"G(r), {mode}")
        eps = cert["numbers"]["epsilon"]
    if not found:
        raise MissingTable("report has no mean_curvature_growth table")
    ax.axhline(eps, color="k", ls="--", lw=1, label=r"$\varepsilon$")
    ax.set_xlabel("r")
    ax.set_ylabel("G(r)")


def plot_emit(report: dict, kind: str, path) -> Path:
    """Write the requested figure as SVG; identical reports give identical files."""
    draw = {"convergence": _convergence, "curvature_tail": _curvature_tail, "growth": _growth}.get(kind)
    if draw is None:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    path = Path(path)
    with plt.rc_context({"svg.hashsalt": "qlayer", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        try:
            draw(ax, report)
            ax.legend(fontsize=8)
            ax.set_title(f"{report['config']['surface']}, a = {report['config']['a']:g}", fontsize=10)
            fig.tight_layout()
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
