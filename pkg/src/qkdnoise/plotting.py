"""Matplotlib rendering of sweep results, saved next to their CSV output."""

from __future__ import annotations

import math

import matplotlib.pyplot as plt

from .analysis import STATUS_CV_SECURE, STATUS_NO_RATE, STATUS_OK, CurveResult


def _ok_points(result: CurveResult, x_col: str, y_col: str) -> tuple[list, list]:
    xi = result.columns.index(x_col)
    yi = result.columns.index(y_col)
    si = result.columns.index("status")
    pairs = [(r[xi], r[yi]) for r in result.rows if r[si] == STATUS_OK and math.isfinite(r[yi])]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_threshold_figure(result: CurveResult, path: str) -> None:
    """Log-log tolerable-noise curve; non-finite and non-ok points are dropped."""
    fig, ax = _new_axes()
    xs, ys = _ok_points(result, "t", "mu_max")
    ax.loglog(xs, ys, marker=".", lw=1.2, color="tab:red")
    ax.set_xlabel("channel transmittance T")
    ax.set_ylabel("maximum tolerable noise photons per pulse")
    _save(fig, path)


def save_ratio_figure(result: CurveResult, path: str) -> None:
    """CV/DV threshold ratio against transmittance with the break-even line."""
    fig, ax = _new_axes()
    xs, ys = _ok_points(result, "t", "ratio")
    ax.loglog(xs, ys, marker=".", lw=1.2, color="tab:blue")
    ax.axhline(1.0, color="0.4", lw=0.8, ls="--")
    ax.set_xlabel("channel transmittance T")
    ax.set_ylabel(r"$\mu_{\max}^{CV} / \mu_{\max}^{DV}$")
    _save(fig, path)


def save_key_rate_figure(results: dict[str, CurveResult], path: str) -> None:
    """Key-rate curves K(T), one labelled line per noise level."""
    fig, ax = _new_axes()
    for label, result in results.items():
        xs, ys = _ok_points(result, "t", "key_rate")
        if xs:
            ax.loglog(xs, ys, lw=1.2, label=label)
    ax.set_xlabel("channel transmittance T")
    ax.set_ylabel("key rate (bits per pulse)")
    if results:
        ax.legend(fontsize=8)
    _save(fig, path)


def save_min_p_figure(result: CurveResult, path: str) -> None:
    """Minimum source quality against transmittance."""
    fig, ax = _new_axes()
    xs, ys = _ok_points(result, "t", "min_p")
    ax.semilogx(xs, ys, marker=".", lw=1.2, color="tab:green")
    ax.set_xlabel("channel transmittance T")
    ax.set_ylabel("minimum non-empty-pulse probability p")
    ax.set_ylim(0.0, 1.05)
    _save(fig, path)


def save_min_squeezing_figure(result: CurveResult, path: str) -> None:
    """Required signal variance against transmittance (lower means more squeezing)."""
    fig, ax = _new_axes()
    xs, ys = _ok_points(result, "t", "min_vs")
    ax.loglog(xs, ys, marker=".", lw=1.2, color="tab:purple")
    ax.set_xlabel("channel transmittance T")
    ax.set_ylabel("required signal variance $v_s$ (SNU)")
    _save(fig, path)


def save_region_figure(result: CurveResult, path: str) -> None:
    """Scatter of the (T, mu) requirement map: p where solvable, markers elsewhere."""
    fig, ax = _new_axes()
    ti = result.columns.index("t")
    mi = result.columns.index("mu")
    pi = result.columns.index("min_p")
    si = result.columns.index("status")
    ok = [r for r in result.rows if r[si] == STATUS_OK]
    secure = [r for r in result.rows if r[si] == STATUS_CV_SECURE]
    no_go = [r for r in result.rows if r[si] == STATUS_NO_RATE]
    if ok:
        sc = ax.scatter(
            [r[ti] for r in ok], [r[mi] for r in ok], c=[r[pi] for r in ok],
            cmap="viridis", vmin=0.0, vmax=1.0, s=22, marker="s",
        )
        fig.colorbar(sc, ax=ax, label="minimum source p")
    if secure:
        ax.scatter([r[ti] for r in secure], [r[mi] for r in secure],
                   color="0.85", s=22, marker="s", label="CV still secure")
    if no_go:
        ax.scatter([r[ti] for r in no_go], [r[mi] for r in no_go],
                   color="white", edgecolors="0.6", s=22, marker="s", label="no key at p = 1")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("channel transmittance T")
    ax.set_ylabel("mean noise photons per pulse")
    if secure or no_go:
        ax.legend(fontsize=8, loc="upper left")
    _save(fig, path)


def save_dark_count_figure(result: CurveResult, path: str) -> None:
    """Dark-count transmittance thresholds with their fitted upper bounds."""
    fig, ax = _new_axes()
    xs, ys = _ok_points(result, "d_over_eta", "t_th")
    bx, by = _ok_points(result, "d_over_eta", "bound")
    ax.loglog(xs, ys, marker="o", lw=1.2, color="tab:red", label="computed $T_{th}$")
    ax.loglog(bx, by, marker="", lw=1.0, ls="--", color="0.4", label="upper bound")
    ax.set_xlabel(r"$d/\eta$")
    ax.set_ylabel("threshold transmittance")
    ax.legend(fontsize=8)
    _save(fig, path)
