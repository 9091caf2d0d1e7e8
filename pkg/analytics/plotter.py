from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def _fig1(ax, frame: pd.DataFrame) -> None:
    for mu, group in frame.groupby("mu"):
        centers = 0.5 * (group["bin_lo"] + group["bin_hi"])
        width = float((group["bin_hi"] - group["bin_lo"]).iloc[0])
        ax.bar(centers, group["fraction"], width=width, alpha=0.5, label=f"mu={mu:g}")
    ax.set_xlabel("alpha")
    ax.set_ylabel("fraction of grid points")
    ax.set_title("Gate distribution")
    ax.legend()


def _fig2(ax, frame: pd.DataFrame) -> None:
    ax.plot(frame["mu"], frame["mre"], marker="o", color="tab:blue")
    inside = frame[frame["in_range"].astype(bool)]
    if not inside.empty:
        lo, hi = inside["mu"].min(), inside["mu"].max()
        ax.axvspan(lo, hi, color="tab:green", alpha=0.15)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mu")
    ax.set_ylabel("MRE")
    ax.set_title("Parameter generalization")


def _fig3(ax, frame: pd.DataFrame) -> None:
    ax.bar(frame["stage"], frame["seconds"], color="tab:orange")
    ax.set_ylabel("seconds")
    ax.set_title("Cost per stage")


def _fig4(ax, frame: pd.DataFrame) -> None:
    for _, row in frame.iterrows():
        ax.scatter(row["runtime_s"], row["mre"])
        ax.annotate(row["method"], (row["runtime_s"], row["mre"]))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("runtime [s]")
    ax.set_ylabel("MRE")
    ax.set_title("Accuracy vs cost")


DRAWERS = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig4": _fig4}


def render_figure(tag: str, frame: pd.DataFrame, path: Path) -> Path:
    fig, ax = plt.subplots()
    DRAWERS[tag](ax, frame)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
