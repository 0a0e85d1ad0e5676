"""MAE-vs-SNR line plots rendered from the result CSV."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import read_rows  # noqa: E402


def plot_csv(csv_path, out_path) -> None:
    """One colour per (estimator, mask count); solid elevation, dashed azimuth.

    Output depends only on the CSV contents, so regenerating is byte-stable.
    """
    rows = read_rows(csv_path)
    curves: dict[tuple[str, int], list[dict]] = {}
    for r in rows:
        curves.setdefault((r["estimator"], r["num_masks"]), []).append(r)
    with plt.rc_context({"svg.hashsalt": "cdoa", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for i, ((est, m), pts) in enumerate(sorted(curves.items())):
            pts = sorted(pts, key=lambda r: r["snr_db"])
            snr = [r["snr_db"] for r in pts]
            c = colors[i % len(colors)]
            ax.plot(snr, [r["mae_theta"] for r in pts], "-o", color=c, ms=3,
                    label=f"{est} M={m} elevation")
            ax.plot(snr, [r["mae_phi"] for r in pts], "--s", color=c, ms=3,
                    label=f"{est} M={m} azimuth")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("MAE (deg)")
        ax.set_yscale("log")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=6, ncol=2)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
