"""Plot a run directory written by ``attsync simulate``.

    python scripts/plot_run.py runs/sec6-kinematic [--out fig.png]

Top: per-agent attitude error |R_i|_I relative to agent 1.  Middle: angular
velocity components.  Bottom: Lyapunov function and synchronization error
on a log scale.
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from attsync.scenario import read_diagnostics_csv, read_states_csv
from attsync.so3 import attitude_error


def main():
    p = argparse.ArgumentParser()
    p.add_argument("run", type=Path)
    p.add_argument("--out", type=Path, help="image path (default <run>/trajectory.png)")
    args = p.parse_args()

    t, R, w = read_states_csv(args.run / "states.csv")
    d = read_diagnostics_csv(args.run / "diagnostics.csv")
    rel = attitude_error(R @ np.swapaxes(R[:, :1], -1, -2))  # R_i R_1^T

    fig, ax = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    for i in range(R.shape[1]):
        ax[0].plot(t, rel[:, i], lw=1, label=f"{i + 1}")
    ax[0].set_ylabel("|R_i R_1^T|_I")
    ax[0].legend(ncol=4, fontsize=7)
    for i in range(w.shape[1]):
        for c, style in enumerate(["-", "--", ":"]):
            ax[1].plot(t, w[:, i, c], style, lw=0.8, color=f"C{i}")
    ax[1].set_ylabel("w_i (rad/s), x - / y -- / z :")
    for key, label in [("V", "Lyapunov function"), ("sync_error", "sync error")]:
        y = np.where(d[key] > 0, d[key], np.nan)  # V reaches roundoff and can dip below zero
        ax[2].semilogy(t, y, label=label)
    ax[2].set_xlabel("t (s)")
    ax[2].legend()
    fig.tight_layout()
    out = args.out or args.run / "trajectory.png"
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
