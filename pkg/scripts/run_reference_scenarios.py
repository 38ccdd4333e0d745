"""Run the three eight-satellite reference scenarios and print a summary table.

    python scripts/run_reference_scenarios.py [--out runs] [--plot]

Outputs land in ``<out>/<preset>/`` in the same format as ``attsync simulate``.
"""
import argparse
import subprocess
import sys
import time
from pathlib import Path

from attsync.presets import PRESETS, preset
from attsync.scenario import summarize, write_outputs
from attsync.sim import simulate


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--out", type=Path, default=Path("runs"))
    p.add_argument("--plot", action="store_true", help="also call plot_run.py on each run")
    args = p.parse_args()

    print(f"{'preset':<22} {'t_final':>8} {'sync err':>10} {'max |w|':>10} {'w dev':>10} {'V incr':>6} {'wall':>6}")
    for name in PRESETS:
        cfg, x0 = preset(name)
        t0 = time.perf_counter()
        traj = simulate(cfg, x0)
        s = summarize(traj, time.perf_counter() - t0)
        write_outputs(args.out / name, traj, s)
        print(f"{name:<22} {s['final_time']:>8.1f} {s['terminal_sync_error']:>10.2e} "
              f"{s['terminal_max_omega_norm']:>10.2e} {s['omega_c_max_deviation']:>10.2e} "
              f"{s['lyapunov_violations']:>6d} {s['wall_time_s']:>5.1f}s")
        if args.plot:
            subprocess.run([sys.executable, str(Path(__file__).with_name("plot_run.py")), str(args.out / name)],
                           check=True)


if __name__ == "__main__":
    main()
