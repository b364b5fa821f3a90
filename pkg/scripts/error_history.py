"""Error against time for the uncorrected and corrected schemes on nonsmooth data.

Writes a CSV with columns t, uncorrected, corrected2 and optionally a log-log
plot if matplotlib is available.

    python3 scripts/error_history.py --out results/error_history.csv
"""
import argparse
import csv
from dataclasses import dataclass
from pathlib import Path

from fraccn.harness import error_history


@dataclass
class HistoryConfig:
    problem: str = "sq_b"
    alpha: float = 0.5
    final_time: float = 1.0
    n_steps: int = 50
    mesh: int = 32
    refinement: int = 10
    out: Path = Path("results/error_history.csv")
    plot: bool = False


def run(cfg: HistoryConfig) -> dict:
    hist = error_history(cfg.problem, cfg.alpha, cfg.final_time, cfg.n_steps, space_M=cfg.mesh,
                         refinement=cfg.refinement)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    variants = [k for k in hist if k != "t"]
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *variants])
        for i, t in enumerate(hist["t"]):
            w.writerow([f"{t:.12g}", *(f"{hist[v][i]:.12g}" for v in variants)])
    if cfg.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots()
        for v in variants:
            ax.loglog(hist["t"], hist[v], label=v)
        ax.set_xlabel("t")
        ax.set_ylabel("L2 error")
        ax.legend()
        fig.savefig(cfg.out.with_suffix(".png"), dpi=120)
    return hist


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--problem", default="sq_b")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--final-time", type=float, default=1.0)
    p.add_argument("--n-steps", type=int, default=50)
    p.add_argument("--mesh", type=int, default=32)
    p.add_argument("--refinement", type=int, default=10)
    p.add_argument("--out", type=Path, default=Path("results/error_history.csv"))
    p.add_argument("--plot", action="store_true")
    a = p.parse_args()
    run(HistoryConfig(a.problem, a.alpha, a.final_time, a.n_steps, a.mesh, a.refinement, a.out, a.plot))
