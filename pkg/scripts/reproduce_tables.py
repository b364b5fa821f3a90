"""Regenerate every preset error table as CSV files.

    python3 scripts/reproduce_tables.py --out results/ [--paper-scale] [--only tab3,tab4]
"""
import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fraccn.cli import PRESETS, main, preset_argv


@dataclass
class ReproConfig:
    out_dir: Path = Path("results")
    presets: tuple = field(default_factory=lambda: tuple(sorted(PRESETS)))
    paper_scale: bool = False
    mesh: Optional[int] = None


def reproduce(cfg: ReproConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name in cfg.presets:
        path = cfg.out_dir / f"{name}.csv"
        start = time.perf_counter()
        code = main(preset_argv(name, mesh=cfg.mesh, paper_scale=cfg.paper_scale, out=str(path)))
        print(f"{name}: exit {code}, {time.perf_counter() - start:.1f}s -> {path}", flush=True)
        worst = max(worst, code)
    return worst


def parse(argv=None) -> ReproConfig:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--only", help="comma-separated preset names")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--mesh", type=int)
    a = p.parse_args(argv)
    presets = tuple(a.only.split(",")) if a.only else tuple(sorted(PRESETS))
    unknown = set(presets) - set(PRESETS)
    if unknown:
        p.error(f"unknown presets {sorted(unknown)}")
    return ReproConfig(a.out, presets, a.paper_scale, a.mesh)


if __name__ == "__main__":
    sys.exit(reproduce(parse()))
