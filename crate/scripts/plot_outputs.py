#!/usr/bin/env python3
"""Redraw the figures of a `planeq` output directory from its CSV files.

usage: plot_outputs.py OUT_DIR
"""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def draw_boundary(ax, out):
    curves = defaultdict(list)
    for r in rows(out / "boundary.csv"):
        curves[int(r["curve"])].append((float(r["re"]), float(r["im"])))
    for pts in curves.values():
        xs, ys = zip(*(pts + pts[:1]))
        ax.fill(xs, ys, color="#c8d7ec" if not ax.patches else "white", zorder=0)
        ax.plot(xs, ys, "k-", lw=0.8)


def draw_points(ax, path, **kw):
    pts = rows(path)
    ax.plot([float(r["re"]) for r in pts], [float(r["im"]) for r in pts], "k.", **kw)


def draw_trajectories(ax, path):
    paths = defaultdict(list)
    connecting = {}
    for r in rows(path):
        k = int(r["trajectory"])
        paths[k].append((float(r["re"]), float(r["im"])))
        connecting[k] = r["connecting"] == "true"
    for k, pts in paths.items():
        xs, ys = zip(*pts)
        ax.plot(xs, ys, color="#c0392b" if connecting[k] else "#7f8c8d", lw=1.4 if connecting[k] else 0.7)


def contour(path, target):
    data = rows(path)
    xs = sorted({float(r["re"]) for r in data})
    ys = sorted({float(r["im"]) for r in data})
    grid = [[0.0] * len(xs) for _ in ys]
    for i, r in enumerate(data):
        grid[i // len(xs)][i % len(xs)] = float(r["value"])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.contour(xs, ys, grid, levels=30)
    ax.set_aspect("equal")
    fig.savefig(target, dpi=150)
    plt.close(fig)


def main(out):
    out = Path(out)
    if (out / "boundary.csv").exists():
        fig, ax = plt.subplots(figsize=(5, 5))
        draw_boundary(ax, out)
        if (out / "trajectories.csv").exists():
            draw_trajectories(ax, out / "trajectories.csv")
        for name in ("zeros.csv", "fekete.csv"):
            if (out / name).exists():
                draw_points(ax, out / name, ms=3)
        ax.set_aspect("equal")
        fig.savefig(out / "overlay.png", dpi=150)
        plt.close(fig)
    for name in ("potential_zeros", "potential_equilibrium"):
        if (out / f"{name}.csv").exists():
            contour(out / f"{name}.csv", out / f"{name}.png")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    main(sys.argv[1])
