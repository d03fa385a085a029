#!/usr/bin/env python3
"""Dump the 256-entry viridis table as 8-bit "r g b" lines. Run once; the output is checked in."""
import sys

from matplotlib import colormaps

cmap = colormaps["viridis"].resampled(256)
with open(sys.argv[1], "w", encoding="ascii") as f:
    for i in range(256):
        r, g, b, _ = cmap(i)
        f.write(f"{int(round(r * 255))} {int(round(g * 255))} {int(round(b * 255))}\n")
