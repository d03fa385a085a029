#!/usr/bin/env python3
"""Rasterize the built-in 8x16 glyph atlas (printable ASCII + Latin-1) from DejaVu Sans Mono.

Writes the atlas text format consumed by pixeluq::load_atlas. Run once; the output is checked in.
"""
import argparse

from PIL import Image, ImageDraw, ImageFont

GLYPH_W, GLYPH_H = 8, 16
SUPERSAMPLE = 4


def rasterize(font, ch):
    big = Image.new("L", (GLYPH_W * SUPERSAMPLE, GLYPH_H * SUPERSAMPLE), 0)
    draw = ImageDraw.Draw(big)
    draw.text((0, SUPERSAMPLE), ch, fill=255, font=font)
    small = big.resize((GLYPH_W, GLYPH_H), Image.BOX)
    return [["#" if small.getpixel((x, y)) >= 100 else "." for x in range(GLYPH_W)] for y in range(GLYPH_H)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--font", default="/usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    font = ImageFont.truetype(args.font, 13 * SUPERSAMPLE)
    codepoints = list(range(0x20, 0x7F)) + list(range(0xA0, 0x100))
    with open(args.out, "w", encoding="ascii") as f:
        f.write(f"ATLAS {GLYPH_W} {GLYPH_H}\n")
        for cp in codepoints:
            f.write(f"GLYPH {cp}\n")
            for row in rasterize(font, chr(cp)):
                f.write("".join(row) + "\n")


if __name__ == "__main__":
    main()
