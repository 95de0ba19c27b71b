#!/usr/bin/env python3
"""Convert the LINQS Cora release (cora.content, cora.cites) to the graphcal
dataset directory layout.

    python3 scripts/linqs_to_graphcal.py path/to/cora data/cora

Node ids follow the row order of cora.content; class ids follow the sorted
class names. No masks.csv is written, so graphcal draws a seeded
20-per-class / 500 / 1000 split unless one is supplied.
"""

import argparse
import pathlib
import sys


def convert(src: pathlib.Path, dst: pathlib.Path) -> None:
    rows = [line.split() for line in (src / "cora.content").read_text().splitlines() if line.strip()]
    ids = {row[0]: i for i, row in enumerate(rows)}
    classes = {name: c for c, name in enumerate(sorted({row[-1] for row in rows}))}

    dst.mkdir(parents=True, exist_ok=True)
    with open(dst / "features.csv", "w") as f:
        for i, row in enumerate(rows):
            f.write(",".join([str(i)] + row[1:-1]) + "\n")
    with open(dst / "labels.csv", "w") as f:
        for i, row in enumerate(rows):
            f.write(f"{i},{classes[row[-1]]}\n")

    skipped = 0
    with open(dst / "edges.txt", "w") as f:
        for line in (src / "cora.cites").read_text().splitlines():
            parts = line.split()
            if len(parts) != 2:
                continue
            a, b = parts
            if a not in ids or b not in ids:
                skipped += 1
                continue
            f.write(f"{ids[a]} {ids[b]}\n")
    print(f"{len(rows)} nodes, {len(classes)} classes, {skipped} citations to unknown papers skipped")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", type=pathlib.Path, help="directory holding cora.content and cora.cites")
    parser.add_argument("dest", type=pathlib.Path, help="output dataset directory")
    args = parser.parse_args()
    convert(args.source, args.dest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
