#!/usr/bin/env python3
"""Generate a corpus of random ground-truth annotations as TextGrid + JSON,
ready to feed into `singanno simulate`."""

import argparse
from pathlib import Path

from singanno.annotation import save_annotation_json
from singanno.oracle import GeneratorConfig, random_annotation
from singanno.textgrid import annotation_to_textgrid, save_textgrid


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output directory")
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--phones", type=int, default=12, help="phones per utterance")
    parser.add_argument("--tempo", type=float, default=120.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        a = random_annotation(
            GeneratorConfig(
                n_phones=args.phones, tempo=args.tempo, seed=args.seed + i
            )
        )
        save_textgrid(annotation_to_textgrid(a), out / f"utt{i:03d}.TextGrid")
        save_annotation_json(a, out / f"utt{i:03d}.json")
    print(f"wrote {args.count} annotations to {out}")


if __name__ == "__main__":
    main()
