"""Command-line entry point: simulate / decode / evaluate / mel / export-midi.

Every command is deterministic given its inputs, config, and seed. The
effective configuration is written into each output directory for
provenance. `STARS_LOG` sets the log level (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import frontend, midi
from .annotation import (
    Annotation,
    FrameSpec,
    load_annotation_json,
    save_annotation_json,
    validate,
)
from .metrics import MetricReport, aggregate_reports, evaluate_pair
from .oracle import OracleConfig, synthesize
from .pipeline import DecodeConfig, Lyric, decode_annotation, load_lyric, save_lyric
from .posterior import read_posterior_grid, write_posterior_grid
from .textgrid import (
    annotation_from_textgrid,
    annotation_to_textgrid,
    load_textgrid,
    save_textgrid,
)

log = logging.getLogger("singanno")


@dataclass
class RunConfig:
    sample_rate: int = 24000
    hop: int = 128
    win: int = 512
    n_mels: int = 80
    note_threshold: float = 0.5
    tech_threshold: float = 0.5
    conpoff_matching: str = "greedy"
    label_smoothing: float = 0.0
    boundary_sharpness: float = 1.0
    boundary_jitter_frames: int = 0
    pitch_confusion: float = 0.0
    technique_flip_prob: float = 0.0
    style_confusion: float = 0.0
    tier_map: dict = field(default_factory=dict)
    seed: int | None = None
    jobs: int = 1
    export_midi: bool = False
    tempo_bpm: float = 120.0

    @property
    def frame_spec(self) -> FrameSpec:
        return FrameSpec(self.sample_rate, self.hop, self.win, self.n_mels)

    def oracle_config(self, seed: int) -> OracleConfig:
        return OracleConfig(
            label_smoothing=self.label_smoothing,
            boundary_sharpness=self.boundary_sharpness,
            boundary_jitter_frames=self.boundary_jitter_frames,
            pitch_confusion=self.pitch_confusion,
            technique_flip_prob=self.technique_flip_prob,
            style_confusion=self.style_confusion,
            seed=seed,
        )

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(
            note_threshold=self.note_threshold,
            tech_threshold=self.tech_threshold,
            conpoff_matching=self.conpoff_matching,
        )


def _load_config(args: argparse.Namespace) -> RunConfig:
    """Precedence: CLI flags > config file > defaults."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise KeyError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    flag_map = {
        "seed": "seed",
        "jobs": "jobs",
        "threshold_note": "note_threshold",
        "threshold_tech": "tech_threshold",
        "noise_smoothing": "label_smoothing",
        "noise_boundary_sharpness": "boundary_sharpness",
        "noise_boundary_jitter": "boundary_jitter_frames",
        "noise_pitch_confusion": "pitch_confusion",
        "noise_technique_flip": "technique_flip_prob",
        "noise_style_confusion": "style_confusion",
        "tempo": "tempo_bpm",
    }
    for flag, attr in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "export_midi", False):
        cfg.export_midi = True
    if getattr(args, "tier_map", None):
        cfg.tier_map = json.loads(Path(args.tier_map).read_text(encoding="utf-8"))
    return cfg


def _write_effective_config(cfg: RunConfig, out_dir: Path) -> None:
    d = dataclasses.asdict(cfg)
    (out_dir / "run_config.json").write_text(json.dumps(d, indent=2), encoding="utf-8")


def _file_seed(base_seed: int, stem: str) -> int:
    return (base_seed + zlib.crc32(stem.encode("utf-8"))) % (2**31)


def _load_input_annotation(path: Path, cfg: RunConfig) -> Annotation:
    if path.suffix.lower() == ".textgrid":
        return annotation_from_textgrid(load_textgrid(path), cfg.tier_map or None)
    return load_annotation_json(path)


def _run_jobs(worker, items, jobs: int) -> list[tuple[str, str | None]]:
    """Run worker(item) per file; collect (stem, error-or-None)."""
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(worker, items):
                results.append(res)
    else:
        for item in items:
            results.append(worker(item))
    return results


_SIM_CTX: dict = {}


def _simulate_one(path_str: str) -> tuple[str, str | None]:
    cfg: RunConfig = _SIM_CTX["cfg"]
    out_dir: Path = _SIM_CTX["out_dir"]
    path = Path(path_str)
    stem = path.name.split(".")[0]
    try:
        annotation = _load_input_annotation(path, cfg)
        problems = validate(annotation)
        if problems:
            raise ValueError(f"invalid annotation: {problems[:3]}")
        grid = synthesize(
            annotation, cfg.frame_spec, cfg.oracle_config(_file_seed(cfg.seed, stem))
        )
        write_posterior_grid(grid, out_dir / f"{stem}.grid")
        save_lyric(Lyric.from_annotation(annotation), out_dir / f"{stem}.lyric.json")
        save_annotation_json(annotation, out_dir / f"{stem}.ref.json")
        save_textgrid(
            annotation_to_textgrid(annotation, cfg.tier_map or None),
            out_dir / f"{stem}.ref.TextGrid",
        )
        return stem, None
    except Exception as exc:  # per-file isolation: keep the batch going
        return stem, str(exc)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg.seed is None:
        print("error: simulate requires --seed for reproducibility", file=sys.stderr)
        return 2
    in_dir, out_dir = Path(args.inputs), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    # one input per stem; JSON wins over TextGrid since it also carries style
    by_stem: dict[str, Path] = {}
    for p in sorted(in_dir.iterdir()):
        stem = p.name.split(".")[0]
        if p.suffix.lower() == ".textgrid":
            by_stem.setdefault(stem, p)
        elif p.suffix == ".json" and not p.name.endswith((".lyric.json", ".grid.json")):
            by_stem[stem] = p
    files = sorted(str(p) for p in by_stem.values())
    if not files:
        print(f"error: no annotation files in {in_dir}", file=sys.stderr)
        return 2

    _SIM_CTX.update(cfg=cfg, out_dir=out_dir)
    results = _run_jobs(_simulate_one, files, cfg.jobs)

    manifest = {
        "pairs": [
            {
                "stem": stem,
                "grid": f"{stem}.grid.json",
                "payload": f"{stem}.grid.f32",
                "lyric": f"{stem}.lyric.json",
                "reference": f"{stem}.ref.json",
            }
            for stem, err in results
            if err is None
        ],
        "errors": {stem: err for stem, err in results if err is not None},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    _write_effective_config(cfg, out_dir)
    return _finish("simulate", results)


_DEC_CTX: dict = {}


def _decode_one(base_str: str) -> tuple[str, str | None]:
    cfg: RunConfig = _DEC_CTX["cfg"]
    out_dir: Path = _DEC_CTX["out_dir"]
    base = Path(base_str)
    stem = base.name.split(".")[0]
    try:
        lyric_path = base.parent / f"{stem}.lyric.json"
        if not lyric_path.exists():
            raise FileNotFoundError(f"missing phoneme sequence file {lyric_path.name}")
        grid = read_posterior_grid(base)
        lyric = load_lyric(lyric_path)
        annotation = decode_annotation(grid, lyric, cfg.decode_config())
        save_annotation_json(annotation, out_dir / f"{stem}.json",
                             style_vocabs=grid.style_vocabs)
        save_textgrid(
            annotation_to_textgrid(annotation, cfg.tier_map or None),
            out_dir / f"{stem}.TextGrid",
        )
        if cfg.export_midi:
            midi.save_midi(annotation.notes, out_dir / f"{stem}.mid", cfg.tempo_bpm)
        return stem, None
    except Exception as exc:
        return stem, str(exc)


def cmd_decode(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    in_dir, out_dir = Path(args.grids), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bases = sorted(str(p)[: -len(".json")] for p in in_dir.glob("*.grid.json"))
    if not bases:
        print(f"error: no posterior grids in {in_dir}", file=sys.stderr)
        return 2
    _DEC_CTX.update(cfg=cfg, out_dir=out_dir)
    results = _run_jobs(_decode_one, bases, cfg.jobs)
    _write_effective_config(cfg, out_dir)
    return _finish("decode", results)


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    ref_dir, hyp_dir = Path(args.refs), Path(args.hyps)
    out_dir = Path(args.out) if args.out else None

    refs = {}
    for p in sorted(ref_dir.glob("*.json")):
        if p.name.endswith((".lyric.json", ".grid.json")) or p.name == "manifest.json" \
                or p.name == "run_config.json":
            continue
        refs[p.name.split(".")[0]] = p
    hyps = {}
    for p in sorted(hyp_dir.glob("*.json")):
        if p.name == "run_config.json":
            continue
        hyps[p.name.split(".")[0]] = p

    if not hyps:
        print(f"error: no hypothesis annotations in {hyp_dir}", file=sys.stderr)
        return 2
    unpaired = sorted(set(refs) ^ set(hyps))
    if unpaired:
        for stem in unpaired:
            print(f"error: unpaired file stem {stem!r}", file=sys.stderr)
        return 1

    per_file: dict[str, MetricReport] = {}
    errors = []
    for stem in sorted(refs):
        try:
            ref = load_annotation_json(refs[stem])
            hyp = load_annotation_json(hyps[stem])
            per_file[stem] = evaluate_pair(
                ref, hyp, cfg.frame_spec, matching=cfg.conpoff_matching
            )
        except Exception as exc:
            errors.append((stem, str(exc)))
            print(f"error: {stem}: {exc}", file=sys.stderr)

    if per_file:
        corpus = aggregate_reports(list(per_file.values()))
        print(corpus.format_table())
        report = {
            "corpus": corpus.to_dict(),
            "files": {stem: r.to_dict() for stem, r in per_file.items()},
        }
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "metrics.json").write_text(
                json.dumps(report, indent=2), encoding="utf-8"
            )
            (out_dir / "metrics.txt").write_text(
                corpus.format_table() + "\n", encoding="utf-8"
            )
            _write_effective_config(cfg, out_dir)
    return 1 if errors else 0


def cmd_mel(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    in_dir, out_dir = Path(args.wavs), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    frames = {}
    for path in sorted(in_dir.glob("*.wav")):
        stem = path.stem
        try:
            samples, _ = frontend.wav_read(path, cfg.sample_rate)
            mel = frontend.mel_extract(samples, cfg.frame_spec)
            np.save(out_dir / f"{stem}.mel.npy", mel.values)
            frames[stem] = mel.n_frames
            print(f"{stem}: {mel.n_frames} frames")
            results.append((stem, None))
        except Exception as exc:
            results.append((stem, str(exc)))
    if not results:
        print(f"error: no wav files in {in_dir}", file=sys.stderr)
        return 2
    (out_dir / "mel_report.json").write_text(json.dumps(frames, indent=2), encoding="utf-8")
    _write_effective_config(cfg, out_dir)
    return _finish("mel", results)


def cmd_export_midi(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    in_dir, out_dir = Path(args.annotations), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for path in sorted(in_dir.glob("*.json")):
        if path.name in ("manifest.json", "run_config.json") or path.name.endswith(
            (".lyric.json", ".grid.json")
        ):
            continue
        stem = path.name.split(".")[0]
        try:
            annotation = load_annotation_json(path)
            midi.save_midi(annotation.notes, out_dir / f"{stem}.mid", cfg.tempo_bpm)
            results.append((stem, None))
        except Exception as exc:
            results.append((stem, str(exc)))
    if not results:
        print(f"error: no annotation files in {in_dir}", file=sys.stderr)
        return 2
    return _finish("export-midi", results)


def _finish(name: str, results: list[tuple[str, str | None]]) -> int:
    failures = [(stem, err) for stem, err in results if err is not None]
    for stem, err in failures:
        print(f"error: {stem}: {err}", file=sys.stderr)
    ok = len(results) - len(failures)
    log.info("%s: %d ok, %d failed", name, ok, len(failures))
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singanno",
        description="Singing annotation decoding and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--threshold-note", type=float, dest="threshold_note")
        p.add_argument("--threshold-tech", type=float, dest="threshold_tech")
        p.add_argument("--noise-smoothing", type=float, dest="noise_smoothing")
        p.add_argument(
            "--noise-boundary-sharpness", type=float, dest="noise_boundary_sharpness"
        )
        p.add_argument(
            "--noise-boundary-jitter", type=int, dest="noise_boundary_jitter"
        )
        p.add_argument(
            "--noise-pitch-confusion", type=float, dest="noise_pitch_confusion"
        )
        p.add_argument(
            "--noise-technique-flip", type=float, dest="noise_technique_flip"
        )
        p.add_argument(
            "--noise-style-confusion", type=float, dest="noise_style_confusion"
        )
        p.add_argument("--tier-map", dest="tier_map", help="JSON tier map file")
        p.add_argument("--tempo", type=float, help="MIDI export tempo (bpm)")

    p = sub.add_parser("simulate", help="synthesize posterior grids from annotations")
    p.add_argument("inputs", help="directory of TextGrid/JSON annotations")
    p.add_argument("out", help="output directory")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", help="decode posterior grids into annotations")
    p.add_argument("grids", help="directory of posterior grids + lyric files")
    p.add_argument("out", help="output directory")
    p.add_argument("--export-midi", action="store_true", dest="export_midi")
    add_common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="score hypothesis annotations against references")
    p.add_argument("refs", help="directory of reference annotations")
    p.add_argument("hyps", help="directory of hypothesis annotations")
    p.add_argument("--out", help="directory for metrics.json / metrics.txt")
    add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mel", help="extract log-mel spectrograms from wav files")
    p.add_argument("wavs", help="directory of wav files")
    p.add_argument("out", help="output directory")
    add_common(p)
    p.set_defaults(func=cmd_mel)

    p = sub.add_parser("export-midi", help="write SMF files from annotation JSON")
    p.add_argument("annotations", help="directory of annotation JSON files")
    p.add_argument("out", help="output directory")
    add_common(p)
    p.set_defaults(func=cmd_export_midi)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("STARS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
