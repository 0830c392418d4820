"""Stitch sign dictionaries into pose sequences, estimate cutoffs, evaluate.

Exit codes: 0 success, 1 partial failure (some records failed), 2 config error.

Every flag can also come from a JSON config file given by ``--config`` or the
``SIGNSTITCH_CONFIG`` environment variable; explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .cutoff import estimate_cutoff
from .dictionary import (
    SOURCES,
    SignDictionary,
    load_embeddings,
    load_face_dictionary,
    load_sign_dictionary,
    read_jsonl,
    save_sign_dictionary,
)
from .dsp import resample_linear
from .errors import SignStitchError
from .io import dumps, load_poses, load_scripts, save_poses, write_atomic
from .metrics import dtw_mje
from .skeleton import JointAngleSequence, load_skeleton
from .stitcher import StitchParams, run_pipeline

log = logging.getLogger("signstitch")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
CONFIG_ENV = "SIGNSTITCH_CONFIG"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    skeleton: str | None = None
    signs: str | None = None
    faces: str | None = None
    embeddings: str | None = None
    script: str | None = None
    out_dir: str | None = None
    alpha_crop: float = 0.05
    similarity_floor: float = 0.0
    grid_step: float = 0.5
    literal_set_difference: bool = False
    filter: bool = True
    verbosity: int = 0

    def params(self) -> StitchParams:
        try:
            return StitchParams(
                alpha_crop=self.alpha_crop,
                similarity_floor=self.similarity_floor,
                apply_filter=self.filter,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"missing required setting --{name.replace('_', '-')}")
            if name != "out_dir" and not Path(value).is_file():
                raise ConfigError(f"--{name.replace('_', '-')}: no such file {value}")
        if not 0 < self.alpha_crop < 0.5:
            raise ConfigError("--alpha-crop must lie in (0, 0.5)")
        if not -1.0 <= self.similarity_floor <= 1.0:
            raise ConfigError("--similarity-floor must lie in [-1, 1]")
        if not self.grid_step > 0:
            raise ConfigError("--grid-step must be > 0")

    def effective(self) -> dict:
        # where results are written does not change them, so reruns into
        # another directory stay byte-identical
        doc = asdict(self)
        doc.pop("out_dir")
        return doc


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "verbose", 0):
        values["verbosity"] = args.verbose
    return RunConfig(**values)


def _load_inputs(cfg: RunConfig):
    try:
        skeleton = load_skeleton(cfg.skeleton)
        signs = load_sign_dictionary(cfg.signs)
        faces = load_face_dictionary(cfg.faces) if cfg.faces else None
        embeddings = load_embeddings(cfg.embeddings) if cfg.embeddings else None
        scripts = load_scripts(cfg.script)
    except (OSError, SignStitchError, KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if signs.skeleton_version != skeleton.version:
        raise ConfigError(
            f"sign dictionary targets skeleton {signs.skeleton_version!r}, skeleton file is {skeleton.version!r}"
        )
    return skeleton, signs, faces, embeddings, scripts


def _provenance(cfg: RunConfig, report: dict) -> dict:
    return {"tool_version": __version__, "params": cfg.effective(), **report}


def cmd_stitch(cfg: RunConfig) -> int:
    cfg.require("skeleton", "signs", "script", "out_dir")
    skeleton, signs, faces, embeddings, scripts = _load_inputs(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.params()
    failed = 0
    for script in scripts:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                result = run_pipeline(script, signs, faces, embeddings, skeleton, params)
        except SignStitchError as exc:
            failed += 1
            log.error("%s: FAILED %s", script.id, exc)
            print(f"{script.id}: FAILED {exc}")
            continue
        meta = {"tool_version": __version__, "params": cfg.effective()}
        save_poses(result.poses, out / f"{script.id}.json", script.id, meta)
        write_atomic(out / f"{script.id}.provenance.json", dumps(_provenance(cfg, result.report)))
        print(
            f"{script.id}: {len(result.poses)} frames, "
            f"{len(result.report['substitutions'])} substitution(s), "
            f"{len(result.report['clamped_boundaries'])}/{len(result.plan)} boundaries clamped"
        )
    return EXIT_PARTIAL if failed else EXIT_OK


def _pose_files(path: Path) -> dict[str, Path]:
    if path.is_file():
        return {path.stem: path}
    return {p.stem: p for p in sorted(path.glob("*.json")) if not p.name.endswith(".provenance.json")}


def cmd_estimate_cutoff(cfg: RunConfig, original: str, output: str | None) -> int:
    cfg.require("skeleton", "signs", "script")
    skeleton, signs, faces, embeddings, scripts = _load_inputs(cfg)
    orig_path = Path(original)
    if not orig_path.exists():
        raise ConfigError(f"--original: no such file or directory {original}")
    originals = {}
    for p in _pose_files(orig_path).values():
        try:
            seq_id, poses = load_poses(p)
        except (OSError, SignStitchError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        originals[seq_id] = poses
    params = StitchParams(alpha_crop=cfg.alpha_crop, similarity_floor=cfg.similarity_floor, apply_filter=False)
    lines, failed = [], 0
    for script in scripts:
        if script.id not in originals:
            if orig_path.is_file():
                continue
            failed += 1
            print(f"{script.id}: FAILED no original pose file", file=sys.stderr)
            continue
        ref = originals[script.id]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                stitched = run_pipeline(script, signs, faces, embeddings, skeleton, params).poses
                stitched = resample_linear(stitched, len(ref))
                if abs(stitched.fps - ref.fps) > 1e-9:
                    raise SignStitchError(f"script fps {stitched.fps} differs from original fps {ref.fps}")
                cmp = estimate_cutoff(
                    ref, stitched, cfg.grid_step, literal_difference=cfg.literal_set_difference
                )
        except (SignStitchError, ValueError) as exc:
            failed += 1
            print(f"{script.id}: FAILED {exc}", file=sys.stderr)
            continue
        rec = {"id": script.id, **cmp.to_dict(), "tool_version": __version__, "params": cfg.effective()}
        lines.append(dumps(rec))
        print(f"{script.id}: cutoff {cmp.chosen_cutoff:.2f} Hz", file=sys.stderr)
    if not lines and failed == 0:
        raise ConfigError("no script id matches the original pose file(s)")
    text = "".join(lines)
    if output:
        write_atomic(output, text)
    else:
        sys.stdout.write(text)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_eval(produced: str, reference: str, output: str | None) -> int:
    a, b = Path(produced), Path(reference)
    for p in (a, b):
        if not p.exists():
            raise ConfigError(f"no such file or directory {p}")
    if a.is_file() != b.is_file():
        raise ConfigError("eval takes two files or two directories")
    pairs = {}
    if a.is_file():
        pairs[a.stem] = (a, b)
    else:
        fa, fb = _pose_files(a), _pose_files(b)
        pairs = {k: (fa[k], fb[k]) for k in sorted(set(fa) & set(fb))}
        if not pairs:
            raise ConfigError("no pose files with matching names in the two directories")
    per_id, failed = {}, 0
    for name, (pa, pb) in pairs.items():
        try:
            ida, sa = load_poses(pa)
            _idb, sb = load_poses(pb)
            res = dtw_mje(sa, sb)
        except (SignStitchError, ValueError, OSError) as exc:
            failed += 1
            print(f"{name}: FAILED {exc}", file=sys.stderr)
            continue
        per_id[ida] = {"dtw_mje": res.cost, "path_length": res.path_length}
    costs = [v["dtw_mje"] for v in per_id.values()]
    doc = {
        "tool_version": __version__,
        "per_id": per_id,
        "aggregate": {"mean_dtw_mje": float(np.mean(costs)) if costs else None, "count": len(costs)},
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if output:
        write_atomic(output, text)
    else:
        sys.stdout.write(text)
    return EXIT_PARTIAL if failed else EXIT_OK


def stride_indices(n_frames: int, stride: int) -> list[int]:
    """Every ``stride``-th frame from 0, plus the final frame."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    idx = list(range(0, n_frames, stride))
    if idx and idx[-1] != n_frames - 1:
        idx.append(n_frames - 1)
    return idx


def cmd_export_frames(pose_file: str, stride: int, skeleton_path: str | None, output: str | None) -> int:
    if stride < 1:
        raise ConfigError(f"--stride must be >= 1, got {stride}")
    try:
        seq_id, poses = load_poses(pose_file)
        skeleton = load_skeleton(skeleton_path) if skeleton_path else None
    except (OSError, SignStitchError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    edges = []
    if skeleton is not None:
        names = poses.joint_names or []
        if names[: skeleton.n_joints] != skeleton.names:
            raise ConfigError("pose file joints do not match the skeleton")
        edges = [list(e) for e in skeleton.edges]
    records = [
        {"frame": i, "points": poses.frames[i, :, :2].tolist()} for i in stride_indices(len(poses), stride)
    ]
    doc = {
        "id": seq_id,
        "fps": poses.fps,
        "projection": "orthographic-front-xy",
        "stride": stride,
        "edges": edges,
        "frames": records,
        "tool_version": __version__,
    }
    text = dumps(doc)
    if output:
        write_atomic(output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dict_build(skeleton_path: str, raw_path: str, output: str, source: str) -> int:
    try:
        skeleton = load_skeleton(skeleton_path)
        raw = read_jsonl(raw_path)
    except (OSError, SignStitchError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    entries, rejected = {}, []
    for n, rec in enumerate(raw, start=1):
        key = str(rec.get("gloss", "")).strip().upper()
        try:
            if not key:
                raise ValueError("empty gloss")
            if key in entries:
                raise ValueError(f"duplicate gloss key {key!r}")
            seq = JointAngleSequence(np.asarray(rec["frames"], dtype=float), float(rec["fps"]))
            if seq.n_joints != skeleton.n_joints:
                raise ValueError(f"{seq.n_joints} joints per frame, skeleton has {skeleton.n_joints}")
            if len(seq) < 2:
                raise ValueError(f"{len(seq)} frame(s); at least 2 required")
        except (KeyError, ValueError, SignStitchError) as exc:
            msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            rejected.append((n, key, msg))
            print(f"record {n} {key or '?'}: REJECTED {msg}")
            continue
        entries[key] = seq
        print(f"record {n} {key}: {len(seq)} frames")
    if entries:
        save_sign_dictionary(SignDictionary(entries, source, skeleton.version), output)
    print(f"{len(entries)} entries written, {len(rejected)} rejected")
    return EXIT_PARTIAL if rejected else EXIT_OK


def cmd_dict_validate(skeleton_path: str, signs_path: str) -> int:
    try:
        skeleton = load_skeleton(skeleton_path)
        signs = load_sign_dictionary(signs_path)
    except (OSError, SignStitchError, ValueError) as exc:
        print(f"INVALID: {exc}")
        return EXIT_PARTIAL
    problems = []
    if signs.skeleton_version != skeleton.version:
        problems.append(f"skeleton version {signs.skeleton_version!r} != {skeleton.version!r}")
    for key in signs.keys():
        seq = signs.entries[key]
        if seq.n_joints != skeleton.n_joints:
            problems.append(f"{key}: {seq.n_joints} joints, skeleton has {skeleton.n_joints}")
    for p in problems:
        print(f"INVALID: {p}")
    print(f"{len(signs)} entries, source={signs.source}, {len(problems)} problem(s)")
    return EXIT_PARTIAL if problems else EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--skeleton")
    p.add_argument("--signs", help="sign dictionary file")
    p.add_argument("--faces", help="face dictionary file (optional)")
    p.add_argument("--embeddings", help="word embedding text file (optional)")
    p.add_argument("--script", help="gloss script file (JSON Lines)")
    p.add_argument("--alpha-crop", dest="alpha_crop", type=float)
    p.add_argument("--similarity-floor", dest="similarity_floor", type=float)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signstitch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"signstitch {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dict", help="build or validate a sign dictionary")
    dsub = d.add_subparsers(dest="dict_command", required=True)
    b = dsub.add_parser("build")
    b.add_argument("--skeleton", required=True)
    b.add_argument("--input", required=True, help="JSON Lines of {gloss, fps, frames}")
    b.add_argument("--output", required=True)
    b.add_argument("--source", choices=SOURCES, default="isolated")
    v = dsub.add_parser("validate")
    v.add_argument("--skeleton", required=True)
    v.add_argument("--signs", required=True)

    s = sub.add_parser("stitch", help="run the stitching pipeline on every script record")
    _add_run_flags(s)
    s.add_argument("--out-dir", dest="out_dir")
    s.add_argument("--no-filter", dest="filter", action="store_const", const=False)

    c = sub.add_parser("estimate-cutoff", help="derive cutoffs from original pose files")
    _add_run_flags(c)
    c.add_argument("--original", required=True, help="pose file or directory of <id>.json files")
    c.add_argument("--grid-step", dest="grid_step", type=float)
    c.add_argument(
        "--literal-set-difference",
        dest="literal_set_difference",
        action="store_const",
        const=True,
        help="measure original-minus-candidate spectrum instead of candidate-minus-original",
    )
    c.add_argument("--output")

    e = sub.add_parser("eval", help="DTW-MJE between produced and reference pose files")
    e.add_argument("produced")
    e.add_argument("reference")
    e.add_argument("--output")

    x = sub.add_parser("export-frames", help="2D front-view projections for plotting")
    x.add_argument("pose_file")
    x.add_argument("--stride", type=int, default=1)
    x.add_argument("--skeleton")
    x.add_argument("--output")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        if args.command == "dict":
            if args.dict_command == "build":
                return cmd_dict_build(args.skeleton, args.input, args.output, args.source)
            return cmd_dict_validate(args.skeleton, args.signs)
        if args.command == "eval":
            return cmd_eval(args.produced, args.reference, args.output)
        if args.command == "export-frames":
            return cmd_export_frames(args.pose_file, args.stride, args.skeleton, args.output)
        cfg = build_config(args)
        if args.command == "stitch":
            return cmd_stitch(cfg)
        return cmd_estimate_cutoff(cfg, args.original, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
