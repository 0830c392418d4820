import json

import numpy as np
import pytest

from signstitch.cli import main, stride_indices
from signstitch.dictionary import load_sign_dictionary
from signstitch.io import load_poses, save_scripts
from signstitch.skeleton import save_skeleton
from signstitch.stitcher import GlossScript


def run_flags(d, out, embeddings=True):
    flags = ["--skeleton", str(d / "skeleton.json"), "--signs", str(d / "signs.jsonl"),
             "--faces", str(d / "faces.jsonl"), "--script", str(d / "script.jsonl"), "--out-dir", str(out)]
    if embeddings:
        flags += ["--embeddings", str(d / "emb.txt")]
    return flags


def write_raw(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


def raw_record(gloss, n, j, fps=25.0, seed=0):
    return {"gloss": gloss, "fps": fps, "frames": np.random.default_rng(seed).normal(size=(n, j * 3)).tolist()}


def test_dict_build_valid(tmp_path, skeleton, capsys):
    save_skeleton(skeleton, tmp_path / "sk.json")
    write_raw(tmp_path / "raw.jsonl", [raw_record(g, 5 + i, skeleton.n_joints, seed=i)
                                       for i, g in enumerate(["haus", "Regen", "WIND"])])
    code = main(["dict", "build", "--skeleton", str(tmp_path / "sk.json"),
                 "--input", str(tmp_path / "raw.jsonl"), "--output", str(tmp_path / "d.jsonl")])
    assert code == 0
    d = load_sign_dictionary(tmp_path / "d.jsonl")
    assert sorted(d.keys()) == ["HAUS", "REGEN", "WIND"] and len(d.entries["WIND"]) == 7
    assert main(["dict", "validate", "--skeleton", str(tmp_path / "sk.json"), "--signs", str(tmp_path / "d.jsonl")]) == 0


def test_dict_build_rejections(tmp_path, skeleton, capsys):
    save_skeleton(skeleton, tmp_path / "sk.json")
    write_raw(tmp_path / "raw.jsonl", [
        raw_record("HAUS", 5, skeleton.n_joints),
        raw_record("haus", 6, skeleton.n_joints),
        raw_record("REGEN", 1, skeleton.n_joints),
    ])
    code = main(["dict", "build", "--skeleton", str(tmp_path / "sk.json"),
                 "--input", str(tmp_path / "raw.jsonl"), "--output", str(tmp_path / "d.jsonl")])
    out = capsys.readouterr().out
    assert code == 1
    assert "duplicate gloss key 'HAUS'" in out
    assert "REGEN: REJECTED 1 frame(s)" in out
    assert load_sign_dictionary(tmp_path / "d.jsonl").keys() == ["HAUS"]


def test_stitch_outputs_and_provenance(data_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["stitch", *run_flags(data_dir, out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("s1: 62 frames")
    seq_id, poses = load_poses(out / "s1.json")
    assert seq_id == "s1" and len(poses) == 62
    _, poses = load_poses(out / "s3.json")
    assert len(poses) == 28
    prov = json.loads((out / "s2.provenance.json").read_text())
    assert prov["substitutions"] == [1]
    assert prov["glosses"][1]["resolution"]["kind"] == "substituted"
    assert prov["params"]["alpha_crop"] == 0.05 and "tool_version" in prov
    doc = json.loads((out / "s1.json").read_text())
    assert doc["tool_version"] and doc["params"]["filter"] is True


def test_stitch_isolates_failures(data_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["stitch", *run_flags(data_dir, out, embeddings=False)]) == 1
    text = capsys.readouterr().out
    assert "s2: FAILED" in text and "RUHRGEBIET" in text
    assert (out / "s1.json").exists() and (out / "s3.json").exists() and not (out / "s2.json").exists()


def test_stitch_reruns_are_byte_identical(data_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["stitch", *run_flags(data_dir, a)]) == 0
    assert main(["stitch", *run_flags(data_dir, b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir()) and len(names) == 6
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_config_errors_exit_2(data_dir, tmp_path, monkeypatch):
    assert main(["stitch", "--skeleton", str(data_dir / "skeleton.json")]) == 2
    assert main(["stitch", *run_flags(data_dir, tmp_path / "o"), "--alpha-crop", "0.7"]) == 2
    flags = run_flags(data_dir, tmp_path / "o")
    flags[flags.index("--signs") + 1] = str(tmp_path / "missing.jsonl")
    assert main(["stitch", *flags]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    monkeypatch.setenv("SIGNSTITCH_CONFIG", str(cfg))
    assert main(["stitch", *run_flags(data_dir, tmp_path / "o")]) == 2


def test_config_file_from_environment(data_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    flags = run_flags(data_dir, tmp_path / "out")
    cfg.write_text(json.dumps({k.lstrip("-").replace("-", "_"): v for k, v in zip(flags[::2], flags[1::2])}))
    monkeypatch.setenv("SIGNSTITCH_CONFIG", str(cfg))
    assert main(["stitch", "--alpha-crop", "0.1"]) == 0
    prov = json.loads((tmp_path / "out" / "s3.provenance.json").read_text())
    assert prov["params"]["alpha_crop"] == 0.1


def test_stride_rule():
    assert stride_indices(28, 1) == list(range(28))
    assert stride_indices(28, 10) == [0, 10, 20, 27]
    assert stride_indices(21, 10) == [0, 10, 20]
    with pytest.raises(ValueError):
        stride_indices(28, 0)


def test_export_frames(data_dir, tmp_path, skeleton):
    out = tmp_path / "out"
    main(["stitch", *run_flags(data_dir, out)])
    target = tmp_path / "frames.json"
    assert main(["export-frames", str(out / "s3.json"), "--stride", "10",
                 "--skeleton", str(data_dir / "skeleton.json"), "--output", str(target)]) == 0
    doc = json.loads(target.read_text())
    assert [r["frame"] for r in doc["frames"]] == [0, 10, 20, 27]
    _, poses = load_poses(out / "s3.json")
    for rec in doc["frames"]:
        pts2 = np.array(rec["points"])
        pts3 = poses.frames[rec["frame"]]
        for a, b in doc["edges"]:
            assert np.linalg.norm(pts2[a] - pts2[b]) <= np.linalg.norm(pts3[a] - pts3[b]) + 1e-12
    assert main(["export-frames", str(out / "s3.json"), "--stride", "0"]) == 2


def test_eval_files_and_directories(data_dir, tmp_path, capsys):
    a = tmp_path / "a"
    main(["stitch", *run_flags(data_dir, a)])
    capsys.readouterr()
    assert main(["eval", str(a / "s1.json"), str(a / "s1.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["per_id"]["s1"]["dtw_mje"] == 0.0
    assert main(["eval", str(a), str(a), "--output", str(tmp_path / "e.json")]) == 0
    doc = json.loads((tmp_path / "e.json").read_text())
    assert sorted(doc["per_id"]) == ["s1", "s2", "s3"] and doc["aggregate"]["count"] == 3
    assert main(["eval", str(a / "s1.json"), str(a)]) == 2


def cutoff_flags(d):
    flags = run_flags(d, d)
    i = flags.index("--out-dir")
    del flags[i : i + 2]
    return flags


def test_estimate_cutoff(data_dir, tmp_path, capsys):
    scripts = [
        GlossScript(["HAUS", "WETTER", "SONNE"], [20, 24, 18], [0, 1, 2], 6.0, 25.0, id="s1"),
        GlossScript(["REGEN", "KALT", "WIND", "ABEND"], [40, 30, 36, 44], [3, 0, 1, 2], 4.0, 25.0, id="s4"),
    ]
    save_scripts(scripts, data_dir / "script.jsonl")
    orig = tmp_path / "orig"
    assert main(["stitch", *run_flags(data_dir, orig)]) == 0
    capsys.readouterr()
    out = tmp_path / "cut.jsonl"
    assert main(["estimate-cutoff", *cutoff_flags(data_dir), "--original", str(orig), "--output", str(out)]) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["id"] for r in recs] == ["s1", "s4"]
    for r in recs:
        assert r["grid"][0] <= r["chosen_cutoff"] <= r["grid"][-1] < 12.5
        assert len(r["I"]) == len(r["Dset"]) == len(r["grid"])
    assert main(["estimate-cutoff", *cutoff_flags(data_dir), "--original", str(tmp_path / "nope")]) == 2


def test_estimate_cutoff_reports_too_short_records(data_dir, tmp_path, capsys):
    # 28 frames at 25 fps is barely one period of the lowest candidate cutoff:
    # the lagging low-passed output is not a pure attenuation and Dset(c) dips
    orig = tmp_path / "orig"
    main(["stitch", *run_flags(data_dir, orig)])
    capsys.readouterr()
    code = main(["estimate-cutoff", *cutoff_flags(data_dir), "--original", str(orig)])
    captured = capsys.readouterr()
    assert code == 1
    assert "s3: FAILED set difference Dset(c) decreases" in captured.err
    assert [json.loads(line)["id"] for line in captured.out.splitlines()] == ["s1", "s2"]
