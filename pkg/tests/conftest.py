import numpy as np
import pytest

from signstitch.dictionary import save_embeddings, save_face_dictionary, save_sign_dictionary
from signstitch.io import save_scripts
from signstitch.skeleton import CanonicalSkeleton, Joint, save_skeleton, upper_body_skeleton
from signstitch.stitcher import GlossScript
from signstitch.synthetic import toy_embeddings, toy_face_dictionary, toy_sign_dictionary

KEYS = ["HAUS", "WETTER", "REGEN", "SONNE", "MORGEN", "ABEND", "WIND", "SCHNEE", "KALT", "WARM"]


@pytest.fixture(scope="session")
def skeleton():
    return upper_body_skeleton()


@pytest.fixture(scope="session")
def signs(skeleton):
    return toy_sign_dictionary(skeleton, KEYS)


@pytest.fixture(scope="session")
def faces():
    return toy_face_dictionary()


@pytest.fixture(scope="session")
def embeddings():
    return toy_embeddings(KEYS + ["RUHRGEBIET", "NEBEL"])


def chain_skeleton(lengths, direction=(0.0, 1.0, 0.0)):
    """Straight chain root -> j1 -> j2 ...; anchors all point at valid joints."""
    joints = [Joint("root", None, 0.0, direction)]
    for i, length in enumerate(lengths, start=1):
        joints.append(Joint(f"j{i}", i - 1, length, direction))
    last = len(joints) - 1
    anchors = {a: min(k, last) for k, a in enumerate(
        ["hips_left", "hips_right", "shoulder_left", "shoulder_right", "dominant_wrist", "head_root"])}
    return CanonicalSkeleton(tuple(joints), anchors)


def random_skeleton(n_joints, rng):
    """Random tree in topological order with random unit rest directions."""
    joints = [Joint("root", None, 0.0, (0.0, 1.0, 0.0))]
    for i in range(1, n_joints):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        joints.append(Joint(f"j{i}", int(rng.integers(0, i)), float(rng.uniform(0.05, 0.5)), tuple(d)))
    anchors = dict(zip(
        ["hips_left", "hips_right", "shoulder_left", "shoulder_right", "dominant_wrist", "head_root"],
        [1, 2, 3, 4, n_joints - 1, 5]))
    return CanonicalSkeleton(tuple(joints), anchors)


@pytest.fixture
def data_dir(tmp_path, skeleton, signs, faces, embeddings):
    """Skeleton, dictionaries, embeddings and a 3-record script on disk."""
    save_skeleton(skeleton, tmp_path / "skeleton.json")
    save_sign_dictionary(signs, tmp_path / "signs.jsonl")
    save_face_dictionary(faces, tmp_path / "faces.jsonl")
    save_embeddings(embeddings, tmp_path / "emb.txt")
    scripts = [
        GlossScript(["haus", "WETTER1A", "SONNE"], [20, 24, 18], [0, 1, 2], 6.0, 25.0, id="s1"),
        GlossScript(["REGEN", "RUHRGEBIET"], [30, 22], [3, 0], 8.0, 25.0, id="s2"),
        GlossScript(["WIND"], [28], [1], 10.0, 25.0, id="s3"),
    ]
    save_scripts(scripts, tmp_path / "script.jsonl")
    return tmp_path


#: criterion number -> (title, passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
