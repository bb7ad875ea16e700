import json

import numpy as np
import pytest

from pln import io
from pln.decoder import Detection, Provenance
from pln.encoder import Scene, encode_scene
from pln.grid import CORNER_KINDS, Box, CornerKind, GridSpec
from pln.synth import SceneGenConfig, generate_scene
from pln.tensors import BranchTarget, BranchTensor, random_tensor


def test_container_roundtrip_is_byte_identical(tmp_path):
    grid = GridSpec(4, 2, 3)
    rng = np.random.default_rng(0)
    tensors = [random_tensor(grid, rng) for _ in range(4)]
    path = tmp_path / "t.plnt"
    io.write_container(path, grid, tensors)
    data = path.read_bytes()
    assert data[:4] == b"PLNT" and len(data) == 14 + 4 * io.branch_nbytes(grid) // 4 * 4
    g2, branches = io.read_container(path)
    assert g2 == grid and len(branches) == 4
    again = io.pack_container(g2, [BranchTensor(**b) for b in branches])
    assert again == data
    for t, b in zip(tensors, branches):
        assert np.array_equal(b["Q"], t.Q.astype(np.float32).astype(np.float64))


def test_target_mask_survives_container():
    grid = GridSpec(8, 2, 3)
    scene = generate_scene(SceneGenConfig(seed=4, n_boxes=(3, 3)))
    targets = [encode_scene(scene, grid, k) for k in CORNER_KINDS]
    _, branches = io.unpack_container(io.pack_container(grid, targets))
    for t, b in zip(targets, branches):
        back = BranchTarget.from_tensor(BranchTensor(**b), t.kind)
        assert np.array_equal(back.mask, t.mask)
        assert np.allclose(back.x[t.mask], t.x[t.mask], atol=1e-7)


def _valid_bytes():
    grid = GridSpec(2, 1, 1)
    return io.pack_container(grid, [BranchTensor.zeros(grid)])


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d[:10], 10),
    (lambda d: d[:-1], len(_valid_bytes()) - 1),
    (lambda d: d + b"\0", len(_valid_bytes())),
    (lambda d: b"XXXX" + d[4:], 0),
    (lambda d: d[:4] + b"\x02\x00" + d[6:], 4),
    (lambda d: d[:6] + b"\x00\x00" + d[8:], 6),
])
def test_malformed_containers(mutate, where):
    with pytest.raises(io.FormatError) as exc:
        io.unpack_container(mutate(_valid_bytes()), "bad.plnt")
    assert exc.value.where == where
    assert "bad.plnt" in str(exc.value) and f"byte offset {where}" in str(exc.value)


def test_missing_file(tmp_path):
    with pytest.raises(io.FormatError):
        io.read_container(tmp_path / "nope.plnt")


def test_scene_json_roundtrip():
    scene = Scene(boxes=((Box(0.1, 0.2, 0.3, 0.4), 1), (Box(0.5, 0.5, 0.9, 0.6), 0)), classes=("cat", "dog"), scene_id="s1")
    doc = io.scene_to_json(scene)
    assert doc["boxes"][0]["class"] == "dog"
    assert io.scene_from_json(json.loads(json.dumps(doc))) == scene


def test_scene_json_class_by_index():
    doc = {"boxes": [{"xmin": 0, "ymin": 0, "xmax": 0.5, "ymax": 0.5, "class": 2}]}
    scene = io.scene_from_json(doc)
    assert scene.boxes[0][1] == 2 and scene.classes == ()


@pytest.mark.parametrize("doc, where", [
    ([], "$"),
    ({"classes": "a"}, "$.classes"),
    ({"classes": ["a", "a"]}, "$.classes"),
    ({"boxes": {}}, "$.boxes"),
    ({"boxes": [1]}, "$.boxes[0]"),
    ({"boxes": [{"xmin": 0, "ymin": 0, "xmax": 1}]}, "$.boxes[0].ymax"),
    ({"boxes": [{"xmin": "0", "ymin": 0, "xmax": 1, "ymax": 1, "class": 0}]}, "$.boxes[0].xmin"),
    ({"boxes": [{"xmin": 0.5, "ymin": 0, "xmax": 0.2, "ymax": 1, "class": 0}]}, "$.boxes[0]"),
    ({"boxes": [{"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1.5, "class": 0}]}, "$.boxes[0]"),
    ({"classes": ["a"], "boxes": [{"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1, "class": "b"}]}, "$.boxes[0].class"),
    ({"classes": ["a"], "boxes": [{"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1, "class": 1}]}, "$.boxes[0].class"),
    ({"boxes": [{"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1, "class": True}]}, "$.boxes[0].class"),
])
def test_scene_json_errors(doc, where):
    with pytest.raises(io.FormatError) as exc:
        io.scene_from_json(doc, "scene.json")
    assert exc.value.where == where


def test_detections_roundtrip():
    dets = [
        Detection(Box(0.1, 0.1, 0.2, 0.2), 1, 0.5, CornerKind.RIGHT_TOP, Provenance(3, 0, 7, 2)),
        Detection(Box(0.3, 0.1, 0.4, 0.2), 0, 0.9, CornerKind.LEFT_BOTTOM, None),
    ]
    back = io.detections_from_json(json.loads(json.dumps(io.detections_to_json(dets))))
    assert back == sorted(dets, key=Detection.sort_key)


@pytest.mark.parametrize("doc, where", [
    ({"detections": 3}, "$.detections"),
    ([{"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1, "class": 0}], "$[0].score"),
    ([{"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1, "class": -1, "score": 1}], "$[0].class"),
    ([{"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1, "class": 0, "score": 1, "branch": "up"}], "$[0]"),
])
def test_detection_json_errors(doc, where):
    with pytest.raises(io.FormatError) as exc:
        io.detections_from_json(doc, "d.json")
    assert exc.value.where == where


def test_invalid_json_reports_offset(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"boxes": [}')
    with pytest.raises(io.FormatError) as exc:
        io.load_scene(p)
    assert exc.value.where == 11


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "out.txt"
    io.atomic_write(p, "one")
    io.atomic_write(p, b"two")
    assert p.read_bytes() == b"two"
    assert [f.name for f in tmp_path.iterdir()] == ["out.txt"]


def test_trace_csv():
    assert io.trace_csv([2.0, 0.5]) == "iteration,loss\n0,2.0\n1,0.5\n"
