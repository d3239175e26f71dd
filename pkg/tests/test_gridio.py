import numpy as np
import pytest

from semnav.costmap import CostMap, SemanticMap
from semnav.errors import LoadError
from semnav.gridio import (
    load_costmap,
    load_semantic_map,
    meta_path,
    read_pgm,
    save_costmap,
    save_semantic_map,
    write_pgm,
)


def test_semantic_round_trip_is_byte_identical(tmp_path):
    rng = np.random.default_rng(11)
    sem = SemanticMap(labels=rng.integers(0, 23, size=(17, 23)).astype(np.uint8),
                      resolution=0.25, origin=(-3.5, 12.0))
    first = tmp_path / "map.pgm"
    save_semantic_map(sem, first)
    loaded = load_semantic_map(first)
    assert loaded == sem

    second = tmp_path / "again.pgm"
    save_semantic_map(loaded, second)
    assert first.read_bytes() == second.read_bytes()
    assert meta_path(first).read_bytes() == meta_path(second).read_bytes()


def test_costmap_quantization(tmp_path):
    cm = CostMap(costs=np.array([[0.0, 1.0], [0.5, 0.123]]), resolution=1.0)
    path = tmp_path / "cost.pgm"
    save_costmap(cm, path)
    values, maxval = read_pgm(path)
    assert maxval == 255
    assert values.tolist() == [[0, 255], [128, 31]]  # floor(c*255 + 0.5)
    loaded = load_costmap(path)
    assert loaded.costs[0, 1] == 1.0
    assert abs(loaded.costs[1, 0] - 0.5) < 1 / 255


def test_missing_sidecar_defaults(tmp_path):
    path = tmp_path / "bare.pgm"
    write_pgm(path, np.array([[3, 4]], dtype=np.uint8), 22)
    sem = load_semantic_map(path)
    assert sem.resolution == 1.0
    assert sem.origin == (0.0, 0.0)


def test_sidecar_round_trip_precision(tmp_path):
    sem = SemanticMap(labels=np.zeros((2, 2), dtype=np.uint8),
                      resolution=0.1, origin=(1e-7, -2.25))
    path = tmp_path / "m.pgm"
    save_semantic_map(sem, path)
    loaded = load_semantic_map(path)
    assert loaded.resolution == 0.1
    assert loaded.origin == (1e-7, -2.25)


def test_pgm_comments_are_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 1\n# another\n22\n\x03\x07")
    values, maxval = read_pgm(path)
    assert maxval == 22
    assert values.tolist() == [[3, 7]]


def test_bad_magic(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P2\n2 1\n22\n12")
    with pytest.raises(LoadError, match="P5"):
        read_pgm(path)


def test_truncated_pixels(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P5\n4 4\n22\nab")
    with pytest.raises(LoadError, match="truncated pixel data"):
        read_pgm(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P5\n4")
    with pytest.raises(LoadError, match="header"):
        read_pgm(path)


def test_labels_above_22_rejected_for_semantic(tmp_path):
    path = tmp_path / "x.pgm"
    write_pgm(path, np.array([[200]], dtype=np.uint8), 255)
    with pytest.raises(LoadError, match="exceeds 22"):
        load_semantic_map(path)


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.pgm"
    with pytest.raises(LoadError, match="nope.pgm"):
        read_pgm(missing)


def test_malformed_sidecar(tmp_path):
    path = tmp_path / "m.pgm"
    write_pgm(path, np.zeros((1, 1), dtype=np.uint8), 22)
    meta_path(path).write_text("resolution=abc\n")
    with pytest.raises(LoadError, match="non-numeric"):
        load_semantic_map(path)


def test_sidecar_missing_field(tmp_path):
    path = tmp_path / "m.pgm"
    write_pgm(path, np.zeros((1, 1), dtype=np.uint8), 22)
    meta_path(path).write_text("resolution=0.5\norigin_x=0.0\n")
    with pytest.raises(LoadError, match="origin_y"):
        load_semantic_map(path)
