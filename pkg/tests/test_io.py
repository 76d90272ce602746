import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mrflow.errors import FormatError
from mrflow.io import load_scene, read_pfm, read_pgm, save_scene, write_pfm, write_pgm16
from mrflow.flow import gt_flow

f32 = st.floats(-1e6, 1e6, width=32)


@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12), elements=f32))
def test_pfm_gray_roundtrip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("pfm") / "x.pfm"
    write_pfm(p, a)
    np.testing.assert_array_equal(read_pfm(p), a)


def test_pfm_colour_and_orientation(tmp_path):
    a = np.arange(2 * 3 * 3, dtype=np.float32).reshape(2, 3, 3)
    write_pfm(tmp_path / "c.pfm", a)
    raw = (tmp_path / "c.pfm").read_bytes()
    assert raw.startswith(b"PF\n3 2\n-1.0\n")
    # rows are stored bottom-to-top
    first = np.frombuffer(raw[len(b"PF\n3 2\n-1.0\n"):], "<f4", count=3)
    np.testing.assert_array_equal(first, a[1, 0])
    np.testing.assert_array_equal(read_pfm(tmp_path / "c.pfm"), a)


def test_pfm_big_endian(tmp_path):
    a = np.array([[1.5, -2.0], [3.0, 4.25]], dtype=np.float32)
    (tmp_path / "b.pfm").write_bytes(b"Pf\n2 2\n1.0\n" + a[::-1].astype(">f4").tobytes())
    np.testing.assert_array_equal(read_pfm(tmp_path / "b.pfm"), a)


@pytest.mark.parametrize("raw", [
    b"",
    b"P6\n2 2\n-1.0\n" + bytes(16),
    b"Pf\n2 2\n-1.0\n" + bytes(15),
    b"Pf\n2 x\n-1.0\n" + bytes(16),
    b"Pf\n2 2\n0.0\n" + bytes(16),
    b"Pf\n-2 2\n-1.0\n" + bytes(16),
])
def test_pfm_malformed(tmp_path, raw):
    (tmp_path / "m.pfm").write_bytes(raw)
    with pytest.raises(FormatError):
        read_pfm(tmp_path / "m.pfm")


def test_missing_file():
    with pytest.raises(FormatError):
        read_pfm("/nonexistent/x.pfm")


@given(hnp.arrays(np.uint16, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12)))
def test_pgm_roundtrip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("pgm") / "x.pgm"
    write_pgm16(p, a)
    np.testing.assert_array_equal(read_pgm(p), a)


def test_pgm_8bit_and_comments(tmp_path):
    (tmp_path / "e.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\xff")
    np.testing.assert_array_equal(read_pgm(tmp_path / "e.pgm"), [[7, 255]])


def test_pgm_malformed(tmp_path):
    (tmp_path / "m.pgm").write_bytes(b"P2\n2 1\n255\n1 2")
    with pytest.raises(FormatError):
        read_pgm(tmp_path / "m.pgm")
    with pytest.raises(FormatError):
        write_pgm16(tmp_path / "n.pgm", np.array([[70000]]))


def test_scene_roundtrip(tmp_path, category_scenes):
    g = category_scenes[0]
    meta = save_scene(tmp_path / "s", g, 3, flows="connected")
    scene, loaded = load_scene(tmp_path / "s")
    assert loaded == meta
    assert loaded["index"] == 3 and loaded["rgb"] is None
    np.testing.assert_array_equal(scene.seg, g.scene.seg)
    np.testing.assert_array_equal(scene.depth, g.scene.depth.astype(np.float32))
    assert [j.to_dict() for j in scene.joints] == [j.to_dict() for j in g.scene.joints]
    for p in meta["pairs"]:
        path = tmp_path / "s" / f"flow_{p['a']}_{p['b']}.pfm"
        assert path.exists() == p["connected"]
        if p["connected"]:
            ref, _ = gt_flow(g.scene, p["a"], p["b"])
            np.testing.assert_allclose(read_pfm(path), ref.data, atol=1e-6)


def test_bad_meta(tmp_path, category_scenes):
    save_scene(tmp_path / "s", category_scenes[0], 0, flows="none")
    (tmp_path / "s" / "meta.json").write_text('{"parts": []}')
    with pytest.raises(FormatError):
        load_scene(tmp_path / "s")
    (tmp_path / "s" / "meta.json").write_text("{")
    with pytest.raises(FormatError):
        load_scene(tmp_path / "s")
