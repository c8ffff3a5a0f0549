import numpy as np
import pytest

from vsrkit import Frame, Sequence
from vsrkit.errors import DataIOError
from vsrkit.pngio import read_frame_dir, read_png, write_frame_dir, write_png


@pytest.mark.parametrize("channels", [1, 3])
@pytest.mark.parametrize("bits", [8, 16])
def test_quantized_roundtrip(tmp_path, rng, channels, bits):
    maxv = (1 << bits) - 1
    # start from exactly representable levels so the roundtrip is lossless
    q = rng.integers(0, maxv + 1, size=(6, 7, channels))
    f = Frame(q / maxv)
    p = tmp_path / "x.png"
    write_png(p, f, bit_depth=bits)
    back = read_png(p)
    assert back.shape == f.shape
    assert np.array_equal(back.data, f.data)


def test_decode_maps_levels():
    # v / (2**bits - 1) semantics checked at the extremes and midpoint
    f = Frame(np.array([[[0.0, 128 / 255, 1.0]]]))
    assert f.data[0, 0, 1] == 128 / 255


def test_encode_rounds_half_up(tmp_path):
    # exact .5 ties round up: level 0.5 -> 1, level 1.5 -> 2, level 0.49 -> 0
    vals = np.array([[[0.5 / 255], [1.5 / 255], [0.49 / 255]]])
    write_png(tmp_path / "r.png", Frame(vals), bit_depth=8)
    back = read_png(tmp_path / "r.png")
    assert back.data[0, 0, 0] == 1 / 255
    assert back.data[0, 1, 0] == 2 / 255
    assert back.data[0, 2, 0] == 0.0


def test_encode_clamps(tmp_path):
    f = Frame(np.array([[[-0.5, 0.25, 2.0]]]))
    write_png(tmp_path / "c.png", f, bit_depth=8)
    back = read_png(tmp_path / "c.png")
    assert list(back.data[0, 0]) == [0.0, round(0.25 * 255) / 255, 1.0]


def test_byte_reproducible(tmp_path, rng):
    f = Frame(rng.random((16, 16, 3)))
    write_png(tmp_path / "a.png", f, bit_depth=16)
    write_png(tmp_path / "b.png", f, bit_depth=16)
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_reads_all_filter_types(tmp_path, rng):
    # pillow-free check: round-trip against an independently encoded file
    pytest.importorskip("PIL")
    from PIL import Image

    arr = rng.integers(0, 256, size=(24, 31, 3), dtype=np.uint8)
    p = tmp_path / "pil.png"
    Image.fromarray(arr, mode="RGB").save(p)  # PIL picks adaptive row filters
    back = read_png(p)
    assert np.array_equal(np.round(back.data * 255).astype(np.uint8), arr)


def test_rejects_non_png(tmp_path):
    p = tmp_path / "fake.png"
    p.write_bytes(b"not a png")
    with pytest.raises(DataIOError):
        read_png(p)


def test_rejects_missing_file(tmp_path):
    with pytest.raises(DataIOError):
        read_png(tmp_path / "absent.png")


def test_rejects_unsupported_channels(tmp_path, rng):
    with pytest.raises(DataIOError):
        write_png(tmp_path / "x.png", Frame(rng.random((2, 2, 4))), 8)


def test_frame_dir_roundtrip(tmp_path, rng):
    seq = Sequence(tuple(Frame(rng.integers(0, 256, (5, 5, 3)) / 255) for _ in range(4)))
    names = write_frame_dir(tmp_path / "frames", seq, bit_depth=8)
    assert names == [f"frame_{i:06d}.png" for i in range(4)]
    back = read_frame_dir(tmp_path / "frames")
    assert len(back) == 4
    for a, b in zip(seq, back):
        assert np.array_equal(a.data, b.data)


def test_frame_dir_requires_frames(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(DataIOError):
        read_frame_dir(tmp_path / "empty")
