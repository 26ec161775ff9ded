import pytest

from blessmark.dataset import discover, split
from blessmark.errors import DataError
from blessmark.pixels import save_image
from blessmark.synthetic import write_dataset

from conftest import constant_image


def test_discover_pairs_images_with_masks(tmp_path):
    write_dataset(tmp_path, seed=0, count=3, width=16, height=16)
    items = discover(tmp_path, require_masks=True)
    assert [item.stem for item in items] == ["synth_000", "synth_001", "synth_002"]
    image, mask = items[0].load_pair()
    assert mask.shape == (image.height, image.width)


def test_discover_without_masks(tmp_path):
    save_image(tmp_path / "b.pgm", constant_image(0, 6, 6))
    save_image(tmp_path / "a.ppm", constant_image(0, 6, 6, channels=3))
    (tmp_path / "notes.txt").write_text("ignored", encoding="utf-8")
    items = discover(tmp_path)
    assert [item.stem for item in items] == ["a", "b"]
    assert items[0].mask_path is None
    with pytest.raises(DataError):
        items[0].load_pair()
    with pytest.raises(DataError):
        discover(tmp_path, require_masks=True)


def test_discover_errors(tmp_path):
    with pytest.raises(DataError):
        discover(tmp_path / "missing")
    with pytest.raises(DataError):
        discover(tmp_path)


def test_mask_size_mismatch(tmp_path):
    save_image(tmp_path / "x.pgm", constant_image(0, 6, 6))
    save_image(tmp_path / "x_mask.pgm", constant_image(0, 6, 7))
    (item,) = discover(tmp_path, require_masks=True)
    with pytest.raises(DataError):
        item.load_pair()


def test_split(tmp_path):
    write_dataset(tmp_path, seed=0, count=5, width=16, height=16)
    items = discover(tmp_path)
    train, held_out = split(items, seed=3)
    assert (len(train), len(held_out)) == (3, 2)
    assert sorted(i.stem for i in train + held_out) == [i.stem for i in items]
    assert [i.stem for i in train] == sorted(i.stem for i in train)
    assert split(list(reversed(items)), seed=3) == (train, held_out)
    assert split(items[:1], seed=3) == (items[:1], [])
