import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from multike.checkpoint import MAGIC, CheckpointError, load_checkpoint, save_checkpoint


@pytest.fixture
def tensors():
    rng = np.random.default_rng(0)
    return {"rel_ent": rng.normal(size=(6, 4)), "dense_b": rng.normal(size=4),
            "conv": rng.normal(size=(2, 2, 3))}


class TestRoundTrip:
    def test_values_match_at_float32(self, tmp_path, tensors):
        path = tmp_path / "ck.bin"
        save_checkpoint(tensors, path, 4)
        dim, loaded = load_checkpoint(path)
        assert dim == 4 and list(loaded) == list(tensors)
        for name, value in tensors.items():
            np.testing.assert_array_equal(loaded[name], value.astype(np.float32))

    def test_same_tensors_same_bytes(self, tmp_path, tensors):
        save_checkpoint(tensors, tmp_path / "a", 4)
        save_checkpoint(tensors, tmp_path / "b", 4)
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    @settings(max_examples=25, deadline=None)
    @given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=1, max_dims=3, max_side=5),
                      elements=st.floats(-1e6, 1e6, width=32)))
    def test_any_float32_array_survives(self, tmp_path_factory, arr):
        path = tmp_path_factory.mktemp("ck") / "x.bin"
        save_checkpoint({"x": arr}, path, 3)
        _, loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded["x"], arr)


class TestErrors:
    def test_bad_magic(self, tmp_path, tensors):
        path = tmp_path / "ck.bin"
        save_checkpoint(tensors, path, 4)
        data = path.read_bytes()
        path.write_bytes(b"XXXX" + data[len(MAGIC):])
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncated_payload(self, tmp_path, tensors):
        path = tmp_path / "ck.bin"
        save_checkpoint(tensors, path, 4)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_shape_mismatch_names_tensor(self, tmp_path, tensors):
        path = tmp_path / "ck.bin"
        save_checkpoint(tensors, path, 4)
        with pytest.raises(CheckpointError, match="rel_ent"):
            load_checkpoint(path, expected_shapes={"rel_ent": (6, 5)})

    def test_dimension_mismatch(self, tmp_path, tensors):
        path = tmp_path / "ck.bin"
        save_checkpoint(tensors, path, 4)
        with pytest.raises(CheckpointError, match="dimension"):
            load_checkpoint(path, expected_dim=8)

    def test_unknown_version(self, tmp_path, tensors):
        path = tmp_path / "ck.bin"
        save_checkpoint(tensors, path, 4)
        data = bytearray(path.read_bytes())
        data[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)
