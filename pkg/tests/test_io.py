"""Serialization tests: CSV byte stability, the tensor container, and
the row generators for the pipeline artifacts."""
import numpy as np
import pytest

from bevlift.bevpool import GridSpec, pool
from bevlift.errors import PipelineError
from bevlift.io import (
    TENSOR_MAGIC,
    bev_rows,
    error_report_rows,
    fmt,
    histogram_rows,
    maps_rows,
    overlap_report_dict,
    read_csv,
    read_json,
    read_tensor,
    wedge_rows,
    write_csv,
    write_json,
    write_tensor,
)
from bevlift.lifting import WedgeCloud
from bevlift.robustness import ErrorReport, OverlapReport
from bevlift.scene import HIT_GROUND, HIT_SKY, PixelMaps, histogram


class TestFmt:
    def test_floats_use_repr(self):
        assert fmt(0.1) == "0.1"
        assert fmt(1.0 / 3.0) == "0.3333333333333333"
        assert fmt(104.0) == "104.0"
        assert fmt(np.float64(2.5)) == "2.5"

    def test_repr_round_trips_float64(self):
        for x in (0.1, 1.0 / 3.0, 1e-17, 5862908691396908e-16, np.pi):
            assert float(fmt(x)) == x

    def test_ints_and_strings(self):
        assert fmt(7) == "7"
        assert fmt(np.int64(-3)) == "-3"
        assert fmt("height") == "height"


class TestCsv:
    def test_round_trip_with_meta(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(
            path,
            ["a", "b"],
            [(1, 0.5), (2, 1.0 / 3.0)],
            meta={"config_hash": "abc123", "seed": 7},
        )
        meta, header, rows = read_csv(path)
        assert meta == {"config_hash": "abc123", "seed": "7"}
        assert header == ["a", "b"]
        assert [float(r[1]) for r in rows] == [0.5, 1.0 / 3.0]

    def test_no_meta_no_comment_line(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ["a"], [(1,)])
        assert path.read_text() == "a\n1\n"

    def test_writes_are_byte_stable(self, tmp_path):
        rows = [(i, i * 0.1) for i in range(50)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a, ["i", "v"], rows, meta={"seed": 0})
        write_csv(b, ["i", "v"], rows, meta={"seed": 0})
        assert a.read_bytes() == b.read_bytes()

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("")
        with pytest.raises(PipelineError):
            read_csv(path)


class TestJson:
    def test_sorted_keys_and_newline(self, tmp_path):
        path = tmp_path / "t.json"
        write_json(path, {"b": 1, "a": 2})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")
        assert read_json(path) == {"a": 2, "b": 1}


class TestTensor:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "t.btf"
        arr = np.random.default_rng(0).normal(size=(3, 4, 2)).astype(np.float32)
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.shape == (3, 4, 2)
        np.testing.assert_array_equal(back, arr.astype(np.float64))

    def test_float64_payload_is_cast(self, tmp_path):
        path = tmp_path / "t.btf"
        arr = np.array([[0.1, 0.2]])
        write_tensor(path, arr)
        np.testing.assert_allclose(read_tensor(path), arr, atol=1e-7)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.btf"
        write_tensor(path, np.zeros((2, 3), dtype=np.float32))
        raw = path.read_bytes()
        assert raw[:4] == TENSOR_MAGIC
        assert np.frombuffer(raw, "<u4", 1, 4)[0] == 2
        np.testing.assert_array_equal(np.frombuffer(raw, "<u4", 2, 8), [2, 3])
        assert len(raw) == 4 + 4 + 8 + 2 * 3 * 4

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.btf"
        path.write_bytes(b"nope" + b"\x00" * 16)
        with pytest.raises(PipelineError):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.btf"
        write_tensor(path, np.zeros((4, 4), dtype=np.float32))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(PipelineError):
            read_tensor(path)


class TestRowGenerators:
    def test_wedge_rows(self):
        cloud = WedgeCloud(
            np.array([[1.0, 2.0, 3.0]]), np.array([[0.5, -0.5]]), np.array([0.25])
        )
        header, rows = wedge_rows(cloud)
        assert header == ["x", "y", "z", "weight", "f0", "f1"]
        assert list(rows) == [(1.0, 2.0, 3.0, 0.25, 0.5, -0.5)]

    def test_bev_rows_row_major_with_centers(self):
        spec = GridSpec(0.0, 2.0, 0.0, 2.0, 1.0, 1.0, 1)
        cloud = WedgeCloud(
            np.array([[0.5, 1.5, 0.0]]), np.array([[2.0]]), np.array([1.0])
        )
        grid = pool(cloud, spec)
        header, rows = bev_rows(grid)
        rows = list(rows)
        assert header == ["ix", "iy", "cx", "cy", "hits", "c0"]
        assert [r[:2] for r in rows] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert rows[1] == (0, 1, 0.5, 1.5, 1, 2.0)

    def test_maps_rows(self):
        maps = PixelMaps(
            2,
            1,
            np.array([[5.0, np.nan]]),
            np.array([[0.0, np.nan]]),
            np.array([[HIT_GROUND, HIT_SKY]]),
            sample_stride=16,
        )
        header, rows = maps_rows(maps)
        rows = list(rows)
        assert header == ["u", "v", "depth", "height", "hit_kind"]
        assert rows[0] == (8.0, 8.0, 5.0, 0.0, 0)
        assert rows[1][0] == 24.0 and rows[1][4] == -1

    def test_histogram_rows(self):
        header, rows = histogram_rows(histogram([0.1, 0.9], 0.5))
        rows = list(rows)
        assert header == ["bin_left", "bin_right", "count"]
        assert rows[0] == (0.0, 0.5, 1)
        assert rows[1] == (0.5, 1.0, 1)

    def test_error_report_rows(self):
        report = ErrorReport(
            trials=[0, 0],
            objects=[1, 1],
            parameterizations=["height", "depth"],
            errors_m=[0.1, 0.2],
            true_distances_m=[20.0, 20.0],
            n_pixels=[5, 5],
        )
        header, rows = error_report_rows(report)
        rows = list(rows)
        assert header[:3] == ["trial", "object", "parameterization"]
        assert rows[0] == (0, 1, "height", 0.1, 20.0, 5)

    def test_overlap_report_dict(self):
        report = OverlapReport(
            overlap_depth=0.5,
            overlap_height=0.9,
            n_points=100,
            rolls_deg=np.array([0.1, -0.2]),
            pitches_deg=np.array([0.3, 0.4]),
            trial_overlap_depth=np.array([0.5, 0.5]),
            trial_overlap_height=np.array([0.9, 0.9]),
        )
        doc = overlap_report_dict(report)
        assert doc["height_wins"] == 2
        assert doc["n_trials"] == 2
        assert doc["bins"] == {"v_px": 16.0, "depth_m": 2.0, "height_m": 0.1}
        assert len(doc["trials"]) == 2
        assert doc["trials"][1]["roll_deg"] == pytest.approx(-0.2)
